#include "nrhonav/core/error.hpp"

namespace nrhonav {

const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::OutOfWindow: return "OutOfWindow";
        case ErrorCode::OutOfSpan: return "OutOfSpan";
        case ErrorCode::DegenerateOrbit: return "DegenerateOrbit";
        case ErrorCode::SingularRadius: return "SingularRadius";
        case ErrorCode::StepUnderflow: return "StepUnderflow";
        case ErrorCode::MaxStepsExceeded: return "MaxStepsExceeded";
        case ErrorCode::EventNotFound: return "EventNotFound";
        case ErrorCode::DegenerateEvent: return "DegenerateEvent";
        case ErrorCode::BodyNotInFrame: return "BodyNotInFrame";
        case ErrorCode::RangeTooClose: return "RangeTooClose";
        case ErrorCode::RankDeficient: return "RankDeficient";
        case ErrorCode::NotOutsideBody: return "NotOutsideBody";
        case ErrorCode::CholeskyFailure: return "CholeskyFailure";
        case ErrorCode::InnovationGateExceeded: return "InnovationGateExceeded";
        case ErrorCode::MaxIterExceeded: return "MaxIterExceeded";
        case ErrorCode::DegenerateRow: return "DegenerateRow";
        case ErrorCode::CorrectionDiverged: return "CorrectionDiverged";
        case ErrorCode::SeedEscaped: return "SeedEscaped";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::ConfigError: return "ConfigError";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

}  // namespace nrhonav
