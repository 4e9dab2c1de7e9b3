#pragma once

#include <stdexcept>
#include <string>

namespace nrhonav {

enum class ErrorCode {
    OutOfWindow,
    OutOfSpan,
    DegenerateOrbit,
    SingularRadius,
    StepUnderflow,
    MaxStepsExceeded,
    EventNotFound,
    DegenerateEvent,
    BodyNotInFrame,
    RangeTooClose,
    RankDeficient,
    NotOutsideBody,
    CholeskyFailure,
    InnovationGateExceeded,
    MaxIterExceeded,
    DegenerateRow,
    CorrectionDiverged,
    SeedEscaped,
    InvalidArgument,
    ConfigError,
    IoError,
};

const char* to_string(ErrorCode code);

/// Every recoverable failure in the toolkit is reported as an Error with a code.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what);

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace nrhonav
