#pragma once

/**
 * @file random.hpp
 * @brief Seeded random streams with a hierarchical seed derivation.
 *
 * Boost's mt19937_64 and distributions are used because their output is
 * specified independently of the standard library implementation, so a root
 * seed reproduces the same numbers on any platform.
 */

#include "nrhonav/core/types.hpp"

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>

#include <cstdint>
#include <initializer_list>

namespace nrhonav {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Derives a child seed from a root and a path of labels (run index, subsystem id, ...).
constexpr std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> path) {
    std::uint64_t s = mix64(root);
    for (std::uint64_t p : path) s = mix64(s ^ mix64(p + 0x632be59bd9b4e019ULL));
    return s;
}

/// Subsystem labels for derive_seed.
enum class Substream : std::uint64_t {
    InitialError = 1,
    MeasurementNoise = 2,
    Attitude = 3,
    Execution = 4,
    OrbitDetermination = 5,
    SrpParameters = 6,
    Validation = 7,
};

class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : engine_(seed) {}
    RandomStream(std::uint64_t root, std::initializer_list<std::uint64_t> path)
        : engine_(derive_seed(root, path)) {}

    double normal(double sigma = 1.0) {
        boost::random::normal_distribution<double> d(0.0, 1.0);
        return sigma * d(engine_);
    }
    double uniform(double lo, double hi) {
        boost::random::uniform_real_distribution<double> d(lo, hi);
        return d(engine_);
    }
    Vec3 normal3(double sigma = 1.0) {
        const double a = normal(sigma);
        const double b = normal(sigma);
        const double c = normal(sigma);
        return {a, b, c};
    }

    /// Uniformly distributed (Haar) random rotation matrix.
    Mat3 rotation() {
        Eigen::Vector4d q;
        do {
            for (int i = 0; i < 4; ++i) q[i] = normal();
        } while (q.norm() < 1e-12);
        q.normalize();
        return Eigen::Quaterniond(q[0], q[1], q[2], q[3]).toRotationMatrix();
    }

    /// Unit vector uniformly distributed on the sphere.
    Vec3 unit_vector() {
        Vec3 v;
        do {
            v = normal3();
        } while (v.norm() < 1e-12);
        return v.normalized();
    }

    boost::random::mt19937_64& engine() { return engine_; }

private:
    boost::random::mt19937_64 engine_;
};

}  // namespace nrhonav
