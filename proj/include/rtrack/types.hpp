#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace rtrack {

using Vec2 = Eigen::Vector2d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat4 = Eigen::Matrix4d;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input outside an operation's domain (bound breach, degenerate geometry).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Linear algebra failure; carries a reciprocal condition estimate when known.
class NumericError : public Error {
public:
    NumericError(const std::string& what, double rcond)
        : Error(what), rcond_(rcond) {}
    double rcond() const noexcept { return rcond_; }

private:
    double rcond_;
};

class ConfigError : public Error {
public:
    ConfigError(const std::string& what, int line = 0, std::string key = {})
        : Error(what), line_(line), key_(std::move(key)) {}
    int line() const noexcept { return line_; }
    const std::string& key() const noexcept { return key_; }

private:
    int line_;
    std::string key_;
};

enum class Capability { Ok, TempFailed, PermFailed };
enum class FailureKind { Temporary, Permanent };

inline const char* to_string(Capability c) {
    switch (c) {
    case Capability::Ok: return "ok";
    case Capability::TempFailed: return "temp_failed";
    case Capability::PermFailed: return "perm_failed";
    }
    return "?";
}

inline const char* to_string(FailureKind k) {
    return k == FailureKind::Temporary ? "temporary" : "permanent";
}

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
    constexpr double pi = std::numbers::pi;
    double r = std::remainder(a, 2.0 * pi);  // [-pi, pi]
    if (r <= -pi) r += 2.0 * pi;
    return r;
}

inline Mat symmetrized(const Mat& m) { return 0.5 * (m + m.transpose()); }

}  // namespace rtrack
