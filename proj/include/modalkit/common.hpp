#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace modalkit {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Base of every error raised by the library. `kind()` is a stable short tag
/// that the CLI maps onto exit codes.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

/// Malformed expression or system file. Carries the byte offset of the
/// offending token when one is known (npos otherwise).
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t offset = std::string::npos)
        : Error("parse", offset == std::string::npos
                             ? what
                             : what + " at offset " + std::to_string(offset)),
          offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

inline bool all_finite(const Vec& v) { return v.allFinite(); }

} // namespace modalkit
