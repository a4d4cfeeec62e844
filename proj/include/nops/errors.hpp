#pragma once

#include <stdexcept>
#include <string>

namespace nops {

/// Coarse failure category; the CLI maps these onto distinct exit codes.
enum class ErrorKind {
    Argument,   // bad flag / parameter value
    Dimension,  // shape or grid mismatch
    Data,       // file format or content problems
    Numeric,    // non-convergence, singular systems, non-finite values
};

class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string& msg)
        : std::runtime_error(msg), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

  private:
    ErrorKind kind_;
};

inline Error argument_error(const std::string& msg) { return Error(ErrorKind::Argument, msg); }
inline Error dimension_error(const std::string& msg) { return Error(ErrorKind::Dimension, msg); }
inline Error data_error(const std::string& msg) { return Error(ErrorKind::Data, msg); }
inline Error numeric_error(const std::string& msg) { return Error(ErrorKind::Numeric, msg); }

}  // namespace nops
