#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dect {

// Base for every error raised by the library. The CLI maps these to exit code 1.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Dimension mismatch or violated record/model invariant.
class SchemaError : public Error {
  public:
    using Error::Error;
};

// A calibration score vector with a non-positive entry.
class CalibrationDegenerate : public Error {
  public:
    using Error::Error;
};

// NaN/Inf in scoring inputs or gradients.
class NumericsError : public Error {
  public:
    using Error::Error;
};

// A class with too few labeled records for the requested operation.
class MissingClassError : public Error {
  public:
    using Error::Error;
};

class ParseError : public Error {
  public:
    ParseError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

  private:
    std::size_t line_;
};

} // namespace dect
