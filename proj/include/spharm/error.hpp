#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace spharm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Least-squares design matrix without full column rank.
class RankDeficientError : public Error {
 public:
  using Error::Error;
};

/// Geometric or statistical configuration that admits no unique answer
/// (collinear landmarks, spherical first-order ellipsoid, class too small).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

/// Dimension mismatch between operands.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file; carries the file and the 1-based line.
class ParseError : public Error {
 public:
  ParseError(std::string file, std::size_t line, const std::string& what)
      : Error(file + ":" + std::to_string(line) + ": " + what), file_(std::move(file)), line_(line) {}

  const std::string& file() const { return file_; }
  std::size_t line() const { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

class FileNotFoundError : public Error {
 public:
  using Error::Error;
};

}  // namespace spharm
