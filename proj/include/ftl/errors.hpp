#ifndef FTL_ERRORS_HPP
#define FTL_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace ftl {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Tensor or operator dimension mismatch. Messages name the offending shapes.
class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& msg) : Error(msg) {}
};

/// Invalid argument value (non-finite angle, zero factor, bad slope, ...).
class ValueError : public Error {
 public:
  explicit ValueError(const std::string& msg) : Error(msg) {}
};

/// A value lies outside its declared domain (interval dofs, sweep grids).
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& msg) : Error(msg) {}
};

/// Malformed or corrupted external data (IDX files, checkpoints, datasets).
class DataError : public Error {
 public:
  explicit DataError(const std::string& msg) : Error(msg) {}
};

/// Invalid run configuration; raised before any artifact is produced.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

}  // namespace ftl

#endif  // FTL_ERRORS_HPP
