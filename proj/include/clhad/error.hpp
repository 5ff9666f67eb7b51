#pragma once

#include <stdexcept>
#include <string>

namespace clhad {

// Error categories aligned with the CLI exit codes:
// 2 = argument error, 3 = data/format error, 4 = divergence.
enum class ErrorKind { Argument = 2, Data = 3, Divergence = 4 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const { return kind_; }
  int exit_code() const { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

struct ArgumentError : Error {
  explicit ArgumentError(const std::string& w) : Error(ErrorKind::Argument, w) {}
};

// Malformed or inconsistent on-disk artifacts.
struct FormatError : Error {
  explicit FormatError(const std::string& w) : Error(ErrorKind::Data, w) {}
};

// Well-formed files whose contents violate a data contract (NaNs, ...).
struct DataError : Error {
  explicit DataError(const std::string& w) : Error(ErrorKind::Data, w) {}
};

struct ShapeError : Error {
  explicit ShapeError(const std::string& w) : Error(ErrorKind::Data, w) {}
};

// Zero-norm spectrum fed to an angle computation (dead pixel).
struct SimilarityError : Error {
  explicit SimilarityError(const std::string& w) : Error(ErrorKind::Data, w) {}
};

// Background selection produced an empty set; the caller may lower mu.
struct SelectionError : Error {
  explicit SelectionError(const std::string& w) : Error(ErrorKind::Data, w) {}
};

struct IntegrityError : Error {
  explicit IntegrityError(const std::string& w) : Error(ErrorKind::Data, w) {}
};

struct MetricError : Error {
  explicit MetricError(const std::string& w) : Error(ErrorKind::Data, w) {}
};

struct DivergenceError : Error {
  explicit DivergenceError(const std::string& w) : Error(ErrorKind::Divergence, w) {}
};

}  // namespace clhad
