#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hmgdyn {

enum class ErrorKind {
  PointAtInfinity,
  DegenerateCorners,
  SingularMatrix,
  ImageTooSmall,
  OutOfBounds,
  SizeMismatch,
  ShapeMismatch,
  ConfigInvalid,
  DatasetEmpty,
  IoError,
  InsufficientCorrespondences,
  NonFinite,
};

std::string_view to_string(ErrorKind kind);

// Single exception type for the library; callers switch on kind() when they
// need to tell failures apart (the CLI maps kinds onto exit codes).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::PointAtInfinity: return "PointAtInfinity";
    case ErrorKind::DegenerateCorners: return "DegenerateCorners";
    case ErrorKind::SingularMatrix: return "SingularMatrix";
    case ErrorKind::ImageTooSmall: return "ImageTooSmall";
    case ErrorKind::OutOfBounds: return "OutOfBounds";
    case ErrorKind::SizeMismatch: return "SizeMismatch";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::ConfigInvalid: return "ConfigInvalid";
    case ErrorKind::DatasetEmpty: return "DatasetEmpty";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::InsufficientCorrespondences: return "InsufficientCorrespondences";
    case ErrorKind::NonFinite: return "NonFinite";
  }
  return "Unknown";
}

}  // namespace hmgdyn
