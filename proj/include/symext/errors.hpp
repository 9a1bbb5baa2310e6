#pragma once

#include <stdexcept>

namespace symext {

// Common base so callers can catch all library failures at once.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionTooLarge : Error { using Error::Error; };
struct ConvergenceFailure : Error { using Error::Error; };
struct IndexOutOfRange : Error { using Error::Error; };
struct BadDims : Error { using Error::Error; };
struct BadDomain : Error { using Error::Error; };
struct NotCirculant : Error { using Error::Error; };
struct DimensionMismatch : Error { using Error::Error; };
struct NegativeAbsorber : Error { using Error::Error; };
struct NumericalFailure : Error { using Error::Error; };
struct NotExtendible : Error { using Error::Error; };
struct CorruptCertificate : Error { using Error::Error; };
struct FileError : Error { using Error::Error; };

}  // namespace symext
