#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace flexmarket {

enum class ErrorKind {
  kFileMissing,
  kParse,
  kValidation,
  kOutOfRange,
  kPrecondition,
  kDimension,
  kNotPsd,
  kInfeasible,
  kNodeLimit,
};

const char* to_string(ErrorKind kind);

/// A single field-level problem found while validating input.
struct Diagnostic {
  std::string field;
  std::string message;
};

/// Library-wide exception. Validation failures carry one diagnostic per
/// offending field; other kinds usually carry none.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what, std::vector<Diagnostic> diagnostics = {});

  ErrorKind kind() const noexcept { return kind_; }
  const std::vector<Diagnostic>& diagnostics() const noexcept { return diagnostics_; }

  /// True when any diagnostic field path contains `field`.
  bool names_field(const std::string& field) const;

 private:
  ErrorKind kind_;
  std::vector<Diagnostic> diagnostics_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

inline void require(bool condition, ErrorKind kind, const std::string& what) {
  if (!condition) fail(kind, what);
}

}  // namespace flexmarket
