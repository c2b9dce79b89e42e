#include "flexmarket/error.hpp"

namespace flexmarket {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kFileMissing: return "file-missing";
    case ErrorKind::kParse: return "parse-failure";
    case ErrorKind::kValidation: return "validation-failure";
    case ErrorKind::kOutOfRange: return "out-of-range";
    case ErrorKind::kPrecondition: return "precondition-violation";
    case ErrorKind::kDimension: return "dimension-mismatch";
    case ErrorKind::kNotPsd: return "not-psd";
    case ErrorKind::kInfeasible: return "infeasible";
    case ErrorKind::kNodeLimit: return "node-limit";
  }
  return "unknown";
}

namespace {

std::string compose(const std::string& what, const std::vector<Diagnostic>& diagnostics) {
  std::string out = what;
  for (const auto& d : diagnostics) {
    out += "\n  ";
    out += d.field;
    out += ": ";
    out += d.message;
  }
  return out;
}

}  // namespace

Error::Error(ErrorKind kind, const std::string& what, std::vector<Diagnostic> diagnostics)
    : std::runtime_error(compose(what, diagnostics)), kind_(kind), diagnostics_(std::move(diagnostics)) {}

bool Error::names_field(const std::string& field) const {
  for (const auto& d : diagnostics_) {
    if (d.field.find(field) != std::string::npos) return true;
  }
  return false;
}

void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace flexmarket
