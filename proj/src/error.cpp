#include "dtqs/error.hpp"

namespace dtqs {

std::string_view to_string(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::input: return "input";
    case ErrorCategory::parse: return "parse";
    case ErrorCategory::schema: return "schema";
    case ErrorCategory::validation: return "validation";
    case ErrorCategory::unreachable: return "unreachable";
    case ErrorCategory::degenerate: return "degenerate";
    case ErrorCategory::contract: return "contract";
    case ErrorCategory::io: return "io";
    case ErrorCategory::config: return "config";
  }
  return "unknown";
}

Error::Error(std::string module, ErrorCategory category, const std::string& message)
    : std::runtime_error("[" + module + "] " + std::string(to_string(category)) + " error: " + message),
      module_(std::move(module)),
      category_(category) {}

}  // namespace dtqs
