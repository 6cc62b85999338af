#ifndef DTQS_ERROR_HPP
#define DTQS_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace dtqs {

enum class ErrorCategory {
  input,        // out-of-range or otherwise invalid argument
  parse,        // malformed file content
  schema,       // missing or unexpected columns/properties
  validation,   // structurally valid data violating a domain invariant
  unreachable,  // no directed route between two network locations
  degenerate,   // computation undefined for the given data
  contract,     // caller broke an operation precondition
  io,           // filesystem failure
  config,       // invalid run configuration
};

std::string_view to_string(ErrorCategory category);

/// Error carrying the module that raised it and a coarse category used for
/// CLI exit codes.
class Error : public std::runtime_error {
 public:
  Error(std::string module, ErrorCategory category, const std::string& message);

  const std::string& module() const noexcept { return module_; }
  ErrorCategory category() const noexcept { return category_; }

 private:
  std::string module_;
  ErrorCategory category_;
};

}  // namespace dtqs

#endif  // DTQS_ERROR_HPP
