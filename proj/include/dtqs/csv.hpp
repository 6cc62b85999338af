#ifndef DTQS_CSV_HPP
#define DTQS_CSV_HPP

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dtqs::csv {

/// Splits one RFC 4180 record. Returns nullopt on an unterminated quote.
std::optional<std::vector<std::string>> split_line(std::string_view line);

/// Quotes a field when it contains a separator, quote or line break.
std::string escape(std::string_view field);

std::string join(const std::vector<std::string>& fields);

/// Physical lines of a text buffer with trailing CR removed.
std::vector<std::string_view> lines(std::string_view text);

}  // namespace dtqs::csv

#endif  // DTQS_CSV_HPP
