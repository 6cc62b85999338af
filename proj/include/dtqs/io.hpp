#ifndef DTQS_IO_HPP
#define DTQS_IO_HPP

#include <filesystem>
#include <string>
#include <string_view>

namespace dtqs {

/// Whole-file read; failures raise an io error attributed to `module`.
std::string read_text_file(const std::filesystem::path& path, const std::string& module);
void write_text_file(const std::filesystem::path& path, std::string_view content, const std::string& module);

}  // namespace dtqs

#endif  // DTQS_IO_HPP
