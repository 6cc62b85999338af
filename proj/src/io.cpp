#include "dtqs/io.hpp"

#include <fstream>
#include <sstream>

#include "dtqs/error.hpp"

namespace dtqs {

std::string read_text_file(const std::filesystem::path& path, const std::string& module) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(module, ErrorCategory::io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw Error(module, ErrorCategory::io, "read failed for " + path.string());
  return buf.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view content, const std::string& module) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(module, ErrorCategory::io, "cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(module, ErrorCategory::io, "write failed for " + path.string());
}

}  // namespace dtqs
