#include "fetl/io.hpp"

#include "fetl/errors.hpp"

#include <fstream>
#include <sstream>
#include <system_error>

namespace fs = std::filesystem;

namespace fetl {

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

namespace {

fs::path temp_sibling(const fs::path& path) { return fs::path(path.string() + ".tmp"); }

void write_raw(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << contents;
  out.close();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace

void write_file_atomic(const fs::path& path, const std::string& contents) {
  AtomicOutputs out;
  out.stage(path, contents);
  out.commit();
}

AtomicOutputs::~AtomicOutputs() {
  for (const auto& [temp, final_path] : staged_) {
    std::error_code ec;
    fs::remove(temp, ec);
  }
}

void AtomicOutputs::stage(const fs::path& path, const std::string& contents) {
  const auto temp = temp_sibling(path);
  staged_.emplace_back(temp, path);
  write_raw(temp, contents);
}

void AtomicOutputs::commit() {
  for (const auto& [temp, final_path] : staged_) {
    std::error_code ec;
    fs::rename(temp, final_path, ec);
    if (ec) throw IoError("cannot publish '" + final_path.string() + "': " + ec.message());
  }
  staged_.clear();
}

}  // namespace fetl
