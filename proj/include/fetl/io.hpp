#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace fetl {

std::string read_text_file(const std::filesystem::path& path);

/// Writes via a sibling temporary file and rename, so readers never observe a
/// partially written file.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

/// Stages several outputs and publishes them only after all were written.
/// Anything not committed is removed on destruction.
class AtomicOutputs {
public:
  AtomicOutputs() = default;
  AtomicOutputs(const AtomicOutputs&) = delete;
  AtomicOutputs& operator=(const AtomicOutputs&) = delete;
  ~AtomicOutputs();

  void stage(const std::filesystem::path& path, const std::string& contents);
  void commit();

private:
  std::vector<std::pair<std::filesystem::path, std::filesystem::path>> staged_;  // (temp, final)
};

}  // namespace fetl
