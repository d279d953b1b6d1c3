#pragma once

// Text serialisation helpers shared by every file format.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace spharm::io {

/// Shortest decimal form that parses back to the identical double.
std::string format_double(double v);

/// Parses a full token as a double; std::nullopt if it is not one.
std::optional<double> parse_double(std::string_view token);
std::optional<long long> parse_int(std::string_view token);

/// Whitespace tokenizer.
std::vector<std::string_view> split_ws(std::string_view line);

/// Reads a whole file; throws FileNotFoundError if it cannot be opened.
std::string read_file(const std::filesystem::path& path);

/// Writes to a temporary sibling and renames it into place, so readers
/// never observe a partially written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Collects outputs of one command under temporary names and publishes
/// them together on commit(). Uncommitted files are removed on destruction.
class StagedOutputs {
 public:
  StagedOutputs() = default;
  StagedOutputs(const StagedOutputs&) = delete;
  StagedOutputs& operator=(const StagedOutputs&) = delete;
  ~StagedOutputs();

  void write(const std::filesystem::path& path, std::string_view content);
  void commit();
  const std::vector<std::filesystem::path>& targets() const { return targets_; }

 private:
  std::vector<std::filesystem::path> temps_;
  std::vector<std::filesystem::path> targets_;
  bool committed_ = false;
};

/// splitmix64 finaliser; used to derive independent stream seeds.
std::uint64_t mix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace spharm::io
