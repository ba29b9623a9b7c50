#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "zkl/kernel.hpp"
#include "zkl/model.hpp"

namespace zkl {

using json = nlohmann::json;

// ---- parameter checkpoints ----
//
// Layout (all integers little-endian):
//   "ZKL1" | u32 n | n bytes of MlpConfig JSON (UTF-8) | d × f64 in flattening order
// d is implied by the config.

inline constexpr char kCheckpointMagic[4] = {'Z', 'K', 'L', '1'};

struct Checkpoint {
  MlpConfig config;
  ParamVector params;
};

void save_checkpoint(const std::filesystem::path& path, const MlpConfig& cfg, std::span<const double> params);
/// Throws FormatError on a bad magic, malformed config JSON or short payload.
Checkpoint load_checkpoint(const std::filesystem::path& path);

json mlp_config_to_json(const MlpConfig& cfg);
/// Missing fields keep their defaults. Errors name the offending field, prefixed by `where`.
MlpConfig mlp_config_from_json(const json& j, const std::string& where = "model");

// ---- kernel dumps: {meta, rows, cols, entries (row-major)} ----

json kernel_to_json(const KernelMatrix& k);
/// Throws InvalidArgument on missing fields or an entry count that does not match rows×cols.
KernelMatrix kernel_from_json(const json& j);

// ---- CSV ----

/// "%.17g": every double round-trips exactly and reruns are byte-identical.
std::string format_double(double v);

inline constexpr std::string_view kCsvVersionLine = "# zkl-csv v1";

class CsvWriter {
 public:
  /// Writes the version comment line then the header row.
  CsvWriter(std::ostream& out, const std::vector<std::string>& header);

  CsvWriter& cell(std::string_view v);
  CsvWriter& cell(double v);
  CsvWriter& cell(std::uint64_t v);
  void end_row();

 private:
  std::ostream& out_;
  std::size_t columns_;
  std::size_t filled_ = 0;
};

void write_text_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace zkl
