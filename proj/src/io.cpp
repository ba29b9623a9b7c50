#include "zkl/io.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

#include "zkl/error.hpp"

namespace zkl {

namespace {

void put_le(std::ofstream& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_le(const std::vector<std::uint8_t>& b, std::size_t pos, int bytes) {
  std::uint64_t v = 0;
  for (int i = bytes - 1; i >= 0; --i) v = (v << 8) | b[pos + i];
  return v;
}

template <typename T>
T field(const json& j, const char* key, const std::string& where, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw InvalidArgument(where + "." + key + ": " + e.what());
  }
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const MlpConfig& cfg, std::span<const double> params) {
  if (params.size() != cfg.param_count()) throw InvalidArgument("save_checkpoint: parameter count mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  const std::string text = mlp_config_to_json(cfg).dump();
  out.write(kCheckpointMagic, 4);
  put_le(out, text.size(), 4);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (double v : params) put_le(out, std::bit_cast<std::uint64_t>(v), 8);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string(), 0);
  const std::vector<std::uint8_t> b{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  if (b.size() < 8) throw FormatError("checkpoint: truncated header", b.size());
  if (std::memcmp(b.data(), kCheckpointMagic, 4) != 0) throw FormatError("checkpoint: bad magic", 0);
  const std::size_t len = get_le(b, 4, 4);
  if (b.size() - 8 < len) throw FormatError("checkpoint: truncated config", b.size());
  Checkpoint ck;
  try {
    ck.config = mlp_config_from_json(json::parse(b.begin() + 8, b.begin() + 8 + static_cast<std::ptrdiff_t>(len)));
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint: malformed config: ") + e.what(), 8);
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("checkpoint: invalid config: ") + e.what(), 8);
  }
  const std::size_t d = ck.config.param_count();
  const std::size_t start = 8 + len;
  if (b.size() - start < d * 8) throw FormatError("checkpoint: truncated parameters", b.size());
  ck.params.resize(d);
  for (std::size_t i = 0; i < d; ++i) ck.params[i] = std::bit_cast<double>(get_le(b, start + 8 * i, 8));
  return ck;
}

json mlp_config_to_json(const MlpConfig& cfg) {
  return json{{"input_dim", cfg.input_dim},
              {"hidden_dims", cfg.hidden_dims},
              {"output_dim", cfg.output_dim},
              {"activation", std::string(to_string(cfg.activation))},
              {"init_scale", cfg.init_scale},
              {"init_seed", cfg.init_seed}};
}

MlpConfig mlp_config_from_json(const json& j, const std::string& where) {
  if (!j.is_object()) throw InvalidArgument(where + ": expected an object");
  MlpConfig cfg;
  cfg.input_dim = field(j, "input_dim", where, cfg.input_dim);
  cfg.hidden_dims = field(j, "hidden_dims", where, cfg.hidden_dims);
  cfg.output_dim = field(j, "output_dim", where, cfg.output_dim);
  try {
    cfg.activation = parse_activation(field<std::string>(j, "activation", where, "tanh"));
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(where + ".activation: " + e.what());
  }
  cfg.init_scale = field(j, "init_scale", where, cfg.init_scale);
  cfg.init_seed = field(j, "init_seed", where, cfg.init_seed);
  try {
    cfg.validate();
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(where + ": " + e.what());
  }
  return cfg;
}

json kernel_to_json(const KernelMatrix& k) {
  json meta{{"kind", std::string(to_string(k.kind))},
            {"input_o", k.meta.input_o},
            {"input_u", k.meta.input_u},
            {"P", k.meta.P},
            {"seed", k.meta.seed},
            {"step", k.meta.step}};
  meta["distribution"] = k.meta.distribution ? json(std::string(to_string(*k.meta.distribution))) : json(nullptr);
  return json{{"meta", meta}, {"rows", k.entries.rows()}, {"cols", k.entries.cols()}, {"entries", k.entries.entries()}};
}

KernelMatrix kernel_from_json(const json& j) {
  KernelMatrix k;
  try {
    const auto& meta = j.at("meta");
    k.kind = meta.at("kind").get<std::string>() == "ZO" ? KernelKind::ZO : KernelKind::FO;
    k.meta.input_o = meta.value("input_o", "");
    k.meta.input_u = meta.value("input_u", "");
    k.meta.P = meta.value("P", std::size_t{0});
    k.meta.seed = meta.value("seed", std::uint64_t{0});
    k.meta.step = meta.value("step", std::uint64_t{0});
    if (meta.contains("distribution") && !meta["distribution"].is_null()) {
      k.meta.distribution = parse_distribution(meta["distribution"].get<std::string>());
    }
    k.entries = Matrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                       j.at("entries").get<std::vector<double>>());
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("kernel json: ") + e.what());
  }
  return k;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::array<char, 32> buf{};
  std::snprintf(buf.data(), buf.size(), "%.17g", v);
  return buf.data();
}

CsvWriter::CsvWriter(std::ostream& out, const std::vector<std::string>& header)
    : out_(out), columns_(header.size()) {
  out_ << kCsvVersionLine << '\n';
  for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
  out_ << '\n';
}

CsvWriter& CsvWriter::cell(std::string_view v) {
  if (filled_ == columns_) throw InvalidArgument("CsvWriter: too many cells in row");
  out_ << (filled_++ ? "," : "") << v;
  return *this;
}

CsvWriter& CsvWriter::cell(double v) { return cell(std::string_view(format_double(v))); }

CsvWriter& CsvWriter::cell(std::uint64_t v) { return cell(std::string_view(std::to_string(v))); }

void CsvWriter::end_row() {
  if (filled_ != columns_) throw InvalidArgument("CsvWriter: row has " + std::to_string(filled_) + " cells");
  out_ << '\n';
  filled_ = 0;
}

void write_text_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  out << contents;
}

}  // namespace zkl
