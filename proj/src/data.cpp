#include "zkl/data.hpp"

#include <array>
#include <cstdio>
#include <fstream>
#include <iterator>

#include "zkl/error.hpp"
#include "zkl/rng.hpp"

namespace zkl {

namespace {

std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string(), 0);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class ByteReader {
 public:
  ByteReader(const std::vector<std::uint8_t>& bytes, std::string name) : bytes_(bytes), name_(std::move(name)) {}

  std::uint32_t u32_be() {
    require(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | bytes_[pos_++];
    return v;
  }

  const std::uint8_t* take(std::uint64_t n) {
    require(n);
    const std::uint8_t* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

  std::uint64_t pos() const { return pos_; }

 private:
  void require(std::uint64_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(name_ + ": truncated, needed " + std::to_string(n) + " more bytes", bytes_.size());
    }
  }

  const std::vector<std::uint8_t>& bytes_;
  std::string name_;
  std::uint64_t pos_ = 0;
};

void expect_magic(ByteReader& r, std::uint32_t want, const std::string& name) {
  const std::uint32_t got = r.u32_be();
  if (got != want) {
    char buf[96];
    std::snprintf(buf, sizeof buf, ": bad magic 0x%08x, expected 0x%08x", got, want);
    throw FormatError(name + buf, 0);
  }
}

void put_u32_be(std::ofstream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                              static_cast<char>(v)};
  out.write(b.data(), 4);
}

}  // namespace

void Dataset::validate(std::size_t input_dim, std::size_t num_classes) const {
  if (inputs.size() != labels.size()) throw InvalidArgument("dataset: inputs and labels differ in length");
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i].size() != input_dim) {
      throw InvalidArgument("dataset: input " + std::to_string(i) + " has length " +
                            std::to_string(inputs[i].size()) + ", model expects " + std::to_string(input_dim));
    }
    if (labels[i] >= num_classes) {
      throw InvalidArgument("dataset: label " + std::to_string(labels[i]) + " at index " + std::to_string(i) +
                            " out of range for " + std::to_string(num_classes) + " classes");
    }
  }
}

Dataset synth_blobs(std::size_t num_classes, std::size_t input_dim, std::size_t per_class, double separation,
                    std::uint64_t seed) {
  if (num_classes < 2) throw InvalidArgument("synth_blobs: need at least 2 classes");
  if (per_class < 1) throw InvalidArgument("synth_blobs: per_class must be >= 1");
  if (input_dim < 1) throw InvalidArgument("synth_blobs: input_dim must be >= 1");

  std::vector<Vector> means(num_classes, Vector(input_dim, 0.0));
  if (num_classes <= input_dim) {
    for (std::size_t c = 0; c < num_classes; ++c) means[c][c] = separation;
  } else {
    Stream s(StreamKey{seed, 0, 0, Purpose::DataGen});
    for (auto& m : means) {
      s.fill(m, Distribution::Gaussian);
      const double n = norm2(m);
      for (double& v : m) v *= separation / n;
    }
  }

  Dataset ds;
  ds.name = "blobs";
  ds.seed = seed;
  for (std::size_t c = 0; c < num_classes; ++c) {
    Stream s(StreamKey{seed, 1, c, Purpose::DataGen});
    for (std::size_t k = 0; k < per_class; ++k) {
      Vector x(input_dim);
      s.fill(x, Distribution::Gaussian);
      for (std::size_t i = 0; i < input_dim; ++i) x[i] += means[c][i];
      ds.inputs.push_back(std::move(x));
      ds.labels.push_back(c);
    }
  }
  return ds;
}

std::vector<Vector> read_idx_images(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  const std::string name = path.filename().string();
  ByteReader r(bytes, name);
  expect_magic(r, kIdxImagesMagic, name);
  const std::uint64_t n = r.u32_be();
  const std::uint64_t rows = r.u32_be();
  const std::uint64_t cols = r.u32_be();
  const std::uint64_t per_image = rows * cols;
  std::vector<Vector> images;
  images.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    const std::uint8_t* p = r.take(per_image);
    Vector img(per_image);
    for (std::uint64_t k = 0; k < per_image; ++k) img[k] = p[k] / 255.0;
    images.push_back(std::move(img));
  }
  return images;
}

std::vector<std::size_t> read_idx_labels(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  const std::string name = path.filename().string();
  ByteReader r(bytes, name);
  expect_magic(r, kIdxLabelsMagic, name);
  const std::uint64_t n = r.u32_be();
  const std::uint8_t* p = r.take(n);
  return std::vector<std::size_t>(p, p + n);
}

void write_idx_images(const std::filesystem::path& path, const std::vector<std::vector<std::uint8_t>>& images,
                      std::uint32_t rows, std::uint32_t cols) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  put_u32_be(out, kIdxImagesMagic);
  put_u32_be(out, static_cast<std::uint32_t>(images.size()));
  put_u32_be(out, rows);
  put_u32_be(out, cols);
  for (const auto& img : images) {
    if (img.size() != static_cast<std::size_t>(rows) * cols) throw InvalidArgument("write_idx_images: bad image size");
    out.write(reinterpret_cast<const char*>(img.data()), static_cast<std::streamsize>(img.size()));
  }
}

void write_idx_labels(const std::filesystem::path& path, const std::vector<std::uint8_t>& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  put_u32_be(out, kIdxLabelsMagic);
  put_u32_be(out, static_cast<std::uint32_t>(labels.size()));
  out.write(reinterpret_cast<const char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
}

Dataset load_idx_dataset(const std::filesystem::path& images, const std::filesystem::path& labels) {
  Dataset ds;
  ds.inputs = read_idx_images(images);
  ds.labels = read_idx_labels(labels);
  ds.name = images.filename().string();
  if (ds.inputs.size() != ds.labels.size()) {
    throw InvalidArgument("idx dataset: " + std::to_string(ds.inputs.size()) + " images but " +
                          std::to_string(ds.labels.size()) + " labels");
  }
  return ds;
}

}  // namespace zkl
