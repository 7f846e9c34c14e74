// Copyright 2026 The CGRU Authors
// SPDX-License-Identifier: Apache-2.0

#include "numerics/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace cgru::numerics {

namespace {

constexpr char kMagic[4] = {'C', 'G', 'R', 'U'};
constexpr const char* kArchName = "__arch__";

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& b, const std::string& origin) : b_(b), origin_(origin) {}
  std::uint64_t u(int width) {
    need(width);
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(b_[pos_ + i]) << (8 * i);
    pos_ += width;
    return v;
  }
  double f64() { return std::bit_cast<double>(u(8)); }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == b_.size(); }
  [[noreturn]] void fail(const std::string& why) const {
    throw FormatError(origin_ + ": " + why + " at byte " + std::to_string(pos_));
  }

 private:
  void need(std::size_t n) {
    if (pos_ + n > b_.size()) fail("truncated checkpoint");
  }
  const std::vector<std::uint8_t>& b_;
  const std::string& origin_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_tensors(const std::vector<NamedTensor>& tensors) {
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put_u32(out, kCheckpointVersion);
  put_u64(out, tensors.size());
  for (const auto& t : tensors) {
    put_u64(out, t.name.size());
    out.insert(out.end(), t.name.begin(), t.name.end());
    put_u64(out, t.value.rank());
    for (std::size_t d : t.value.shape()) put_u64(out, d);
    for (double v : t.value.values()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

std::vector<NamedTensor> decode_tensors(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
  Reader r(bytes, origin);
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw FormatError(origin + ": bad magic (not a CGRU checkpoint)");
  r.str(4);
  const auto version = r.u(4);
  if (version != kCheckpointVersion) r.fail("unsupported checkpoint version " + std::to_string(version));
  const auto count = r.u(8);
  std::vector<NamedTensor> out;
  for (std::uint64_t k = 0; k < count; ++k) {
    const auto name_len = r.u(8);
    if (name_len > 4096) r.fail("implausible tensor name length");
    std::string name = r.str(name_len);
    const auto rank = r.u(8);
    if (rank > 8) r.fail("implausible tensor rank");
    std::vector<std::size_t> shape;
    std::uint64_t n = 1;
    for (std::uint64_t d = 0; d < rank; ++d) {
      shape.push_back(r.u(8));
      n *= shape.back();
    }
    if (n > (bytes.size() / 8)) r.fail("tensor payload larger than file");
    std::vector<double> data(n);
    for (auto& v : data) v = r.f64();
    out.push_back({std::move(name), Tensor(std::move(shape), std::move(data))});
  }
  if (!r.done()) r.fail("trailing bytes after last tensor");
  return out;
}

std::vector<std::uint8_t> encode_network(const Network& net) {
  std::vector<NamedTensor> tensors;
  Tensor arch = Tensor::matrix(net.arch().size(), 3);
  for (std::size_t i = 0; i < net.arch().size(); ++i) {
    arch(i, 0) = static_cast<double>(static_cast<int>(net.arch()[i].kind));
    arch(i, 1) = static_cast<double>(net.arch()[i].a);
    arch(i, 2) = static_cast<double>(net.arch()[i].b);
  }
  tensors.push_back({kArchName, std::move(arch)});
  for (const auto& p : net.params()) tensors.push_back(p);
  return encode_tensors(tensors);
}

Network decode_network(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
  auto tensors = decode_tensors(bytes, origin);
  if (tensors.empty() || tensors.front().name != kArchName)
    throw FormatError(origin + ": missing architecture record");
  const Tensor& a = tensors.front().value;
  if (a.rank() != 2 || a.cols() != 3) throw FormatError(origin + ": malformed architecture record");
  std::vector<LayerSpec> arch;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const int kind = static_cast<int>(a(i, 0));
    if (kind < 1 || kind > 5) throw FormatError(origin + ": unknown layer kind " + std::to_string(kind));
    arch.push_back({static_cast<LayerKind>(kind), static_cast<std::size_t>(a(i, 1)), static_cast<std::size_t>(a(i, 2))});
  }
  Network net;
  try {
    net = Network(arch);
  } catch (const ShapeError& e) {
    throw FormatError(origin + ": inconsistent architecture: " + e.what());
  }
  if (tensors.size() != net.params().size() + 1)
    throw FormatError(origin + ": expected " + std::to_string(net.params().size()) + " parameter tensors, found " +
                      std::to_string(tensors.size() - 1));
  for (std::size_t k = 0; k < net.params().size(); ++k) {
    auto& p = net.params()[k];
    const auto& t = tensors[k + 1];
    if (t.name != p.name || t.value.shape() != p.value.shape())
      throw FormatError(origin + ": parameter " + t.name + " " + shape_string(t.value.shape()) + " does not match " +
                        p.name + " " + shape_string(p.value.shape()));
    p.value = t.value;
  }
  return net;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

void save_network(const Network& net, const std::filesystem::path& path) { write_file(path, encode_network(net)); }

Network load_network(const std::filesystem::path& path) { return decode_network(read_file(path), path.string()); }

}  // namespace cgru::numerics
