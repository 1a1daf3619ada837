#include "mmsum/nn/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <fstream>
#include <set>

namespace mmsum::nn {

namespace {

constexpr char kMagic[4] = {'M', 'M', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;
  const std::string& path;

  void need(std::size_t n) {
    if (pos + n > buf.size()) fail("checkpoint load: truncated file " + path);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
    return v;
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<unsigned char>(buf[pos++]);
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace

void NamedArrays::put(const std::string& name, Shape shape, std::vector<double> data) {
  check(numel(shape) == data.size(), "named array " + name + ": shape/data mismatch");
  arrays.emplace_back(name, Array{std::move(shape), std::move(data)});
}

void NamedArrays::put_string(const std::string& name, const std::string& value) {
  blobs.emplace_back(name, std::vector<std::uint8_t>(value.begin(), value.end()));
}

void NamedArrays::put_u64(const std::string& name, std::uint64_t value) {
  std::vector<std::uint8_t> b(8);
  for (int i = 0; i < 8; ++i) b[i] = static_cast<std::uint8_t>((value >> (8 * i)) & 0xff);
  blobs.emplace_back(name, std::move(b));
}

const NamedArrays::Array* NamedArrays::find(const std::string& name) const {
  for (const auto& [n, a] : arrays)
    if (n == name) return &a;
  return nullptr;
}

const NamedArrays::Array& NamedArrays::get(const std::string& name) const {
  const Array* a = find(name);
  if (!a) fail("checkpoint load: missing array " + name);
  return *a;
}

bool NamedArrays::has(const std::string& name) const {
  if (find(name)) return true;
  for (const auto& [n, b] : blobs)
    if (n == name) return true;
  return false;
}

std::string NamedArrays::get_string(const std::string& name) const {
  for (const auto& [n, b] : blobs)
    if (n == name) return std::string(b.begin(), b.end());
  fail("checkpoint load: missing entry " + name);
}

std::uint64_t NamedArrays::get_u64(const std::string& name) const {
  for (const auto& [n, b] : blobs)
    if (n == name) {
      check(b.size() == 8, "checkpoint load: entry " + name + " is not a u64");
      std::uint64_t v = 0;
      for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
      return v;
    }
  fail("checkpoint load: missing entry " + name);
}

void save_named_arrays(const NamedArrays& na, const std::string& path) {
  std::string buf;
  buf.append(kMagic, 4);
  put_u32(buf, kVersion);
  put_u64(buf, na.arrays.size() + na.blobs.size());
  for (const auto& [name, arr] : na.arrays) {
    put_u32(buf, static_cast<std::uint32_t>(name.size()));
    buf.append(name);
    buf.push_back(0);  // dtype f64
    buf.push_back(static_cast<char>(arr.shape.size()));
    for (std::size_t e : arr.shape) put_u64(buf, e);
    for (double v : arr.data) put_u64(buf, std::bit_cast<std::uint64_t>(v));
  }
  for (const auto& [name, bytes] : na.blobs) {
    put_u32(buf, static_cast<std::uint32_t>(name.size()));
    buf.append(name);
    buf.push_back(1);  // dtype bytes
    buf.push_back(1);
    put_u64(buf, bytes.size());
    buf.append(bytes.begin(), bytes.end());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  check(out.good(), "cannot open " + path + " for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  check(out.good(), "write failed for " + path);
}

NamedArrays load_named_arrays(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  check(in.good(), "cannot open " + path);
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r{buf, 0, path};

  const std::string magic = r.bytes(4);
  check(magic == std::string(kMagic, 4), "checkpoint load: bad magic in " + path);
  const std::uint32_t version = r.u32();
  check(version == kVersion, "checkpoint load: unsupported format version " +
                                 std::to_string(version) + " in " + path);
  const std::uint64_t count = r.u64();

  NamedArrays na;
  std::set<std::string> seen;
  for (std::uint64_t e = 0; e < count; ++e) {
    const std::uint32_t name_len = r.u32();
    const std::string name = r.bytes(name_len);
    check(seen.insert(name).second, "checkpoint load: duplicate entry " + name);
    const std::uint8_t dtype = r.u8();
    const std::uint8_t rank = r.u8();
    if (dtype == 0) {
      check(rank >= 1 && rank <= 2, "checkpoint load: unsupported rank for " + name);
      Shape shape(rank);
      for (auto& ext : shape) ext = r.u64();
      std::vector<double> data(numel(shape));
      for (double& v : data) v = std::bit_cast<double>(r.u64());
      na.arrays.emplace_back(name, NamedArrays::Array{std::move(shape), std::move(data)});
    } else if (dtype == 1) {
      check(rank == 1, "checkpoint load: byte entry " + name + " must have rank 1");
      const std::uint64_t len = r.u64();
      const std::string bytes = r.bytes(len);
      na.blobs.emplace_back(name, std::vector<std::uint8_t>(bytes.begin(), bytes.end()));
    } else {
      fail("checkpoint load: unknown dtype tag for " + name);
    }
  }
  return na;
}

}  // namespace mmsum::nn
