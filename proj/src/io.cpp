#include "score/io.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "score/errors.hpp"

namespace score {
namespace {

void put_u16(std::vector<std::uint8_t>& b, std::uint16_t v) {
  b.push_back(std::uint8_t(v & 0xff));
  b.push_back(std::uint8_t(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(std::uint8_t((v >> (8 * i)) & 0xff));
}

void put_f32(std::vector<std::uint8_t>& b, float f) {
  put_u32(b, std::bit_cast<std::uint32_t>(f));
}

std::uint16_t get_u16(const std::uint8_t* p) {
  return std::uint16_t(p[0] | (p[1] << 8));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) |
         (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
}

float get_f32(const std::uint8_t* p) { return std::bit_cast<float>(get_u32(p)); }

std::vector<std::uint8_t> encode_header(SvolKind kind, std::uint8_t k,
                                        const Grid& g) {
  std::vector<std::uint8_t> b;
  b.reserve(kSvolHeaderBytes);
  b.insert(b.end(), {'S', 'V', 'O', 'L'});
  put_u16(b, kSvolVersion);
  b.push_back(std::uint8_t(kind));
  b.push_back(k);
  for (auto d : g.dims) put_u32(b, d);
  for (auto s : g.spacing) put_f32(b, s);
  return b;
}

SvolHeader decode_header(const std::uint8_t* p) {
  if (std::memcmp(p, "SVOL", 4) != 0) throw FormatError("bad SVOL magic");
  if (get_u16(p + 4) != kSvolVersion) throw FormatError("unsupported SVOL version");
  SvolHeader h;
  const auto kind = p[6];
  if (kind > 1) throw FormatError("unknown SVOL kind");
  h.kind = SvolKind(kind);
  h.regions = p[7];
  if (h.regions == 0) throw FormatError("SVOL region count is zero");
  if (h.kind == SvolKind::FloatVolume && h.regions != 1)
    throw FormatError("float SVOL must have K=1");
  for (int a = 0; a < 3; ++a) {
    h.grid.dims[a] = get_u32(p + 8 + 4 * a);
    h.grid.spacing[a] = get_f32(p + 20 + 4 * a);
  }
  try {
    h.grid.validate();
  } catch (const DataError& e) {
    throw FormatError(std::string("SVOL header: ") + e.what());
  }
  return h;
}

std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void dump(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

SvolHeader parse(const std::vector<std::uint8_t>& bytes, SvolKind expected,
                 std::size_t elem_bytes) {
  if (bytes.size() < kSvolHeaderBytes) {
    if (bytes.size() >= 4 && std::memcmp(bytes.data(), "SVOL", 4) != 0)
      throw FormatError("bad SVOL magic");
    throw FormatError("file shorter than SVOL header");
  }
  auto h = decode_header(bytes.data());
  if (h.kind != expected) throw FormatError("unexpected SVOL kind");
  const std::size_t need = h.grid.size() * h.regions * elem_bytes;
  if (bytes.size() - kSvolHeaderBytes != need)
    throw TruncatedError("SVOL payload length mismatch");
  return h;
}

}  // namespace

SvolHeader read_svol_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::array<std::uint8_t, kSvolHeaderBytes> buf{};
  in.read(reinterpret_cast<char*>(buf.data()), buf.size());
  if (in.gcount() != std::streamsize(buf.size()))
    throw FormatError("file shorter than SVOL header");
  return decode_header(buf.data());
}

Volume3 read_volume(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  const auto h = parse(bytes, SvolKind::FloatVolume, 4);
  std::vector<float> data(h.grid.size());
  const auto* p = bytes.data() + kSvolHeaderBytes;
  for (std::size_t i = 0; i < data.size(); ++i) {
    data[i] = get_f32(p + 4 * i);
    if (!std::isfinite(data[i])) throw DataError("non-finite value in SVOL payload");
  }
  return Volume3(h.grid, std::move(data));
}

void write_volume(const Volume3& v, const std::filesystem::path& path) {
  auto bytes = encode_header(SvolKind::FloatVolume, 1, v.grid());
  bytes.reserve(kSvolHeaderBytes + 4 * v.size());
  for (float f : v.data()) put_f32(bytes, f);
  dump(path, bytes);
}

RegionMaskSet read_masks(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  const auto h = parse(bytes, SvolKind::MaskSet, 1);
  const std::size_t n = h.grid.size();
  std::vector<Mask> masks;
  for (std::size_t k = 0; k < h.regions; ++k) {
    const auto* p = bytes.data() + kSvolHeaderBytes + k * n;
    std::vector<std::uint8_t> data(p, p + n);
    for (auto b : data)
      if (b > 1) throw DataError("mask payload byte outside {0,1}");
    masks.emplace_back(h.grid, std::move(data));
  }
  return RegionMaskSet(std::move(masks));
}

void write_masks(const RegionMaskSet& masks, const std::filesystem::path& path) {
  if (masks.regions() > 255) throw FormatError("SVOL supports at most 255 regions");
  auto bytes = encode_header(SvolKind::MaskSet, std::uint8_t(masks.regions()),
                             masks.grid());
  for (const auto& m : masks.masks())
    bytes.insert(bytes.end(), m.data().begin(), m.data().end());
  dump(path, bytes);
}

}  // namespace score
