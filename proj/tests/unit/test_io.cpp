#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>

#include "fixtures.hpp"
#include "score/errors.hpp"
#include "score/io.hpp"

using namespace score;
namespace fs = std::filesystem;

namespace {

fs::path tmp_file(const std::string& name) {
  auto dir = fs::temp_directory_path() / "score_unit_io";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const fs::path& p, const std::string& bytes) {
  std::ofstream(p, std::ios::binary | std::ios::trunc) << bytes;
}

}  // namespace

TEST_CASE("volume round trip") {
  const Volume3 zero(Grid{2, 2, 2});
  const auto p = tmp_file("zero.svol");
  write_volume(zero, p);
  CHECK(read_volume(p) == zero);

  std::mt19937_64 rng(3);
  auto v = fixture::random_volume(Grid{8, 8, 8, {0.5f, 1.f, 2.5f}}, rng, -1e3, 1e3);
  write_volume(v, p);
  const auto back = read_volume(p);
  CHECK(back.grid() == v.grid());
  CHECK(std::memcmp(back.data().data(), v.data().data(), v.size() * sizeof(float)) == 0);
}

TEST_CASE("x varies fastest") {
  Volume3 v(Grid{4, 3, 2});
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = float(i);
  const auto p = tmp_file("ramp.svol");
  write_volume(v, p);
  const auto back = read_volume(p);
  CHECK(back.at(1, 0, 0) == 1.0f);
  CHECK(back.at(0, 1, 0) == 4.0f);
  CHECK(back.at(0, 0, 1) == 12.0f);
  CHECK(back.at(3, 2, 1) == 23.0f);
}

TEST_CASE("single voxel file layout") {
  Volume3 v(Grid{1, 1, 1});
  v[0] = 3.5f;
  const auto p = tmp_file("one.svol");
  write_volume(v, p);
  const auto bytes = slurp(p);
  REQUIRE(bytes.size() == kSvolHeaderBytes + 4);
  CHECK(bytes.substr(0, 4) == "SVOL");
  CHECK(bytes[4] == 1);
  CHECK(bytes[5] == 0);
  CHECK(bytes[6] == 0);  // kind
  CHECK(bytes[7] == 1);  // K
  float f;
  std::memcpy(&f, bytes.data() + kSvolHeaderBytes, 4);
  CHECK(f == 3.5f);
}

TEST_CASE("malformed files") {
  Volume3 v(Grid{2, 2, 2}, 1.f);
  const auto p = tmp_file("bad.svol");
  write_volume(v, p);
  auto bytes = slurp(p);

  auto magic = bytes;
  magic.replace(0, 4, "XXXX");
  spit(p, magic);
  CHECK_THROWS_AS(read_volume(p), FormatError);

  spit(p, bytes.substr(0, bytes.size() - 1));
  CHECK_THROWS_AS(read_volume(p), TruncatedError);
  spit(p, bytes + "x");
  CHECK_THROWS_AS(read_volume(p), TruncatedError);

  auto nan = bytes;
  const float q = std::numeric_limits<float>::quiet_NaN();
  std::memcpy(nan.data() + kSvolHeaderBytes, &q, 4);
  spit(p, nan);
  CHECK_THROWS_AS(read_volume(p), DataError);

  spit(p, "SVO");
  CHECK_THROWS_AS(read_volume(p), FormatError);

  CHECK_THROWS_AS(read_volume(tmp_file("missing.svol")), IoError);
  CHECK_THROWS_AS(write_volume(v, "/nonexistent_dir/x.svol"), IoError);
}

TEST_CASE("mask round trip and payload") {
  std::mt19937_64 rng(5);
  const Grid g{4, 4, 4};
  RegionMaskSet set({fixture::random_mask(g, rng, 0.4), fixture::random_mask(g, rng, 0.6)});
  const auto p = tmp_file("masks.svol");
  write_masks(set, p);
  CHECK(read_masks(p) == set);
  CHECK(read_svol_header(p).regions == 2);
  CHECK_THROWS_AS(read_volume(p), FormatError);

  RegionMaskSet ones({Mask(Grid{2, 2, 2}, 1)});
  write_masks(ones, p);
  const auto bytes = slurp(p);
  REQUIRE(bytes.size() == kSvolHeaderBytes + 8);
  CHECK(bytes.substr(kSvolHeaderBytes) == std::string(8, '\x01'));

  auto bad = bytes;
  bad[kSvolHeaderBytes + 3] = 7;
  spit(p, bad);
  CHECK_THROWS_AS(read_masks(p), DataError);
}

TEST_CASE("mask payload is region-major") {
  const Grid g{2, 1, 1};
  Mask a(g), b(g);
  a[0] = 1;
  b[1] = 1;
  const auto p = tmp_file("order.svol");
  write_masks(RegionMaskSet({a, b}), p);
  CHECK(slurp(p).substr(kSvolHeaderBytes) == std::string("\x01\x00\x00\x01", 4));
}

TEST_CASE("grid validation") {
  CHECK_THROWS_AS(Volume3(Grid{0, 2, 2}), DataError);
  CHECK_THROWS_AS(Volume3(Grid{2, 2, 2, {1.f, 0.f, 1.f}}), DataError);
  CHECK_THROWS_AS(Mask(Grid{1, 1, 2}, std::vector<std::uint8_t>{0, 2}), DataError);
  CHECK_THROWS_AS(require_same_grid(Grid{2, 2, 2}, Grid{2, 2, 3}, "t"), GridError);
}

TEST_CASE("crop and bounding box") {
  const Grid g{8, 8, 8};
  Mask m(g);
  m.at(2, 3, 4) = 1;
  m.at(5, 3, 6) = 1;
  const Box b = bounding_box(m);
  CHECK(b.lo == std::array<std::int64_t, 3>{2, 3, 4});
  CHECK(b.hi == std::array<std::int64_t, 3>{6, 4, 7});
  const Box e = expand(b, 2, g);
  CHECK(e.lo == std::array<std::int64_t, 3>{0, 1, 2});
  CHECK(e.hi == std::array<std::int64_t, 3>{8, 6, 8});
  const Mask c = crop(m, b);
  CHECK(c.grid().dims == std::array<std::uint32_t, 3>{4, 1, 3});
  CHECK(c.count() == 2);
  CHECK(c.at(0, 0, 0) == 1);
  CHECK(c.at(3, 0, 2) == 1);
  CHECK(bounding_box(Mask(g)).empty());
}
