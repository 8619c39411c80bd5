#include <doctest.h>

#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "score/errors.hpp"
#include "score/morphology.hpp"

using namespace score;

TEST_CASE("ball offsets") {
  CHECK(ball_offsets(0).size() == 1);
  CHECK(ball_offsets(1).size() == 7);
  CHECK(ball_offsets(2).size() == 33);
  for (const auto& o : ball_offsets(3))
    CHECK(o.dx * o.dx + o.dy * o.dy + o.dz * o.dz <= 9);
}

TEST_CASE("erosion examples") {
  const Grid g{9, 9, 9};
  Mask one(g);
  one.at(4, 4, 4) = 1;
  CHECK(erode(one, 1).empty_set());

  const Mask c5 = fixture::cube(g, 2, 7);
  const Mask e = erode(c5, 1);
  CHECK(e == fixture::cube(g, 3, 6));
  CHECK(e == oracle::erode(c5, 1));

  std::mt19937_64 rng(1);
  const Mask r = fixture::random_mask(g, rng, 0.5);
  CHECK(erode(r, 0) == r);
  CHECK(dilate(r, 0) == r);
}

TEST_CASE("erosion treats the outside as background") {
  const Mask full(Grid{5, 5, 5}, 1);
  const Mask e = erode(full, 1);
  CHECK(e == fixture::cube(Grid{5, 5, 5}, 1, 4));
}

TEST_CASE("dilation examples") {
  const Grid g{7, 7, 7};
  CHECK(dilate(Mask(g), 3).empty_set());
  Mask one(g);
  one.at(3, 3, 3) = 1;
  const Mask d = dilate(one, 1);
  CHECK(d.count() == 7);
  CHECK(d.at(2, 3, 3) == 1);
  CHECK(d.at(3, 3, 4) == 1);
  CHECK(d.at(2, 2, 3) == 0);
}

TEST_CASE("opening and closing bracket the mask") {
  const Grid g{16, 16, 16};
  for (int seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng{std::uint64_t(seed)};
    const Mask m = seed % 2 ? fixture::random_blobs(g, rng) : fixture::random_mask(g, rng, 0.6);
    const int e = 1 + seed % 3;
    CHECK(dilate(erode(m, e), e).subset_of(m));
    // Closing only contains the mask away from the boundary, since outside
    // voxels count as background.
    const Mask inner = fixture::with_empty_border(m, e);
    CHECK(inner.subset_of(erode(dilate(inner, e), e)));
  }
}

TEST_CASE("erosion and dilation are dual on padded grids") {
  const Grid g{14, 13, 12};
  for (int seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng{std::uint64_t(seed) + 7};
    const int r = seed % 4;
    const Mask m = fixture::with_empty_border(fixture::random_mask(g, rng, 0.5), r);
    // Complement of the dilation equals erosion of the complement, except the
    // boundary shell where the complement touches the outside.
    const Mask lhs = mask_not(dilate(m, r));
    const Mask rhs = erode(mask_not(m), r);
    const Mask shell = mask_not(fixture::with_empty_border(Mask(g, 1), r));
    CHECK(mask_and_not(lhs, shell) == mask_and_not(rhs, shell));
  }
}

TEST_CASE("erosion and dilation are monotone in the radius") {
  const Grid g{12, 12, 12};
  for (int seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng{std::uint64_t(seed) + 31};
    const Mask m = fixture::random_blobs(g, rng);
    for (int r = 0; r < 3; ++r) {
      CHECK(erode(m, r + 1).subset_of(erode(m, r)));
      CHECK(dilate(m, r).subset_of(dilate(m, r + 1)));
    }
    CHECK(erode(m, 0) == m);
    CHECK(dilate(m, 0) == m);
  }
}

TEST_CASE("erode and dilate match brute force") {
  const Grid g{12, 11, 10};
  for (int seed = 0; seed < 12; ++seed) {
    std::mt19937_64 rng(std::uint64_t(seed) + 100);
    const Mask m = seed % 2 ? fixture::random_blobs(g, rng) : fixture::random_mask(g, rng, 0.7);
    const int r = seed % 4;
    CHECK(oracle::mismatches(erode(m, r), oracle::erode(m, r)) == 0);
    CHECK(oracle::mismatches(dilate(m, r), oracle::dilate(m, r)) == 0);
  }
}

TEST_CASE("bands") {
  const Grid g{11, 11, 11};
  const Mask c5 = fixture::cube(g, 3, 8);
  const auto b0 = make_bands(c5, ErrorLabel::None, 2);
  CHECK(b0.stab == c5);

  const auto be = make_bands(Mask(g), ErrorLabel::Under, 2);
  CHECK(be.stab.empty_set());
  CHECK(be.corr.empty_set());

  const Mask c7 = fixture::cube(g, 2, 9);
  const auto b1 = make_bands(c7, ErrorLabel::Over, 2);
  CHECK(b1.stab == oracle::erode(c7, 2));
  CHECK(b1.corr == mask_and_not(oracle::dilate(c7, 2), oracle::erode(c7, 2)));
  CHECK(mask_and(b1.stab, b1.corr).empty_set());
  CHECK_THROWS_AS(error_label_from_int(3), LabelError);
}

TEST_CASE("spatially varying morphology") {
  const Grid g{12, 12, 12};
  std::mt19937_64 rng(9);
  const Mask m = fixture::random_blobs(g, rng, 4);

  SUBCASE("zero field is the identity") {
    const RadiusField zero(g);
    CHECK(morph_varying(m, zero, MorphMode::Erode) == m);
    CHECK(morph_varying(m, zero, MorphMode::Dilate) == m);
  }
  SUBCASE("constant field reduces to the uniform operators") {
    const RadiusField one(g, 1);
    CHECK(morph_varying(m, one, MorphMode::Dilate) == dilate(m, 1));
    CHECK(morph_varying(m, one, MorphMode::Erode) == erode(m, 1));
  }
  SUBCASE("random field matches brute force") {
    RadiusField f(g);
    std::uniform_int_distribution<int> r(0, 2);
    for (auto& v : f.radius) v = std::uint8_t(r(rng));
    CHECK(oracle::mismatches(morph_varying(m, f, MorphMode::Erode),
                             oracle::erode_varying(m, f.radius)) == 0);
    CHECK(oracle::mismatches(morph_varying(m, f, MorphMode::Dilate),
                             oracle::dilate_varying(m, f.radius)) == 0);
  }
}
