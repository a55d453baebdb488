#include <doctest.h>

#include <cmath>
#include <limits>

#include "sgmm/core.hpp"

using namespace sgmm;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an sgmm::Error");
  return ErrorKind::InvalidArgument;
}

}  // namespace

TEST_CASE("validate_gmm accepts a single unit-weight component") {
  GmmParams g{{{1.0, 320, 240, 361, 361, 0}}, 640, 480};
  CHECK(validate_gmm(g).empty());
}

TEST_CASE("validate_gmm reports a weight sum off by 0.1") {
  GmmParams g{{{0.6, 10, 10, 4, 4, 0}, {0.5, 20, 20, 4, 4, 0}}, 64, 64};
  const auto v = validate_gmm(g);
  REQUIRE(v.size() == 1);
  CHECK(v[0] == "weights sum 1.1 ≠ 1");
}

TEST_CASE("validate_gmm names the non positive definite component") {
  GmmParams g{{{1.0, 10, 10, 1, 1, 1.5}}, 64, 64};
  const auto v = validate_gmm(g);
  REQUIRE(v.size() == 1);
  CHECK(v[0] == "component 0 not positive definite");
}

TEST_CASE("validate_gmm flags empty, negative and non-finite inputs") {
  CHECK(validate_gmm(GmmParams{}).size() == 1);
  GmmParams neg{{{-0.5, 1, 1, 1, 1, 0}, {1.5, 1, 1, 1, 1, 0}}, 4, 4};
  const auto v = validate_gmm(neg);
  REQUIRE(v.size() == 1);
  CHECK(v[0].find("component 0 negative weight") == 0);
  GmmParams nan{{{1.0, std::nan(""), 1, 1, 1, 0}}, 4, 4};
  CHECK(validate_gmm(nan).size() >= 1);
  GmmParams tiny{{{1.0 + 5e-10, 1, 1, 1, 1, 0}}, 4, 4};
  CHECK(validate_gmm(tiny).empty());
}

TEST_CASE("FixationPoints enforces the half-open canvas") {
  CHECK_NOTHROW(FixationPoints({{0, 0}, {639.999, 479.5}}, 640, 480));
  CHECK(kind_of([] { FixationPoints({{640, 10}}, 640, 480); }) == ErrorKind::BoundsError);
  CHECK(kind_of([] { FixationPoints({{-0.1, 10}}, 640, 480); }) == ErrorKind::BoundsError);
  CHECK(kind_of([] { FixationPoints({{1, 480}}, 640, 480); }) == ErrorKind::BoundsError);
  CHECK(kind_of([] { FixationPoints({}, 0, 10); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("SaliencyMap rejects negative, non-finite and mis-sized data") {
  CHECK(kind_of([] { SaliencyMap(2, 2, std::vector<double>{1, 2, 3}); }) == ErrorKind::InvalidArgument);
  CHECK(kind_of([] { SaliencyMap(2, 1, std::vector<double>{1, -1}); }) == ErrorKind::InvalidArgument);
  CHECK(kind_of([] { SaliencyMap(1, 1, std::vector<double>{std::numeric_limits<double>::infinity()}); }) ==
        ErrorKind::InvalidArgument);
  CHECK(kind_of([] { SaliencyMap(0, 3); }) == ErrorKind::InvalidArgument);
  const SaliencyMap m(3, 2, std::vector<double>{0, 1, 2, 3, 4, 5});
  CHECK(m.at(1, 0) == 3);
  CHECK(m.sum() == 15);
  CHECK(m.max() == 5);
}

TEST_CASE("pixel centers sit half a pixel in") {
  CHECK(pixel_center(0) == 0.5);
  CHECK(pixel_center(9) == 9.5);
}

TEST_CASE("mode and layout names round trip") {
  for (auto m : {CovarianceMode::Spherical, CovarianceMode::Diagonal, CovarianceMode::Full}) {
    CHECK(parse_covariance_mode(to_string(m)) == m);
  }
  for (auto l : {AnchorLayout::Square, AnchorLayout::HorizontalOnly, AnchorLayout::VerticalOnly, AnchorLayout::None}) {
    CHECK(parse_anchor_layout(to_string(l)) == l);
  }
  CHECK(parse_covariance_mode("F") == CovarianceMode::Full);
  CHECK(parse_anchor_layout("AV") == AnchorLayout::VerticalOnly);
  CHECK(kind_of([] { parse_covariance_mode("tied"); }) == ErrorKind::InvalidArgument);
  CHECK(kind_of([] { parse_anchor_layout("diagonal"); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("RawParamMap layout is cell-major with six slots") {
  RawParamMap r(2, 3);
  CHECK(r.cells() == 6);
  CHECK(r.values().size() == 36);
  r.at(1, 2, kRawScaleUV) = 7;
  CHECK(r.values()[(1 * 3 + 2) * 6 + 5] == 7);
  CHECK(r.all_finite());
  r.at(0, kRawWeight) = std::nan("");
  CHECK_FALSE(r.all_finite());
  CHECK(kind_of([] { RawParamMap(2, 2, std::vector<double>(23)); }) == ErrorKind::ShapeMismatch);
}

TEST_CASE("errors carry their kind and line") {
  const LineError e(ErrorKind::ParseError, 7, "bad");
  CHECK(e.kind() == ErrorKind::ParseError);
  CHECK(e.line() == 7);
  CHECK(std::string(e.what()) == "ParseError: line 7: bad");
}
