#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "oracles.hpp"
#include "sgmm/gmm_fit.hpp"

using namespace sgmm;

namespace {

FixationPoints two_clusters(std::mt19937_64& rng, double sd, int per_cluster) {
  auto a = oracle::gaussian_points(rng, per_cluster, 100, 100, sd, 640, 480);
  auto b = oracle::gaussian_points(rng, per_cluster, 400, 300, sd, 640, 480);
  a.insert(a.end(), b.begin(), b.end());
  return FixationPoints(a, 640, 480);
}

FixationPoints random_clusters(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(60, 580), v(60, 420), sd(8, 40);
  std::uniform_int_distribution<int> k(1, 4);
  const int clusters = k(rng);
  std::vector<Point> pts;
  for (int c = 0; c < clusters; ++c) {
    auto part = oracle::gaussian_points(rng, n / clusters, u(rng), v(rng), sd(rng), 640, 480);
    pts.insert(pts.end(), part.begin(), part.end());
  }
  return FixationPoints(pts, 640, 480);
}

bool monotone_outside_rescues(const FitResult& r, double slack) {
  for (std::size_t t = 0; t + 1 < r.trace.size(); ++t) {
    if (std::find(r.rescues.begin(), r.rescues.end(), t) != r.rescues.end()) continue;
    if (r.trace[t + 1] < r.trace[t] - slack) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("C=1 fit equals the sample statistics") {
  std::mt19937_64 rng(1);
  const auto pts = oracle::gaussian_points(rng, 200, 320, 240, 20, 640, 480);
  const FixationPoints fp(pts, 640, 480);
  const auto stats = oracle::sample_stats(pts);
  const GmmParams g = fit_gmm(fp, 1, CovarianceMode::Diagonal, {});
  REQUIRE(g.size() == 1);
  const auto& c = g.components[0];
  CHECK(std::abs(c.mu_u - 320) <= 5);
  CHECK(std::abs(c.mu_v - 240) <= 5);
  CHECK(c.mu_u == doctest::Approx(stats.mean_u).epsilon(1e-9));
  CHECK(c.mu_v == doctest::Approx(stats.mean_v).epsilon(1e-9));
  CHECK(c.var_u == doctest::Approx(stats.var_u).epsilon(1e-9));
  CHECK(c.var_v == doctest::Approx(stats.var_v).epsilon(1e-9));
  CHECK(c.cov_uv == 0.0);
  CHECK(c.weight == doctest::Approx(1.0).epsilon(1e-15));

  const GmmParams full = fit_gmm(fp, 1, CovarianceMode::Full, {});
  CHECK(full.components[0].cov_uv == doctest::Approx(stats.cov_uv).epsilon(1e-9));
}

TEST_CASE("C=1 fit recovers the generating variance") {
  std::mt19937_64 rng(1);
  const FixationPoints fp(oracle::gaussian_points(rng, 2000, 320, 240, 20, 640, 480), 640, 480);
  const GaussianComponent c = fit_gmm(fp, 1, CovarianceMode::Diagonal, {}).components[0];
  CHECK(std::abs(c.mu_u - 320) <= 5);
  CHECK(std::abs(c.mu_v - 240) <= 5);
  CHECK(std::abs(c.var_u - 400) <= 60);
  CHECK(std::abs(c.var_v - 400) <= 60);
}

TEST_CASE("repeated single point clamps variances to the floor") {
  const FixationPoints fp(std::vector<Point>(50, Point{100, 100}), 640, 480);
  EmConfig cfg;
  cfg.min_var = 2.5;
  const GmmParams g = fit_gmm(fp, 1, CovarianceMode::Full, cfg);
  CHECK(g.components[0].mu_u == doctest::Approx(100));
  CHECK(g.components[0].mu_v == doctest::Approx(100));
  CHECK(g.components[0].var_u == doctest::Approx(2.5));
  CHECK(g.components[0].var_v == doctest::Approx(2.5));
  CHECK(validate_gmm(g).empty());
}

TEST_CASE("coincident points with C > 1 yield one effective component") {
  const FixationPoints fp(std::vector<Point>(30, Point{12, 34}), 64, 64);
  const FitResult r = fit_gmm_detailed(fp, 4, CovarianceMode::Diagonal, {});
  CHECK(r.degenerate);
  REQUIRE(r.gmm.size() == 4);
  CHECK(r.gmm.components[0].weight == doctest::Approx(1 - 3 * kDegenerateWeight));
  for (int c = 1; c < 4; ++c) CHECK(r.gmm.components[c].weight == kDegenerateWeight);
  CHECK(validate_gmm(r.gmm).empty());
}

TEST_CASE("two well-separated spherical clusters") {
  std::mt19937_64 rng(2);
  const FixationPoints fp = two_clusters(rng, 10, 100);
  const GmmParams g = fit_gmm(fp, 2, CovarianceMode::Spherical, {});
  auto near = [&](double u, double v) {
    return std::any_of(g.components.begin(), g.components.end(), [&](const GaussianComponent& c) {
      return std::abs(c.mu_u - u) <= 5 && std::abs(c.mu_v - v) <= 5 && std::abs(c.weight - 0.5) <= 0.05;
    });
  };
  CHECK(near(100, 100));
  CHECK(near(400, 300));
  for (const auto& c : g.components) CHECK(c.var_u == c.var_v);
}

TEST_CASE("fit errors") {
  const FixationPoints fp({{1, 1}, {2, 2}}, 10, 10);
  try {
    fit_gmm(fp, 3, CovarianceMode::Diagonal, {});
    FAIL("expected TooFewPoints");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::TooFewPoints);
  }
  EmConfig bad;
  bad.tol = 0;
  CHECK_THROWS_AS(fit_gmm(fp, 1, CovarianceMode::Diagonal, bad), Error);
  bad = {};
  bad.n_init = 0;
  CHECK_THROWS_AS(fit_gmm(fp, 1, CovarianceMode::Diagonal, bad), Error);
}

TEST_CASE("responsibilities closed cases") {
  const FixationPoints fp({{10, 10}, {3, 7}}, 64, 64);
  const GmmParams one{{{1, 5, 5, 4, 4, 0}}, 64, 64};
  const Matrix r1 = responsibilities(fp, one);
  CHECK(r1(0, 0) == 1.0);
  CHECK(r1(1, 0) == 1.0);

  const FixationPoints at_a({{100, 100}}, 2000, 2000);
  const GmmParams far{{{0.5, 100, 100, 100, 100, 0}, {0.5, 1100, 100, 100, 100, 0}}, 2000, 2000};
  CHECK(responsibilities(at_a, far)(0, 0) > 0.999);

  const FixationPoints mid({{600, 100}}, 2000, 2000);
  const Matrix rm = responsibilities(mid, far);
  CHECK(rm(0, 0) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(rm(0, 1) == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("responsibility rows sum to one") {
  std::mt19937_64 rng(4);
  const FixationPoints fp = random_clusters(rng, 120);
  const GmmParams g = fit_gmm(fp, 5, CovarianceMode::Full, {});
  const Matrix r = responsibilities(fp, g);
  for (std::size_t i = 0; i < r.rows; ++i) {
    double s = 0;
    for (std::size_t c = 0; c < r.cols; ++c) {
      CHECK(r(i, c) >= 0.0);
      CHECK(r(i, c) <= 1.0);
      s += r(i, c);
    }
    CHECK(std::abs(s - 1) <= 1e-12);
  }
}

TEST_CASE("log-likelihood closed form and additivity") {
  const FixationPoints one({{3, 4}}, 10, 10);
  const GmmParams g{{{1, 3, 4, 1, 1, 0}}, 10, 10};
  CHECK(log_likelihood(one, g) == doctest::Approx(-1.837877).epsilon(1e-6));

  std::mt19937_64 rng(6);
  const FixationPoints fp = random_clusters(rng, 80);
  auto doubled = fp.points();
  doubled.insert(doubled.end(), fp.points().begin(), fp.points().end());
  const GmmParams fit = fit_gmm(fp, 3, CovarianceMode::Diagonal, {});
  CHECK(log_likelihood(FixationPoints(doubled, 640, 480), fit) ==
        doctest::Approx(2 * log_likelihood(fp, fit)).epsilon(1e-13));
}

TEST_CASE("EM is monotone, respects the mode and the variance floor") {
  std::mt19937_64 rng(8);
  for (auto mode : {CovarianceMode::Spherical, CovarianceMode::Diagonal, CovarianceMode::Full}) {
    for (int t = 0; t < 20; ++t) {
      const FixationPoints fp = random_clusters(rng, 150);
      EmConfig cfg;
      cfg.seed = t;
      cfg.min_var = 4.0;
      cfg.n_init = 2;
      const FitResult r = fit_gmm_detailed(fp, 6, mode, cfg);
      CHECK(monotone_outside_rescues(r, 1e-9));
      CHECK(r.trace.back() == r.log_likelihood);
      CHECK(validate_gmm(r.gmm).empty());
      double max_sd = 0;
      for (const auto& c : r.gmm.components) {
        CHECK(c.var_u >= cfg.min_var);
        CHECK(c.var_v >= cfg.min_var);
        if (mode == CovarianceMode::Spherical) CHECK(c.var_u == c.var_v);
        if (mode != CovarianceMode::Full) CHECK(c.cov_uv == 0.0);
        if (mode == CovarianceMode::Full) {
          const double tr = c.var_u + c.var_v;
          const double disc = std::sqrt(0.25 * (c.var_u - c.var_v) * (c.var_u - c.var_v) + c.cov_uv * c.cov_uv);
          CHECK(0.5 * tr - disc >= cfg.min_var * (1 - 1e-12));
        }
        max_sd = std::max({max_sd, std::sqrt(c.var_u), std::sqrt(c.var_v)});
      }
      for (const auto& c : r.gmm.components) {
        CHECK(c.mu_u >= -3 * max_sd);
        CHECK(c.mu_u <= 640 + 3 * max_sd);
        CHECK(c.mu_v >= -3 * max_sd);
        CHECK(c.mu_v <= 480 + 3 * max_sd);
      }
    }
  }
}

TEST_CASE("shuffling the points leaves the optimum unchanged") {
  std::mt19937_64 rng(10);
  const FixationPoints fp = two_clusters(rng, 15, 120);
  auto shuffled = fp.points();
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  EmConfig cfg;
  cfg.tol = 1e-14;
  cfg.max_iter = 2000;
  cfg.n_init = 4;
  const double a = fit_gmm_detailed(fp, 2, CovarianceMode::Full, cfg).log_likelihood;
  const double b = fit_gmm_detailed(FixationPoints(shuffled, 640, 480), 2, CovarianceMode::Full, cfg).log_likelihood;
  CHECK(std::abs(a - b) < 1e-6);
}

TEST_CASE("fit is deterministic under a fixed seed") {
  std::mt19937_64 rng(12);
  const FixationPoints fp = random_clusters(rng, 200);
  EmConfig cfg;
  cfg.seed = 99;
  CHECK(fit_gmm(fp, 8, CovarianceMode::Full, cfg) == fit_gmm(fp, 8, CovarianceMode::Full, cfg));
}
