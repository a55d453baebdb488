#pragma once

// Reference implementations used only by the tests. They follow textbook
// formulas directly and share no code with the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

#include "sgmm/core.hpp"

namespace oracle {

// Two-pass Pearson correlation in long double.
inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = a.size();
  long double ma = 0, mb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  long double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return static_cast<double>(sab / std::sqrt(saa * sbb));
}

inline std::vector<double> values(const sgmm::SaliencyMap& m) { return {m.values().begin(), m.values().end()}; }

// Bivariate normal density through the explicit 2x2 inverse.
inline double density(double u, double v, const sgmm::GaussianComponent& c) {
  const double det = c.var_u * c.var_v - c.cov_uv * c.cov_uv;
  const double iuu = c.var_v / det, ivv = c.var_u / det, iuv = -c.cov_uv / det;
  const double du = u - c.mu_u, dv = v - c.mu_v;
  const double q = du * du * iuu + 2 * du * dv * iuv + dv * dv * ivv;
  return std::exp(-0.5 * q) / (2 * std::numbers::pi * std::sqrt(det));
}

inline double mixture(double u, double v, const sgmm::GmmParams& g) {
  double s = 0;
  for (const auto& c : g.components) s += c.weight * density(u, v, c);
  return s;
}

// Adaptive Simpson quadrature in 1D, nested for 2D.
inline double simpson_1d(const std::function<double(double)>& f, double a, double b, double fa, double fm, double fb,
                         double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6 * (fa + 4 * flm + fm);
  const double right = (b - m) / 6 * (fm + 4 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) <= 15 * tol) return left + right + (left + right - whole) / 15;
  return simpson_1d(f, a, m, fa, flm, fm, left, tol / 2, depth - 1) +
         simpson_1d(f, m, b, fm, frm, fb, right, tol / 2, depth - 1);
}

inline double integrate_1d(const std::function<double(double)>& f, double a, double b, double tol) {
  // Split first so narrow peaks are not missed by the initial five samples.
  const int pieces = 64;
  double total = 0;
  for (int k = 0; k < pieces; ++k) {
    const double lo = a + (b - a) * k / pieces, hi = a + (b - a) * (k + 1) / pieces;
    const double fa = f(lo), fm = f(0.5 * (lo + hi)), fb = f(hi);
    total += simpson_1d(f, lo, hi, fa, fm, fb, (hi - lo) / 6 * (fa + 4 * fm + fb), tol / pieces, 40);
  }
  return total;
}

inline double integrate_2d(const std::function<double(double, double)>& f, double u0, double u1, double v0, double v1,
                           double tol) {
  return integrate_1d([&](double v) { return integrate_1d([&](double u) { return f(u, v); }, u0, u1, tol); }, v0, v1,
                      tol * (u1 - u0));
}

// Minimizes c.x subject to A x = b, x >= 0 with a dense two-phase tableau
// simplex and Bland's rule.
inline double linear_program(std::vector<std::vector<double>> A, std::vector<double> b, const std::vector<double>& c) {
  std::size_t m = A.size();
  const std::size_t n = c.size();
  for (std::size_t i = 0; i < m; ++i) {
    if (b[i] < 0) {
      for (double& x : A[i]) x = -x;
      b[i] = -b[i];
    }
  }
  // Columns: n originals, m artificials, then the right-hand side.
  const std::size_t cols = n + m + 1;
  std::vector<std::vector<double>> T(m, std::vector<double>(cols, 0.0));
  std::vector<std::size_t> basis(m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) T[i][j] = A[i][j];
    T[i][n + i] = 1;
    T[i][cols - 1] = b[i];
    basis[i] = n + i;
  }
  const double eps = 1e-12;
  auto run = [&](const std::vector<double>& cost, std::size_t allowed) {
    while (true) {
      std::size_t enter = cols;
      for (std::size_t j = 0; j < allowed; ++j) {
        double r = cost[j];
        for (std::size_t i = 0; i < m; ++i) r -= cost[basis[i]] * T[i][j];
        if (r < -eps) {
          enter = j;
          break;
        }
      }
      if (enter == cols) return;
      std::size_t leave = m;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < m; ++i) {
        if (T[i][enter] > eps) {
          const double ratio = T[i][cols - 1] / T[i][enter];
          if (ratio < best - 1e-15 || (std::abs(ratio - best) <= 1e-15 && basis[i] < basis[leave])) {
            best = ratio;
            leave = i;
          }
        }
      }
      if (leave == m) throw std::runtime_error("unbounded LP");
      const double p = T[leave][enter];
      for (double& x : T[leave]) x /= p;
      for (std::size_t i = 0; i < m; ++i) {
        if (i == leave || T[i][enter] == 0) continue;
        const double f = T[i][enter];
        for (std::size_t j = 0; j < cols; ++j) T[i][j] -= f * T[leave][j];
      }
      basis[leave] = enter;
    }
  };
  std::vector<double> phase1(n + m, 0.0);
  for (std::size_t i = 0; i < m; ++i) phase1[n + i] = 1;
  run(phase1, n + m);
  // Drive zero-level artificials out of the basis; a row with no usable
  // original column is redundant and is dropped.
  for (std::size_t i = 0; i < m;) {
    if (basis[i] < n) {
      ++i;
      continue;
    }
    std::size_t col = n;
    for (std::size_t j = 0; j < n && col == n; ++j) {
      if (std::abs(T[i][j]) > 1e-9) col = j;
    }
    if (col == n) {
      T.erase(T.begin() + static_cast<std::ptrdiff_t>(i));
      basis.erase(basis.begin() + static_cast<std::ptrdiff_t>(i));
      --m;
      continue;
    }
    const double p = T[i][col];
    for (double& x : T[i]) x /= p;
    for (std::size_t r = 0; r < m; ++r) {
      if (r == i || T[r][col] == 0) continue;
      const double f = T[r][col];
      for (std::size_t j = 0; j < cols; ++j) T[r][j] -= f * T[i][j];
    }
    basis[i] = col;
    ++i;
  }
  std::vector<double> phase2(n + m, 0.0);
  for (std::size_t j = 0; j < n; ++j) phase2[j] = c[j];
  run(phase2, n);
  double value = 0;
  for (std::size_t i = 0; i < m; ++i) {
    if (basis[i] < n) value += c[basis[i]] * T[i][cols - 1];
  }
  return value;
}

// Earth mover's distance between two equal-shape maps by the LP above over
// every source/sink pair, Euclidean cost between cell indices.
inline double emd_lp(const sgmm::SaliencyMap& a, const sgmm::SaliencyMap& b) {
  const std::size_t n = a.size();
  const double sa = a.sum(), sb = b.sum();
  std::vector<double> c(n * n);
  std::vector<std::vector<double>> A;
  std::vector<double> rhs;
  const int w = a.width();
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t t = 0; t < n; ++t) {
      c[s * n + t] = std::hypot(double(s / w) - double(t / w), double(s % w) - double(t % w));
    }
  }
  for (std::size_t s = 0; s < n; ++s) {
    std::vector<double> row(n * n, 0.0);
    for (std::size_t t = 0; t < n; ++t) row[s * n + t] = 1;
    A.push_back(row);
    rhs.push_back(a.values()[s] / sa);
  }
  // The last sink constraint is implied by the others.
  for (std::size_t t = 0; t + 1 < n; ++t) {
    std::vector<double> row(n * n, 0.0);
    for (std::size_t s = 0; s < n; ++s) row[s * n + t] = 1;
    A.push_back(row);
    rhs.push_back(b.values()[t] / sb);
  }
  return linear_program(A, rhs, c);
}

// Fraction of (positive, negative) pairs ranked correctly, ties worth 1/2.
inline double pairwise_auc(const std::vector<double>& pos, const std::vector<double>& neg) {
  double wins = 0;
  for (double p : pos) {
    for (double q : neg) wins += p > q ? 1.0 : (p == q ? 0.5 : 0.0);
  }
  return wins / (double(pos.size()) * double(neg.size()));
}

struct SampleStats {
  double mean_u = 0, mean_v = 0, var_u = 0, var_v = 0, cov_uv = 0;
};

// Maximum-likelihood (1/N) sample moments.
inline SampleStats sample_stats(const std::vector<sgmm::Point>& pts) {
  SampleStats s;
  for (const auto& p : pts) {
    s.mean_u += p.u;
    s.mean_v += p.v;
  }
  s.mean_u /= pts.size();
  s.mean_v /= pts.size();
  for (const auto& p : pts) {
    s.var_u += (p.u - s.mean_u) * (p.u - s.mean_u);
    s.var_v += (p.v - s.mean_v) * (p.v - s.mean_v);
    s.cov_uv += (p.u - s.mean_u) * (p.v - s.mean_v);
  }
  s.var_u /= pts.size();
  s.var_v /= pts.size();
  s.cov_uv /= pts.size();
  return s;
}

// The floor keeps exactly-zero partials (where the difference quotient is
// pure roundoff, about eps / h) from counting as relative failures.
inline double rel_err(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

inline std::vector<sgmm::Point> gaussian_points(std::mt19937_64& rng, int n, double mu_u, double mu_v, double sd,
                                                int width, int height) {
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<sgmm::Point> pts;
  while (static_cast<int>(pts.size()) < n) {
    const sgmm::Point p{mu_u + sd * z(rng), mu_v + sd * z(rng)};
    if (p.u >= 0 && p.u < width && p.v >= 0 && p.v < height) pts.push_back(p);
  }
  return pts;
}

}  // namespace oracle
