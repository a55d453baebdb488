#include "sgmm/gmm_fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "sgmm/render.hpp"

namespace sgmm {

void EmConfig::validate() const {
  if (max_iter < 1) throw Error(ErrorKind::InvalidArgument, "max_iter must be >= 1");
  if (!(tol > 0.0)) throw Error(ErrorKind::InvalidArgument, "tol must be > 0");
  if (n_init < 1) throw Error(ErrorKind::InvalidArgument, "n_init must be >= 1");
  if (!(min_var > 0.0)) throw Error(ErrorKind::InvalidArgument, "min_var must be > 0");
}

namespace {

struct Scatter {
  double uu = 0.0, vv = 0.0, uv = 0.0;
};

// Project a scatter matrix onto the covariance family and apply the floor.
// Each branch is the constrained maximizer of the Gaussian M-step objective.
void set_covariance(GaussianComponent& g, const Scatter& s, CovarianceMode mode, double floor) {
  switch (mode) {
    case CovarianceMode::Spherical: {
      const double var = std::max(0.5 * (s.uu + s.vv), floor);
      g.var_u = g.var_v = var;
      g.cov_uv = 0.0;
      break;
    }
    case CovarianceMode::Diagonal:
      g.var_u = std::max(s.uu, floor);
      g.var_v = std::max(s.vv, floor);
      g.cov_uv = 0.0;
      break;
    case CovarianceMode::Full: {
      // Eigenvalue clamp keeps the eigenvectors of the scatter matrix.
      const double mean = 0.5 * (s.uu + s.vv);
      const double half = 0.5 * (s.uu - s.vv);
      const double rad = std::hypot(half, s.uv);
      const double l1 = mean + rad, l2 = mean - rad;
      if (l2 >= floor) {
        g.var_u = s.uu;
        g.var_v = s.vv;
        g.cov_uv = s.uv;
        break;
      }
      double eu, ev;
      if (rad == 0.0) {
        eu = 1.0;
        ev = 0.0;
      } else {
        // Unit eigenvector of l1.
        const double angle = 0.5 * std::atan2(2.0 * s.uv, s.uu - s.vv);
        eu = std::cos(angle);
        ev = std::sin(angle);
      }
      const double c1 = std::max(l1, floor), c2 = std::max(l2, floor);
      g.var_u = c1 * eu * eu + c2 * ev * ev;
      g.var_v = c1 * ev * ev + c2 * eu * eu;
      g.cov_uv = (c1 - c2) * eu * ev;
      // Rounding can pull a diagonal entry a hair under the floor.
      g.var_u = std::max(g.var_u, floor);
      g.var_v = std::max(g.var_v, floor);
      if (g.determinant() <= 0.0) g.cov_uv = 0.0;
      break;
    }
  }
}

Scatter global_scatter(const std::vector<Point>& pts) {
  double mu = 0.0, mv = 0.0;
  for (const Point& p : pts) {
    mu += p.u;
    mv += p.v;
  }
  mu /= pts.size();
  mv /= pts.size();
  Scatter s;
  for (const Point& p : pts) {
    s.uu += (p.u - mu) * (p.u - mu);
    s.vv += (p.v - mv) * (p.v - mv);
    s.uv += (p.u - mu) * (p.v - mv);
  }
  s.uu /= pts.size();
  s.vv /= pts.size();
  s.uv /= pts.size();
  return s;
}

double dist2(const Point& a, const Point& b) {
  const double du = a.u - b.u, dv = a.v - b.v;
  return du * du + dv * dv;
}

std::vector<Point> kmeanspp_centers(const std::vector<Point>& pts, int k, std::mt19937_64& rng) {
  const std::size_t n = pts.size();
  std::vector<Point> centers;
  centers.reserve(k);
  std::vector<double> mindist(n, std::numeric_limits<double>::infinity());
  std::uniform_int_distribution<std::size_t> any(0, n - 1);
  centers.push_back(pts[any(rng)]);
  while (static_cast<int>(centers.size()) < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      mindist[i] = std::min(mindist[i], dist2(pts[i], centers.back()));
      total += mindist[i];
    }
    if (total == 0.0) {
      // Only duplicates left.
      centers.push_back(pts[any(rng)]);
      continue;
    }
    std::uniform_real_distribution<double> unif(0.0, total);
    double target = unif(rng);
    std::size_t chosen = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      target -= mindist[i];
      if (target < 0.0 && mindist[i] > 0.0) {
        chosen = i;
        break;
      }
    }
    while (mindist[chosen] == 0.0 && chosen > 0) --chosen;
    centers.push_back(pts[chosen]);
  }
  return centers;
}

// Seeding plus one Lloyd pass, turned into initial mixture parameters.
GmmParams initial_mixture(const FixationPoints& points, int k, CovarianceMode mode, double floor,
                          std::mt19937_64& rng) {
  const auto& pts = points.points();
  const std::size_t n = pts.size();
  std::vector<Point> centers = kmeanspp_centers(pts, k, rng);

  std::vector<int> label(n);
  for (std::size_t i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      const double d = dist2(pts[i], centers[c]);
      if (d < best) {
        best = d;
        label[i] = c;
      }
    }
  }
  std::vector<double> count(k, 0.0);
  std::vector<Point> sum(k);
  for (std::size_t i = 0; i < n; ++i) {
    count[label[i]] += 1.0;
    sum[label[i]].u += pts[i].u;
    sum[label[i]].v += pts[i].v;
  }
  for (int c = 0; c < k; ++c) {
    if (count[c] > 0) centers[c] = {sum[c].u / count[c], sum[c].v / count[c]};
  }
  std::vector<Scatter> scatter(k);
  for (std::size_t i = 0; i < n; ++i) {
    const int c = label[i];
    const double du = pts[i].u - centers[c].u, dv = pts[i].v - centers[c].v;
    scatter[c].uu += du * du;
    scatter[c].vv += dv * dv;
    scatter[c].uv += du * dv;
  }
  const Scatter fallback = global_scatter(pts);

  GmmParams gmm;
  gmm.canvas_width = points.width();
  gmm.canvas_height = points.height();
  gmm.components.resize(k);
  double total = 0.0;
  for (int c = 0; c < k; ++c) {
    GaussianComponent& g = gmm.components[c];
    g.mu_u = centers[c].u;
    g.mu_v = centers[c].v;
    Scatter s = fallback;
    if (count[c] >= 2) {
      s = {scatter[c].uu / count[c], scatter[c].vv / count[c], scatter[c].uv / count[c]};
    }
    set_covariance(g, s, mode, floor);
    g.weight = std::max(count[c], 1.0);
    total += g.weight;
  }
  for (auto& g : gmm.components) g.weight /= total;
  return gmm;
}

// log(weight_c) + log N(p; c) for every point/component pair, plus per-point
// log-sum-exp. Returns the total log-likelihood.
double e_step(const std::vector<Point>& pts, const GmmParams& gmm, Matrix& log_joint, std::vector<double>& log_norm) {
  const std::size_t n = pts.size(), k = gmm.components.size();
  log_joint = Matrix(n, k);
  log_norm.assign(n, 0.0);
  std::vector<GaussianKernel> kernels;
  std::vector<double> offset(k);
  kernels.reserve(k);
  for (std::size_t c = 0; c < k; ++c) {
    kernels.emplace_back(gmm.components[c]);
    const double w = gmm.components[c].weight;
    offset[c] = (w > 0.0 ? std::log(w) : -std::numeric_limits<double>::infinity()) + std::log(kernels[c].peak());
  }
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      const double lj = offset[c] - 0.5 * kernels[c].mahalanobis2(pts[i].u, pts[i].v);
      log_joint(i, c) = lj;
      best = std::max(best, lj);
    }
    double acc = 0.0;
    for (std::size_t c = 0; c < k; ++c) acc += std::exp(log_joint(i, c) - best);
    log_norm[i] = best + std::log(acc);
    total += log_norm[i];
  }
  return total;
}

struct RestartOutcome {
  GmmParams gmm;
  double ll = 0.0;
  std::vector<double> trace;
  std::vector<std::size_t> rescues;
  int iterations = 0;
};

RestartOutcome run_em(const FixationPoints& points, int k, CovarianceMode mode, const EmConfig& cfg,
                      std::uint64_t restart) {
  std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                    static_cast<std::uint32_t>(restart)};
  std::mt19937_64 rng(seq);
  const auto& pts = points.points();
  const std::size_t n = pts.size();
  const Scatter fallback = global_scatter(pts);

  RestartOutcome out;
  out.gmm = initial_mixture(points, k, mode, cfg.min_var, rng);
  Matrix log_joint;
  std::vector<double> log_norm;
  for (int it = 0;; ++it) {
    const double ll = e_step(pts, out.gmm, log_joint, log_norm);
    out.trace.push_back(ll);
    out.ll = ll;
    if (it > 0) {
      const double prev = out.trace[out.trace.size() - 2];
      if (std::abs(ll - prev) <= cfg.tol * std::abs(prev)) break;
    }
    if (it == cfg.max_iter) break;

    // M-step.
    bool rescued = false;
    for (int c = 0; c < k; ++c) {
      double mass = 0.0, su = 0.0, sv = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double r = std::exp(log_joint(i, c) - log_norm[i]);
        mass += r;
        su += r * pts[i].u;
        sv += r * pts[i].v;
      }
      GaussianComponent& g = out.gmm.components[c];
      if (mass < kEmptyComponentMass) {
        // Re-seed at the point the current mixture explains worst.
        const auto worst = std::min_element(log_norm.begin(), log_norm.end()) - log_norm.begin();
        g.mu_u = pts[worst].u;
        g.mu_v = pts[worst].v;
        set_covariance(g, fallback, mode, cfg.min_var);
        g.weight = 1.0 / static_cast<double>(n);
        rescued = true;
        continue;
      }
      const double mu = su / mass, mv = sv / mass;
      Scatter s;
      for (std::size_t i = 0; i < n; ++i) {
        const double r = std::exp(log_joint(i, c) - log_norm[i]);
        const double du = pts[i].u - mu, dv = pts[i].v - mv;
        s.uu += r * du * du;
        s.vv += r * dv * dv;
        s.uv += r * du * dv;
      }
      s.uu /= mass;
      s.vv /= mass;
      s.uv /= mass;
      g.mu_u = mu;
      g.mu_v = mv;
      g.weight = mass / static_cast<double>(n);
      set_covariance(g, s, mode, cfg.min_var);
    }
    double total = 0.0;
    for (const auto& g : out.gmm.components) total += g.weight;
    for (auto& g : out.gmm.components) g.weight /= total;
    if (rescued) out.rescues.push_back(out.trace.size() - 1);
    ++out.iterations;
  }
  return out;
}

}  // namespace

FitResult fit_gmm_detailed(const FixationPoints& points, int num_components, CovarianceMode mode,
                           const EmConfig& config) {
  config.validate();
  if (num_components < 1) throw Error(ErrorKind::InvalidArgument, "component count must be >= 1");
  if (points.size() < static_cast<std::size_t>(num_components)) {
    throw Error(ErrorKind::TooFewPoints, "need at least as many points as components");
  }
  const auto& pts = points.points();
  const bool coincide =
      std::all_of(pts.begin(), pts.end(), [&](const Point& p) { return p == pts.front(); });

  FitResult result;
  if (coincide && num_components > 1) {
    // One effective component; the spares sit on top of it with weight epsilon.
    result.degenerate = true;
    result.gmm.canvas_width = points.width();
    result.gmm.canvas_height = points.height();
    GaussianComponent g;
    g.mu_u = pts.front().u;
    g.mu_v = pts.front().v;
    g.var_u = g.var_v = config.min_var;
    g.cov_uv = 0.0;
    g.weight = kDegenerateWeight;
    result.gmm.components.assign(num_components, g);
    result.gmm.components.front().weight = 1.0 - kDegenerateWeight * (num_components - 1);
    result.log_likelihood = log_likelihood(points, result.gmm);
    result.trace.push_back(result.log_likelihood);
    return result;
  }

  for (int r = 0; r < config.n_init; ++r) {
    RestartOutcome run = run_em(points, num_components, mode, config, static_cast<std::uint64_t>(r));
    if (r == 0 || run.ll > result.log_likelihood) {
      result.gmm = std::move(run.gmm);
      result.log_likelihood = run.ll;
      result.trace = std::move(run.trace);
      result.rescues = std::move(run.rescues);
      result.iterations = run.iterations;
      result.best_restart = r;
    }
  }
  return result;
}

Matrix responsibilities(const FixationPoints& points, const GmmParams& gmm) {
  if (points.empty()) throw Error(ErrorKind::InvalidArgument, "responsibilities need at least one point");
  Matrix log_joint;
  std::vector<double> log_norm;
  e_step(points.points(), gmm, log_joint, log_norm);
  for (std::size_t i = 0; i < log_joint.rows; ++i) {
    for (std::size_t c = 0; c < log_joint.cols; ++c) log_joint(i, c) = std::exp(log_joint(i, c) - log_norm[i]);
  }
  return log_joint;
}

double log_likelihood(const FixationPoints& points, const GmmParams& gmm) {
  Matrix log_joint;
  std::vector<double> log_norm;
  return e_step(points.points(), gmm, log_joint, log_norm);
}

}  // namespace sgmm
