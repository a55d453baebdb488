#include "sgmm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "sgmm/render.hpp"
#include "sgmm/transport.hpp"

namespace sgmm {

void MetricConfig::validate() const {
  if (!(kl_eps > 0.0)) throw Error(ErrorKind::InvalidArgument, "kl_eps must be > 0");
  if (emd_max_side < 2) throw Error(ErrorKind::InvalidArgument, "emd_max_side must be >= 2");
  if (auc_splits < 1) throw Error(ErrorKind::InvalidArgument, "auc_splits must be >= 1");
}

namespace {

void require_same_shape(const SaliencyMap& a, const SaliencyMap& b) {
  if (!a.same_shape(b)) throw Error(ErrorKind::ShapeMismatch, "maps differ in size");
}

std::vector<double> sum_normalized(const SaliencyMap& map) {
  const double total = map.sum();
  if (!(total > 0.0)) throw Error(ErrorKind::ZeroMap, "map sums to zero");
  std::vector<double> out(map.values().begin(), map.values().end());
  for (double& x : out) x /= total;
  return out;
}

struct Moments {
  double mean = 0.0;
  double std = 0.0;
};

Moments population_moments(std::span<const double> values) {
  Moments m;
  for (double x : values) m.mean += x;
  m.mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double x : values) ss += (x - m.mean) * (x - m.mean);
  m.std = std::sqrt(ss / static_cast<double>(values.size()));
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  if (*lo == *hi) m.std = 0.0;
  return m;
}

std::size_t pixel_index(const SaliencyMap& map, const Point& p) {
  const int j = static_cast<int>(std::floor(p.u));
  const int i = static_cast<int>(std::floor(p.v));
  if (i < 0 || i >= map.height() || j < 0 || j >= map.width()) {
    throw Error(ErrorKind::BoundsError, "fixation outside the saliency map");
  }
  return static_cast<std::size_t>(i) * map.width() + j;
}

void require_points(const FixationPoints& points) {
  if (points.empty()) throw Error(ErrorKind::InvalidArgument, "metric needs at least one fixation");
}

}  // namespace

double cc(const SaliencyMap& pred, const SaliencyMap& gt) {
  require_same_shape(pred, gt);
  const Moments a = population_moments(pred.values());
  const Moments b = population_moments(gt.values());
  if (!(a.std > 0.0) || !(b.std > 0.0)) throw Error(ErrorKind::ConstantMap, "CC needs non-constant maps");
  double sxy = 0.0;
  for (std::size_t p = 0; p < pred.size(); ++p) sxy += (pred.values()[p] - a.mean) * (gt.values()[p] - b.mean);
  const double r = sxy / static_cast<double>(pred.size()) / (a.std * b.std);
  return std::clamp(r, -1.0, 1.0);
}

double sim(const SaliencyMap& pred, const SaliencyMap& gt) {
  require_same_shape(pred, gt);
  const auto p = sum_normalized(pred);
  const auto g = sum_normalized(gt);
  double s = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) s += std::min(p[k], g[k]);
  return s;
}

double kl_div(const SaliencyMap& pred, const SaliencyMap& gt, const MetricConfig& cfg) {
  cfg.validate();
  require_same_shape(pred, gt);
  const auto p = sum_normalized(pred);
  const auto g = sum_normalized(gt);
  const double eps = cfg.kl_eps;
  double s = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (g[k] > 0.0) s += g[k] * std::log(eps + g[k] / (eps + p[k]));
  }
  return s;
}

SaliencyMap area_downsample(const SaliencyMap& map, int max_side) {
  const int longest = std::max(map.width(), map.height());
  const int factor = (longest + max_side - 1) / max_side;
  if (factor <= 1) return map;
  const int w = (map.width() + factor - 1) / factor;
  const int h = (map.height() + factor - 1) / factor;
  std::vector<double> out(static_cast<std::size_t>(w) * h, 0.0);
  for (int i = 0; i < map.height(); ++i) {
    for (int j = 0; j < map.width(); ++j) {
      out[static_cast<std::size_t>(i / factor) * w + j / factor] += map.at(i, j);
    }
  }
  return SaliencyMap(w, h, std::move(out));
}

double emd(const SaliencyMap& pred, const SaliencyMap& gt, const MetricConfig& cfg) {
  cfg.validate();
  require_same_shape(pred, gt);
  const SaliencyMap a = area_downsample(pred, cfg.emd_max_side);
  const SaliencyMap b = area_downsample(gt, cfg.emd_max_side);
  const auto pa = sum_normalized(a);
  const auto pb = sum_normalized(b);

  // Transport only between occupied cells.
  std::vector<std::size_t> src, dst;
  for (std::size_t k = 0; k < pa.size(); ++k) {
    if (pa[k] > 0.0) src.push_back(k);
    if (pb[k] > 0.0) dst.push_back(k);
  }
  std::vector<double> supply(src.size()), demand(dst.size()), cost(src.size() * dst.size());
  const int w = a.width();
  for (std::size_t s = 0; s < src.size(); ++s) {
    supply[s] = pa[src[s]];
    const double si = static_cast<double>(src[s] / w), sj = static_cast<double>(src[s] % w);
    for (std::size_t t = 0; t < dst.size(); ++t) {
      const double ti = static_cast<double>(dst[t] / w), tj = static_cast<double>(dst[t] % w);
      cost[s * dst.size() + t] = std::hypot(si - ti, sj - tj);
    }
  }
  for (std::size_t t = 0; t < dst.size(); ++t) demand[t] = pb[dst[t]];
  return solve_transport(supply, demand, cost).cost;
}

double nss(const SaliencyMap& pred, const FixationPoints& points) {
  require_points(points);
  const Moments m = population_moments(pred.values());
  if (!(m.std > 0.0)) throw Error(ErrorKind::ConstantMap, "NSS needs a non-constant map");
  double s = 0.0;
  for (const Point& p : points.points()) s += (pred.values()[pixel_index(pred, p)] - m.mean) / m.std;
  return s / static_cast<double>(points.size());
}

double roc_auc(std::vector<double> positives, std::vector<double> negatives) {
  if (positives.empty() || negatives.empty()) throw Error(ErrorKind::InvalidArgument, "ROC needs both classes");
  std::sort(negatives.begin(), negatives.end());
  double wins = 0.0;
  for (double s : positives) {
    const auto lo = std::lower_bound(negatives.begin(), negatives.end(), s);
    const auto hi = std::upper_bound(lo, negatives.end(), s);
    wins += static_cast<double>(lo - negatives.begin()) + 0.5 * static_cast<double>(hi - lo);
  }
  return wins / (static_cast<double>(positives.size()) * static_cast<double>(negatives.size()));
}

namespace {

// ROC with thresholds at the fixation saliency values only; negatives are all
// pixels without a fixation. Curve runs from (0,0) to (1,1), trapezoid area.
double auc_judd(const SaliencyMap& pred, const FixationPoints& points) {
  std::vector<char> is_fix(pred.size(), 0);
  std::vector<double> fix;
  fix.reserve(points.size());
  for (const Point& p : points.points()) {
    const std::size_t k = pixel_index(pred, p);
    is_fix[k] = 1;
    fix.push_back(pred.values()[k]);
  }
  std::vector<double> others;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    if (!is_fix[k]) others.push_back(pred.values()[k]);
  }
  if (others.empty()) throw Error(ErrorKind::InvalidArgument, "AUC-Judd needs at least one non-fixation pixel");
  std::sort(fix.begin(), fix.end(), std::greater<>());
  std::sort(others.begin(), others.end(), std::greater<>());

  const double nf = static_cast<double>(fix.size()), no = static_cast<double>(others.size());
  double area = 0.0, prev_tp = 0.0, prev_fp = 0.0;
  std::size_t fi = 0, oi = 0;
  while (fi < fix.size()) {
    const double t = fix[fi];
    while (fi < fix.size() && fix[fi] >= t) ++fi;
    while (oi < others.size() && others[oi] >= t) ++oi;
    const double tp = static_cast<double>(fi) / nf, fp = static_cast<double>(oi) / no;
    area += 0.5 * (fp - prev_fp) * (tp + prev_tp);
    prev_tp = tp;
    prev_fp = fp;
  }
  area += 0.5 * (1.0 - prev_fp) * (1.0 + prev_tp);
  return area;
}

std::mt19937_64 split_rng(std::uint64_t seed, int split) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(split)};
  return std::mt19937_64(seq);
}

}  // namespace

double auc(const SaliencyMap& pred, const FixationPoints& points, AucVariant variant,
           const FixationPoints* negatives, const MetricConfig& cfg) {
  cfg.validate();
  require_points(points);
  if (variant == AucVariant::Judd) return auc_judd(pred, points);
  if (variant == AucVariant::Shuffled && (negatives == nullptr || negatives->empty())) {
    throw Error(ErrorKind::MissingNegatives, "sAUC needs fixations pooled from other images");
  }

  std::vector<double> pos;
  pos.reserve(points.size());
  for (const Point& p : points.points()) pos.push_back(pred.values()[pixel_index(pred, p)]);
  std::vector<std::size_t> pool;
  if (variant == AucVariant::Shuffled) {
    for (const Point& p : negatives->points()) pool.push_back(pixel_index(pred, p));
  }

  const std::size_t count = pos.size();
  double total = 0.0;
  for (int split = 0; split < cfg.auc_splits; ++split) {
    auto rng = split_rng(cfg.seed, split);
    std::vector<double> neg;
    neg.reserve(count);
    if (variant == AucVariant::Borji) {
      std::uniform_int_distribution<std::size_t> any(0, pred.size() - 1);
      for (std::size_t k = 0; k < count; ++k) neg.push_back(pred.values()[any(rng)]);
    } else if (pool.size() >= count) {
      // Without replacement: partial Fisher-Yates over a copy of the pool.
      std::vector<std::size_t> idx = pool;
      for (std::size_t k = 0; k < count; ++k) {
        std::uniform_int_distribution<std::size_t> pick(k, idx.size() - 1);
        std::swap(idx[k], idx[pick(rng)]);
        neg.push_back(pred.values()[idx[k]]);
      }
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
      for (std::size_t k = 0; k < count; ++k) neg.push_back(pred.values()[pool[pick(rng)]]);
    }
    total += roc_auc(pos, std::move(neg));
  }
  return total / cfg.auc_splits;
}

SaliencyMap center_prior(int width, int height) {
  GaussianComponent g;
  g.mu_u = 0.5 * width;
  g.mu_v = 0.5 * height;
  const double sd = height / 3.0;
  g.var_u = g.var_v = sd * sd;
  GmmParams prior{{g}, width, height};
  RenderConfig rc;
  rc.width = width;
  rc.height = height;
  rc.normalize = Normalization::SumToOne;
  rc.mahalanobis_cutoff = kNoCutoff;
  return render_map(prior, rc);
}

double info_gain(const SaliencyMap& pred, const FixationPoints& points, const MetricConfig& cfg) {
  cfg.validate();
  require_points(points);
  const SaliencyMap base = cfg.baseline ? *cfg.baseline : center_prior(pred.width(), pred.height());
  require_same_shape(pred, base);
  const auto p = sum_normalized(pred);
  const auto b = sum_normalized(base);
  double s = 0.0;
  for (const Point& pt : points.points()) {
    const std::size_t k = pixel_index(pred, pt);
    s += std::log2(cfg.kl_eps + p[k]) - std::log2(cfg.kl_eps + b[k]);
  }
  return s / static_cast<double>(points.size());
}

}  // namespace sgmm
