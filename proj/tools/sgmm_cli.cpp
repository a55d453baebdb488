#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "sgmm/gmm_fit.hpp"
#include "sgmm/io.hpp"
#include "sgmm/metrics.hpp"
#include "sgmm/render.hpp"
#include "sgmm/synth.hpp"
#include "sgmm/trainer.hpp"
#include "sgmm/transform.hpp"

namespace fs = std::filesystem;
using namespace sgmm;

namespace {

struct Globals {
  std::uint64_t seed = 0;
  int threads = 1;
  std::string out;
};

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::IoError:
    case ErrorKind::FormatError:
      return 3;
    case ErrorKind::DivergenceDetected:
      return 4;
    default:
      return 2;
  }
}

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("sgmm");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("SGMM_LOG")) spdlog::set_level(spdlog::level::from_str(env));
}

std::string require_out(const Globals& g) {
  if (g.out.empty()) throw Error(ErrorKind::InvalidArgument, "--out is required");
  return g.out;
}

// Output sink: a file when --out is given, stdout otherwise.
void emit_text(const Globals& g, const std::string& text) {
  if (g.out.empty()) {
    std::cout << text;
  } else {
    io::write_file(g.out, text);
  }
}

struct GridOptions {
  std::string layout = "square";
  int rows = 2;
  int cols = 2;
  std::string cov = "diag";
  double var_floor = 1.0;
  double var_activation = 1.0;
  double corr_bound = 0.99;

  void add(CLI::App* cmd) {
    cmd->add_option("--layout", layout, "Anchor layout: square, horizontal, vertical, none");
    cmd->add_option("--rows", rows, "Grid rows");
    cmd->add_option("--cols", cols, "Grid columns");
    cmd->add_option("--cov", cov, "Covariance mode: spherical, diag, full");
    cmd->add_option("--var-floor", var_floor, "Variance floor in px^2");
    cmd->add_option("--var-beta", var_activation, "Softplus sharpness for variances");
    cmd->add_option("--corr-bound", corr_bound, "Maximum |correlation| in full mode");
  }

  TransformConfig transform() const {
    TransformConfig t;
    t.mode = parse_covariance_mode(cov);
    t.var_floor = var_floor;
    t.var_activation = var_activation;
    t.corr_bound = corr_bound;
    t.validate();
    return t;
  }

  AnchorGrid grid(int width, int height) const {
    return make_anchor_grid(parse_anchor_layout(layout), rows, cols, width, height);
  }
};

struct OptOptions {
  OptConfig opt;
  std::string trace;

  void add(CLI::App* cmd, double default_lr, int default_epochs) {
    opt.lr = default_lr;
    opt.epochs = default_epochs;
    cmd->add_option("--lr", opt.lr, "Learning rate");
    cmd->add_option("--epochs", opt.epochs, "Steps (direct-fit) or passes over the data (train-toy)");
    cmd->add_option("--momentum", opt.momentum, "Momentum");
    cmd->add_option("--gt-threshold", opt.threshold_gt, "Component threshold G_t");
    cmd->add_option("--trace", trace, "Write the loss trace here, one value per line");
  }
};

void write_trace(const std::string& path, const std::vector<double>& trace) {
  if (path.empty()) return;
  std::string text;
  char buf[40];
  for (double x : trace) {
    std::snprintf(buf, sizeof buf, "%.17g\n", x);
    text += buf;
  }
  io::write_file(path, text);
}

SaliencyMap identity_feature(const SaliencyMap& gt) { return normalize_map(gt, Normalization::MaxToOne); }

// --- evaluate -------------------------------------------------------------

const std::vector<std::string> kMetricNames = {"cc", "sim", "kl", "emd", "nss", "auc-judd", "auc-borji", "sauc", "ig"};

struct EvalInputs {
  std::string name;
  std::string pred, gt, points, negatives, baseline;
};

std::vector<std::string> split_metrics(const std::string& list) {
  std::vector<std::string> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    if (std::find(kMetricNames.begin(), kMetricNames.end(), item) == kMetricNames.end()) {
      throw Error(ErrorKind::InvalidArgument, "unknown metric '" + item + "'");
    }
    out.push_back(item);
  }
  if (out.empty()) throw Error(ErrorKind::InvalidArgument, "no metrics requested");
  return out;
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string config_hash(const std::string& metric, const MetricConfig& cfg, bool custom_baseline) {
  std::ostringstream ss;
  ss.precision(17);
  ss << metric << ";kl_eps=" << cfg.kl_eps << ";emd_max_side=" << cfg.emd_max_side << ";auc_splits=" << cfg.auc_splits
     << ";seed=" << cfg.seed << ";baseline=" << (custom_baseline ? "file" : "center");
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(ss.str())));
  return buf;
}

double compute_metric(const std::string& metric, const EvalInputs& in, const MetricConfig& base_cfg) {
  const SaliencyMap pred = io::load_map(in.pred);
  auto need = [&](const std::string& path, const char* flag) {
    if (path.empty()) throw Error(ErrorKind::InvalidArgument, "metric " + metric + " needs " + flag);
  };
  if (metric == "cc" || metric == "sim" || metric == "kl" || metric == "emd") {
    need(in.gt, "--gt");
    const SaliencyMap gt = io::load_map(in.gt);
    if (metric == "cc") return cc(pred, gt);
    if (metric == "sim") return sim(pred, gt);
    if (metric == "kl") return kl_div(pred, gt, base_cfg);
    return emd(pred, gt, base_cfg);
  }
  need(in.points, "--points");
  const FixationPoints points = io::load_fixation_points(in.points);
  if (metric == "nss") return nss(pred, points);
  if (metric == "auc-judd") return auc(pred, points, AucVariant::Judd, nullptr, base_cfg);
  if (metric == "auc-borji") return auc(pred, points, AucVariant::Borji, nullptr, base_cfg);
  if (metric == "sauc") {
    if (in.negatives.empty()) throw Error(ErrorKind::MissingNegatives, "sauc needs --negatives");
    const FixationPoints neg = io::load_fixation_points(in.negatives);
    return auc(pred, points, AucVariant::Shuffled, &neg, base_cfg);
  }
  MetricConfig cfg = base_cfg;
  if (!in.baseline.empty()) cfg.baseline = io::load_map(in.baseline);
  return info_gain(pred, points, cfg);
}

std::string eval_records(const EvalInputs& in, const std::vector<std::string>& metrics, const MetricConfig& cfg) {
  std::string out;
  for (const auto& m : metrics) {
    nlohmann::json rec;
    rec["image"] = in.name;
    rec["metric"] = m;
    rec["value"] = compute_metric(m, in, cfg);
    rec["config_hash"] = config_hash(m, cfg, !in.baseline.empty());
    out += rec.dump() + "\n";
  }
  return out;
}

// Manifest: [{"name", "pred", "gt", "points", "negatives", "baseline"}, ...];
// relative paths resolve against the manifest's directory.
std::vector<EvalInputs> load_manifest(const fs::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::FormatError, e.what());
  }
  const fs::path dir = path.parent_path();
  auto resolve = [&](const nlohmann::json& rec, const char* key) -> std::string {
    if (!rec.contains(key)) return {};
    const fs::path p = rec.at(key).get<std::string>();
    return (p.is_absolute() ? p : dir / p).string();
  };
  std::vector<EvalInputs> out;
  try {
    for (const auto& rec : j.at("images")) {
      EvalInputs in;
      in.name = rec.at("name").get<std::string>();
      in.pred = resolve(rec, "pred");
      in.gt = resolve(rec, "gt");
      in.points = resolve(rec, "points");
      in.negatives = resolve(rec, "negatives");
      in.baseline = resolve(rec, "baseline");
      if (in.pred.empty()) throw Error(ErrorKind::FormatError, "manifest entry " + in.name + " has no pred");
      out.push_back(std::move(in));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::FormatError, e.what());
  }
  return out;
}

// Workers pull images from a shared counter; finished records are appended
// to the output strictly in manifest order.
std::string evaluate_batch(const std::vector<EvalInputs>& inputs, const std::vector<std::string>& metrics,
                           const MetricConfig& cfg, int threads) {
  std::vector<std::optional<std::string>> done(inputs.size());
  std::optional<Error> failure;
  std::string sink;
  std::size_t flushed = 0;
  std::mutex mu;
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t k = next++; k < inputs.size(); k = next++) {
      std::string rec;
      try {
        rec = eval_records(inputs[k], metrics, cfg);
      } catch (const Error& e) {
        std::lock_guard lock(mu);
        if (!failure) failure = Error(e.kind(), inputs[k].name + ": " + e.what());
        return;
      }
      std::lock_guard lock(mu);
      done[k] = std::move(rec);
      while (flushed < done.size() && done[flushed]) sink += *std::exchange(done[flushed++], std::string{});
      spdlog::debug("evaluated {}", inputs[k].name);
    }
  };
  std::vector<std::thread> pool;
  const int n = std::max(1, std::min<int>(threads, static_cast<int>(inputs.size())));
  for (int t = 0; t < n; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) throw *failure;
  return sink;
}

// --- synth ----------------------------------------------------------------

void run_synth(const Globals& g, SynthConfig cfg) {
  cfg.seed = g.seed;
  const fs::path dir = require_out(g);
  fs::create_directories(dir);
  nlohmann::json manifest;
  manifest["images"] = nlohmann::json::array();
  for (int k = 0; k < cfg.n_images; ++k) {
    const SynthImage img = synth_image(cfg, k);
    char name[32];
    std::snprintf(name, sizeof name, "img_%04d", k);
    io::save_fixation_points(dir / (std::string(name) + ".csv"), img.points);
    io::save_map(dir / (std::string(name) + "_gt.f64"), img.gt, io::MapFormat::F64Raw);
    io::save_gmm(dir / (std::string(name) + "_truth.json"), img.truth);
    manifest["images"].push_back({{"name", name},
                                  {"points", std::string(name) + ".csv"},
                                  {"gt", std::string(name) + "_gt.f64"},
                                  {"truth", std::string(name) + "_truth.json"}});
  }
  io::write_file(dir / "dataset.json", manifest.dump(2) + "\n");
  spdlog::info("wrote {} images to {}", cfg.n_images, dir.string());
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Saliency maps as 2D Gaussian mixtures"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads for batch commands")->check(CLI::PositiveNumber);
  app.add_option("-o,--out", g.out, "Output path");
  app.fallthrough();

  // synth
  SynthConfig synth_cfg;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic fixation dataset");
  synth->add_option("--images", synth_cfg.n_images, "Number of images");
  synth->add_option("--width", synth_cfg.width, "Canvas width");
  synth->add_option("--height", synth_cfg.height, "Canvas height");
  synth->add_option("--modes-min", synth_cfg.modes_min, "Fewest clusters per image");
  synth->add_option("--modes-max", synth_cfg.modes_max, "Most clusters per image");
  synth->add_option("--points", synth_cfg.points_per_image, "Points per image");
  synth->add_option("--var-min", synth_cfg.var_min, "Smallest cluster variance, px^2");
  synth->add_option("--var-max", synth_cfg.var_max, "Largest cluster variance, px^2");
  synth->add_option("--sigma", synth_cfg.blur_sigma, "Ground-truth blur sigma");

  // fit
  std::string fit_points, fit_cov = "diag";
  int fit_components = 20;
  EmConfig em;
  auto* fit = app.add_subcommand("fit", "Fit a GMM to fixation points");
  fit->add_option("points", fit_points, "Fixation file (.csv or .json)")->required();
  fit->add_option("--components", fit_components, "Number of components");
  fit->add_option("--cov", fit_cov, "Covariance mode: spherical, diag, full");
  fit->add_option("--max-iter", em.max_iter, "EM iteration cap");
  fit->add_option("--tol", em.tol, "Relative log-likelihood tolerance");
  fit->add_option("--restarts", em.n_init, "Independent k-means++ restarts");
  fit->add_option("--min-var", em.min_var, "Variance floor, px^2");

  // render
  std::string render_gmm, render_norm = "sum";
  RenderConfig rc;
  auto* render = app.add_subcommand("render", "Render a GMM file to a dense map");
  render->add_option("gmm", render_gmm, "GMM file")->required();
  render->add_option("--width", rc.width, "Output width (default: GMM canvas)");
  render->add_option("--height", rc.height, "Output height (default: GMM canvas)");
  render->add_option("--gt-threshold", rc.threshold_gt, "Component threshold G_t");
  render->add_option("--normalize", render_norm, "none, sum or max");

  // blur
  std::string blur_points, blur_norm = "sum";
  double blur_sigma = 19.0;
  auto* blur = app.add_subcommand("blur", "Blur fixation points into a ground-truth map");
  blur->add_option("points", blur_points, "Fixation file")->required();
  blur->add_option("--sigma", blur_sigma, "Gaussian sigma in pixels")->capture_default_str();
  blur->add_option("--normalize", blur_norm, "none, sum or max");

  // direct-fit
  std::string df_gt;
  GridOptions df_grid;
  OptOptions df_opt;
  auto* dfit = app.add_subcommand("direct-fit", "Gradient-descent fit of grid parameters to one map");
  dfit->add_option("gt", df_gt, "Target map")->required();
  df_grid.add(dfit);
  df_opt.add(dfit, 1e-2, 500);

  // train-toy
  std::vector<std::string> tt_gt, tt_feature;
  GridOptions tt_grid;
  OptOptions tt_opt;
  auto* ttoy = app.add_subcommand("train-toy", "Train the tiny predictor; writes a checkpoint");
  ttoy->add_option("gt", tt_gt, "Ground-truth maps")->required();
  ttoy->add_option("--feature", tt_feature, "Feature maps, one per gt (default: the gt itself)");
  ttoy->add_option("--batch", tt_opt.opt.batch, "Images per step");
  tt_grid.add(ttoy);
  tt_opt.add(ttoy, 1e-3, 200);

  // predict
  std::string pr_ckpt, pr_feature;
  GridOptions pr_grid;
  auto* pred = app.add_subcommand("predict", "Run a checkpoint on a feature map; writes a GMM");
  pred->add_option("checkpoint", pr_ckpt, "Checkpoint file")->required();
  pred->add_option("feature", pr_feature, "Feature map")->required();
  pr_grid.add(pred);

  // evaluate
  EvalInputs ev;
  std::string ev_metrics = "cc,sim,kl", ev_manifest;
  MetricConfig mcfg;
  auto* eval = app.add_subcommand("evaluate", "Score predictions; writes JSON lines");
  eval->add_option("--pred", ev.pred, "Predicted map");
  eval->add_option("--gt", ev.gt, "Ground-truth map");
  eval->add_option("--points", ev.points, "Fixation points");
  eval->add_option("--negatives", ev.negatives, "Pooled fixations from other images (sauc)");
  eval->add_option("--baseline", ev.baseline, "Baseline map for ig (default: center prior)");
  eval->add_option("--name", ev.name, "Image name in the records");
  eval->add_option("--metrics", ev_metrics, "Comma-separated: cc,sim,kl,emd,nss,auc-judd,auc-borji,sauc,ig");
  eval->add_option("--manifest", ev_manifest, "Batch mode: JSON with an 'images' list");
  eval->add_option("--splits", mcfg.auc_splits, "Random splits for auc-borji and sauc");
  eval->add_option("--emd-max-side", mcfg.emd_max_side, "EMD downsampling target");

  // subsample
  std::string ss_points;
  double ss_ratio = 0.7;
  auto* subs = app.add_subcommand("subsample", "Keep a random fraction of the fixation points");
  subs->add_option("points", ss_points, "Fixation file")->required();
  subs->add_option("--ratio", ss_ratio, "Fraction in (0, 1]")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*synth) {
      run_synth(g, synth_cfg);
    } else if (*fit) {
      em.seed = g.seed;
      const FixationPoints points = io::load_fixation_points(fit_points);
      const FitResult r = fit_gmm_detailed(points, fit_components, parse_covariance_mode(fit_cov), em);
      spdlog::info("log-likelihood {} after {} iterations (restart {})", r.log_likelihood, r.iterations,
                   r.best_restart);
      emit_text(g, io::format_gmm(r.gmm));
    } else if (*render) {
      const GmmParams gmm = io::load_gmm(render_gmm);
      if (rc.width == 0) rc.width = gmm.canvas_width;
      if (rc.height == 0) rc.height = gmm.canvas_height;
      rc.normalize = parse_normalization(render_norm);
      const std::string out = require_out(g);
      io::save_map(out, render_map(gmm, rc), io::map_format_for(out));
    } else if (*blur) {
      const FixationPoints points = io::load_fixation_points(blur_points);
      RenderConfig cfg;
      cfg.normalize = parse_normalization(blur_norm);
      const std::string out = require_out(g);
      io::save_map(out, blur_fixations(points, blur_sigma, cfg), io::map_format_for(out));
    } else if (*dfit) {
      const SaliencyMap gt = io::load_map(df_gt);
      const AnchorGrid grid = df_grid.grid(gt.width(), gt.height());
      const TransformConfig tcfg = df_grid.transform();
      df_opt.opt.seed = g.seed;
      const DirectFitResult r = direct_fit(RawParamMap(grid.rows, grid.cols), grid, tcfg, gt, df_opt.opt);
      spdlog::info("loss {} -> {}", r.loss_trace.front(), r.loss_trace.back());
      write_trace(df_opt.trace, r.loss_trace);
      emit_text(g, io::format_gmm(transform_params(r.params, grid, tcfg)));
    } else if (*ttoy) {
      if (!tt_feature.empty() && tt_feature.size() != tt_gt.size()) {
        throw Error(ErrorKind::InvalidArgument, "--feature must be given once per gt map");
      }
      std::vector<ToyExample> data;
      for (std::size_t k = 0; k < tt_gt.size(); ++k) {
        SaliencyMap gt = io::load_map(tt_gt[k]);
        SaliencyMap feature = tt_feature.empty() ? identity_feature(gt) : io::load_map(tt_feature[k]);
        data.push_back({std::move(feature), std::move(gt)});
      }
      const AnchorGrid grid = tt_grid.grid(data.front().gt.width(), data.front().gt.height());
      const TransformConfig tcfg = tt_grid.transform();
      tt_opt.opt.seed = g.seed;
      const ToyTrainResult r = train_toy(data, TinyPredictor::random(g.seed), grid, tcfg, tt_opt.opt);
      spdlog::info("mean loss {} -> {}", r.epoch_loss.front(), r.epoch_loss.back());
      write_trace(tt_opt.trace, r.epoch_loss);
      io::save_checkpoint(require_out(g), r.predictor);
    } else if (*pred) {
      const TinyPredictor p = io::load_checkpoint(pr_ckpt);
      const SaliencyMap feature = io::load_map(pr_feature);
      const AnchorGrid grid = pr_grid.grid(feature.width(), feature.height());
      emit_text(g, io::format_gmm(predict(p, feature, grid, pr_grid.transform())));
    } else if (*eval) {
      mcfg.seed = g.seed;
      mcfg.validate();
      const auto metrics = split_metrics(ev_metrics);
      if (!ev_manifest.empty()) {
        emit_text(g, evaluate_batch(load_manifest(ev_manifest), metrics, mcfg, g.threads));
      } else {
        if (ev.pred.empty()) throw Error(ErrorKind::InvalidArgument, "--pred or --manifest is required");
        if (ev.name.empty()) ev.name = fs::path(ev.pred).stem().string();
        emit_text(g, eval_records(ev, metrics, mcfg));
      }
    } else if (*subs) {
      const FixationPoints points = io::load_fixation_points(ss_points);
      const std::string out = require_out(g);
      io::save_fixation_points(out, subsample_points(points, ss_ratio, g.seed));
    }
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    spdlog::error("{}", e.what());
    return 3;
  }
  return 0;
}
