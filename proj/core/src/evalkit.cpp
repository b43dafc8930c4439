#include "semicount/evalkit.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "semicount/contrastive.hpp"
#include "semicount/optim.hpp"
#include "semicount/plot.hpp"
#include "semicount/random.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace semicount::evalkit {

namespace {

std::string num(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

}  // namespace

void write_epochs_csv(const std::string& path, const train::TrainResult& result) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "epoch,total,count,mask,contrast_labeled,contrast_unlabeled,"
         "agent_align,agent_push,train_mae,train_mse,test_mae,test_mse,seconds\n";
  for (const auto& r : result.epochs) {
    out << r.epoch << ',' << num(r.mean.total) << ',' << num(r.mean.count) << ','
        << num(r.mean.mask) << ',' << num(r.mean.contrast_labeled) << ','
        << num(r.mean.contrast_unlabeled) << ',' << num(r.mean.agent_align) << ','
        << num(r.mean.agent_push) << ',' << num(r.train_mae) << ',' << num(r.train_mse)
        << ',' << num(r.test_mae) << ',' << num(r.test_mse) << ',' << num(r.seconds)
        << '\n';
  }
}

train::TrainResult read_epochs_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string header;
  std::getline(in, header);
  const std::string expect =
      "epoch,total,count,mask,contrast_labeled,contrast_unlabeled,"
      "agent_align,agent_push,train_mae,train_mse,test_mae,test_mse,seconds";
  if (header != expect)
    throw std::runtime_error(path + ": unexpected header '" + header + "'");

  train::TrainResult result;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::vector<double> v;
    while (std::getline(ls, cell, ',')) v.push_back(std::stod(cell));
    if (v.size() != 13) throw std::runtime_error(path + ": malformed row '" + line + "'");
    train::EpochRow r;
    r.epoch = std::size_t(v[0]);
    r.mean.total = v[1];
    r.mean.count = v[2];
    r.mean.mask = v[3];
    r.mean.contrast_labeled = v[4];
    r.mean.contrast_unlabeled = v[5];
    r.mean.agent_align = v[6];
    r.mean.agent_push = v[7];
    r.train_mae = v[8];
    r.train_mse = v[9];
    r.test_mae = v[10];
    r.test_mse = v[11];
    r.seconds = v[12];
    result.epochs.push_back(r);
  }
  if (!result.epochs.empty()) {
    result.final_test_mae = result.epochs.back().test_mae;
    result.final_test_mse = result.epochs.back().test_mse;
  }
  return result;
}

void write_curves(const std::string& dir, const std::vector<NamedRun>& runs) {
  if (runs.empty()) throw std::invalid_argument("write_curves: no runs");
  fs::create_directories(dir);
  {
    std::ofstream out(fs::path(dir) / "curves.csv");
    if (!out) throw std::runtime_error("cannot write curves.csv in " + dir);
    out << "run,epoch,total,train_mae,train_mse,test_mae,test_mse\n";
    for (const auto& [name, result] : runs)
      for (const auto& r : result.epochs)
        out << name << ',' << r.epoch << ',' << num(r.mean.total) << ','
            << num(r.train_mae) << ',' << num(r.train_mse) << ',' << num(r.test_mae)
            << ',' << num(r.test_mse) << '\n';
  }
  static const std::array<plot::Color, 4> mae_colors = {
      plot::Color{200, 60, 40}, plot::Color{40, 90, 200}, plot::Color{58, 158, 88},
      plot::Color{142, 68, 173}};
  static const std::array<plot::Color, 4> mse_colors = {
      plot::Color{230, 140, 120}, plot::Color{130, 170, 235}, plot::Color{140, 205, 160},
      plot::Color{195, 155, 215}};
  std::vector<plot::Series> series;
  for (std::size_t k = 0; k < runs.size(); ++k) {
    plot::Series mae, mse;
    mae.name = runs[k].first + " MAE";
    mse.name = runs[k].first + " MSE";
    mae.color = mae_colors[k % mae_colors.size()];
    mse.color = mse_colors[k % mse_colors.size()];
    for (const auto& r : runs[k].second.epochs) {
      mae.y.push_back(r.train_mae);
      mse.y.push_back(r.train_mse);
    }
    series.push_back(std::move(mae));
    series.push_back(std::move(mse));
  }
  plot::line_chart((fs::path(dir) / "curves.png").string(), "TRAINING MAE/MSE",
                   series);
}

namespace {

SweepSpec numeric_spec(std::string param, std::vector<double> values,
                       std::function<void(train::TrainConfig&, double)> set) {
  SweepSpec spec;
  spec.param = std::move(param);
  for (double v : values) {
    std::ostringstream os;
    os << v;
    spec.labels.push_back(os.str());
  }
  spec.apply = [values = std::move(values), set = std::move(set)](train::TrainConfig& c,
                                                                  std::size_t i) {
    set(c, values.at(i));
  };
  return spec;
}

}  // namespace

SweepSpec sweep_preset(const std::string& param) {
  if (param == "beta")
    return numeric_spec("beta", {0, 0.1, 0.5, 1, 2, 5, 10},
                        [](train::TrainConfig& c, double v) { c.loss.beta = v; });
  if (param == "lambda_c")
    return numeric_spec("lambda_c", {0, 0.001, 0.01, 0.05, 0.1, 0.5, 1},
                        [](train::TrainConfig& c, double v) { c.loss.lambda_c = v; });
  if (param == "tau")
    return numeric_spec("tau", {0.01, 0.05, 0.07, 0.1, 0.2, 0.5, 1},
                        [](train::TrainConfig& c, double v) { c.contrastive.tau = v; });
  if (param == "lambda_m")
    return numeric_spec("lambda_m", {0.01, 0.05, 0.1, 0.5, 1},
                        [](train::TrainConfig& c, double v) { c.loss.lambda_m = v; });
  if (param == "lambda_u")
    return numeric_spec("lambda_u", {0, 0.001, 0.005, 0.01, 0.05, 0.1, 0.5, 1},
                        [](train::TrainConfig& c, double v) { c.loss.lambda_u = v; });
  if (param == "distribution") {
    SweepSpec spec;
    spec.param = "distribution";
    spec.labels = {"laplace", "normal"};
    spec.apply = [](train::TrainConfig& c, std::size_t i) {
      c.contrastive.match.kernel =
          i == 0 ? agency::MatchKernel::laplace : agency::MatchKernel::normal;
    };
    return spec;
  }
  throw std::invalid_argument("unknown sweep parameter: " + param);
}

std::vector<std::string> sweep_names() {
  return {"beta", "lambda_c", "tau", "lambda_m", "lambda_u", "distribution"};
}

SweepResult run_sweep(const Dataset& dataset, const train::TrainConfig& base,
                      const SweepSpec& spec) {
  SweepResult result;
  result.param = spec.param;
  result.epochs = base.epochs;
  for (std::size_t i = 0; i < spec.labels.size(); ++i) {
    train::TrainConfig cfg = base;
    spec.apply(cfg, i);
    cfg.seed = mix_seed(base.seed, hash_str(spec.param), i);
    cfg.checkpoint_dir.clear();

    SweepCell cell;
    cell.label = spec.labels[i];
    cell.seed = cfg.seed;
    auto t0 = std::chrono::steady_clock::now();
    try {
      train::Trainer trainer(dataset, cfg);
      result.steps_per_epoch = trainer.steps_per_epoch();
      train::TrainResult tr = trainer.run();
      cell.mae = tr.final_test_mae;
      cell.mse = tr.final_test_mse;
    } catch (const std::exception& e) {
      cell.error = e.what();  // record and move on; the sweep must finish
    }
    cell.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.cells.push_back(std::move(cell));
  }
  return result;
}

void write_sweep(const std::string& dir, const SweepResult& result) {
  fs::create_directories(dir);
  {
    std::ofstream out(fs::path(dir) / "results.csv");
    if (!out) throw std::runtime_error("cannot write results.csv in " + dir);
    out << "param,value,seed,test_mae,test_mse,epochs,steps_per_epoch,seconds,error\n";
    for (const auto& c : result.cells) {
      std::string err = c.error;
      std::replace(err.begin(), err.end(), ',', ';');
      out << result.param << ',' << c.label << ',' << c.seed << ',' << num(c.mae) << ','
          << num(c.mse) << ',' << result.epochs << ',' << result.steps_per_epoch << ','
          << num(c.seconds) << ',' << err << '\n';
    }
  }
  std::ofstream out(fs::path(dir) / "table.md");
  if (!out) throw std::runtime_error("cannot write table.md in " + dir);
  auto metric_cell = [&](const SweepCell& c, double v) {
    if (!c.error.empty()) {
      out << " fail |";
      return;
    }
    out << ' ';
    out.precision(3);
    out << std::fixed << v << " |";
    out.unsetf(std::ios::fixed);
  };
  out << "| " << result.param << " |";
  for (const auto& c : result.cells) out << ' ' << c.label << " |";
  out << "\n|";
  for (std::size_t i = 0; i <= result.cells.size(); ++i) out << " --- |";
  out << "\n| MAE |";
  for (const auto& c : result.cells) metric_cell(c, c.mae);
  out << "\n| MSE |";
  for (const auto& c : result.cells) metric_cell(c, c.mse);
  out << "\n\nEach cell: one training run of " << result.epochs << " epochs x "
      << result.steps_per_epoch
      << " steps; the exact per-cell seed is recorded in results.csv.\n";
}

// --- toy lab -----------------------------------------------------------------

const char* to_string(ToyScheme s) {
  switch (s) {
    case ToyScheme::init_only: return "a";
    case ToyScheme::align_align: return "b";
    case ToyScheme::contrast_contrast: return "c";
    case ToyScheme::contrast_align: return "d";
  }
  return "?";
}

namespace {

struct ToyState {
  std::size_t n_fg = 0, n_bg = 0, dim = 0;
  std::vector<double> features;  // fg block then bg block, [n][dim]
  std::vector<int> labels;       // class per fg point
  std::vector<double> densities; // per fg point
  agency::AgentBank bank;
  agency::Partition part;

  std::span<const double> fg() const { return {features.data(), n_fg * dim}; }
  std::span<const double> bg() const { return {features.data() + n_fg * dim, n_bg * dim}; }
};

ToyState toy_setup(const ToyConfig& cfg) {
  if (cfg.n_classes < 2) throw std::invalid_argument("toy: need at least two classes");
  if (cfg.dim < 2) throw std::invalid_argument("toy: dim must be at least 2");
  ToyState st;
  st.n_fg = cfg.n_classes * cfg.pts_per_class;
  st.n_bg = cfg.n_background;
  st.dim = cfg.dim;
  st.features.resize((st.n_fg + st.n_bg) * st.dim);
  st.labels.resize(st.n_fg);
  st.densities.resize(st.n_fg);

  std::vector<double> borders(cfg.n_classes - 1);
  for (std::size_t i = 0; i < borders.size(); ++i) borders[i] = double(i + 1);
  st.part = agency::partition_from_borders(borders);
  st.bank = agency::AgentBank::random_init(cfg.n_classes, cfg.dim,
                                           mix_seed(cfg.seed, hash_str("toy_agents")));

  Rng rng(mix_seed(cfg.seed, hash_str("toy_points")));
  const double two_pi = 6.283185307179586;
  auto place = [&](std::size_t row, double slot_angle) {
    double theta = slot_angle + normal(rng, 0.0, 0.12);
    double radius = uniform(rng, 0.8, 1.2);
    double* f = st.features.data() + row * st.dim;
    f[0] = radius * std::cos(theta);
    f[1] = radius * std::sin(theta);
    for (std::size_t k = 2; k < st.dim; ++k) f[k] = normal(rng, 0.0, 0.05);
  };

  std::size_t row = 0;
  for (std::size_t k = 0; k < cfg.n_classes; ++k) {
    double slot = two_pi * double(k) / double(cfg.n_classes + 1);
    double center = st.part.centers[k];
    bool last = (k + 1 == cfg.n_classes);
    for (std::size_t j = 0; j < cfg.pts_per_class; ++j, ++row) {
      place(row, slot);
      st.labels[row] = int(k);
      // Densities sit near the class centre but never exactly on it, so the
      // uncertainty weight of the matched agent stays nonzero.
      double off = uniform(rng, 0.05, 0.2);
      if (!last && uniform01(rng) < 0.5) off = -off;
      st.densities[row] = center + off;
    }
  }
  double bg_slot = two_pi * double(cfg.n_classes) / double(cfg.n_classes + 1);
  for (std::size_t j = 0; j < st.n_bg; ++j) place(st.n_fg + j, bg_slot);
  return st;
}

double cos_dist(std::span<const double> a, std::span<const double> b) {
  return 1.0 - agency::cosine(a, b);
}

ToyMetrics toy_metrics(const ToyState& st, const ToyConfig& cfg) {
  ToyMetrics m;
  // intra: mean pairwise within class, averaged over classes
  double intra = 0.0;
  for (std::size_t k = 0; k < cfg.n_classes; ++k) {
    double acc = 0.0;
    std::size_t cnt = 0;
    for (std::size_t i = 0; i < st.n_fg; ++i) {
      if (st.labels[i] != int(k)) continue;
      for (std::size_t j = i + 1; j < st.n_fg; ++j) {
        if (st.labels[j] != int(k)) continue;
        acc += cos_dist({st.features.data() + i * st.dim, st.dim},
                        {st.features.data() + j * st.dim, st.dim});
        ++cnt;
      }
    }
    intra += cnt ? acc / double(cnt) : 0.0;
  }
  m.intra_spread = intra / double(cfg.n_classes);

  // inter: min centroid pair distance
  std::vector<std::vector<double>> centroids(cfg.n_classes,
                                             std::vector<double>(st.dim, 0.0));
  std::vector<std::size_t> counts(cfg.n_classes, 0);
  for (std::size_t i = 0; i < st.n_fg; ++i) {
    auto k = std::size_t(st.labels[i]);
    for (std::size_t c = 0; c < st.dim; ++c)
      centroids[k][c] += st.features[i * st.dim + c];
    ++counts[k];
  }
  for (std::size_t k = 0; k < cfg.n_classes; ++k)
    for (double& v : centroids[k]) v /= double(std::max<std::size_t>(counts[k], 1));
  double inter = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < cfg.n_classes; ++a)
    for (std::size_t b = a + 1; b < cfg.n_classes; ++b)
      inter = std::min(inter, cos_dist(centroids[a], centroids[b]));
  m.inter_margin = inter;

  // fg/bg: min pair distance
  double margin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < st.n_fg; ++i)
    for (std::size_t j = 0; j < st.n_bg; ++j)
      margin = std::min(margin, cos_dist({st.features.data() + i * st.dim, st.dim},
                                         {st.features.data() + (st.n_fg + j) * st.dim,
                                          st.dim}));
  m.fg_bg_margin = margin;
  return m;
}

void toy_frame(const ToyState& st, const ToyConfig& cfg, const std::string& path,
               const std::string& title) {
  static const std::array<plot::Color, 6> palette = {
      plot::Color{214, 72, 56}, plot::Color{52, 101, 204}, plot::Color{58, 158, 88},
      plot::Color{222, 146, 36}, plot::Color{142, 68, 173}, plot::Color{23, 160, 166}};
  std::vector<plot::Dot> dots;
  auto dir2 = [&](const double* f) {
    double n = std::sqrt(f[0] * f[0] + f[1] * f[1]);
    n = std::max(n, 1e-9);
    return std::pair<double, double>{f[0] / n, f[1] / n};
  };
  for (std::size_t i = 0; i < st.n_fg; ++i) {
    auto [x, y] = dir2(st.features.data() + i * st.dim);
    dots.push_back({x, y, palette[std::size_t(st.labels[i]) % palette.size()], 2});
  }
  for (std::size_t j = 0; j < st.n_bg; ++j) {
    auto [x, y] = dir2(st.features.data() + (st.n_fg + j) * st.dim);
    dots.push_back({x, y, plot::Color{150, 150, 150}, 2});
  }
  for (std::size_t a = 0; a < st.bank.n; ++a) {
    auto [x, y] = dir2(st.bank.weights.data() + a * st.dim);
    dots.push_back({x, y, plot::Color{0, 0, 0}, 4});
  }
  (void)cfg;
  plot::scatter(path, title, dots, -1.25, 1.25, -1.25, 1.25);
}

}  // namespace

ToySchemeResult run_toy_scheme(const ToyConfig& cfg, ToyScheme scheme,
                               const std::string& frames_dir) {
  ToyState st = toy_setup(cfg);
  ToySchemeResult out;
  out.scheme = to_string(scheme);
  out.initial = toy_metrics(st, cfg);

  contrastive::ContrastiveConfig ccfg;
  ccfg.tau = cfg.tau;
  ccfg.lambda_b = cfg.lambda_b;
  ccfg.match.kernel = cfg.kernel;

  Adam feat_opt(AdamConfig{cfg.feature_lr, 0.9, 0.999, 1e-8});
  Adam agent_opt(AdamConfig{cfg.agent_lr, 0.9, 0.999, 1e-8});

  auto frame = [&](std::size_t iter) {
    if (frames_dir.empty() || cfg.frame_every == 0) return;
    if (iter % cfg.frame_every != 0 && iter != cfg.iters) return;
    std::ostringstream name;
    name << out.scheme << "_iter_";
    name.width(4);
    name.fill('0');
    name << iter << ".png";
    std::ostringstream title;
    title << "SCHEME " << out.scheme << " ITER " << iter;
    toy_frame(st, cfg, (fs::path(frames_dir) / name.str()).string(), title.str());
  };
  if (!frames_dir.empty()) fs::create_directories(frames_dir);
  frame(0);

  if (scheme != ToyScheme::init_only) {
    std::vector<double> gfeat(st.features.size());
    std::vector<double> gagent(st.bank.weights.size());
    for (std::size_t iter = 1; iter <= cfg.iters; ++iter) {
      std::fill(gfeat.begin(), gfeat.end(), 0.0);
      std::fill(gagent.begin(), gagent.end(), 0.0);
      std::vector<double> gfg(st.n_fg * st.dim, 0.0);
      std::vector<double> gbg(st.n_bg * st.dim, 0.0);

      bool feats_contrastive = scheme == ToyScheme::contrast_contrast ||
                               scheme == ToyScheme::contrast_align;
      bool agents_contrastive = scheme == ToyScheme::contrast_contrast;

      if (feats_contrastive || agents_contrastive)
        contrastive::matched_contrastive_loss(
            st.bank, st.part, st.fg(), st.densities, st.dim, ccfg, 1.0,
            agents_contrastive ? &gagent : nullptr, feats_contrastive ? &gfg : nullptr);
      if (!feats_contrastive || !agents_contrastive)
        agency::alignment_loss(st.bank, st.part, st.fg(), st.densities, st.dim, 1.0,
                               agents_contrastive ? nullptr : &gagent,
                               feats_contrastive ? nullptr : &gfg);
      // Background push: full weight on agents, lambda_b on features.
      agency::background_push_loss(st.bank, st.bg(), st.dim, 1.0, &gagent, nullptr);
      agency::background_push_loss(st.bank, st.bg(), st.dim, cfg.lambda_b, nullptr, &gbg);

      std::copy(gfg.begin(), gfg.end(), gfeat.begin());
      std::copy(gbg.begin(), gbg.end(), gfeat.begin() + std::ptrdiff_t(st.n_fg * st.dim));

      feat_opt.step(st.features, gfeat);
      std::vector<double> before = st.bank.weights;
      agent_opt.step(st.bank.weights, gagent);
      st.bank.apply_norm_floor(before);
      frame(iter);
    }
  }

  out.final_state = toy_metrics(st, cfg);
  return out;
}

ToyResult run_toy(const ToyConfig& cfg, const std::string& out_dir,
                  const std::vector<ToyScheme>& schemes) {
  fs::create_directories(out_dir);
  std::string frames = (fs::path(out_dir) / "toy_frames").string();
  ToyResult result;
  for (ToyScheme s : schemes) result.schemes.push_back(run_toy_scheme(cfg, s, frames));

  json doc;
  doc["config"] = {{"n_classes", cfg.n_classes},
                   {"pts_per_class", cfg.pts_per_class},
                   {"n_background", cfg.n_background},
                   {"dim", cfg.dim},
                   {"iters", cfg.iters},
                   {"feature_lr", cfg.feature_lr},
                   {"agent_lr", cfg.agent_lr},
                   {"tau", cfg.tau},
                   {"lambda_b", cfg.lambda_b},
                   {"kernel", agency::to_string(cfg.kernel)},
                   {"seed", cfg.seed}};
  for (const auto& s : result.schemes) {
    doc["schemes"][s.scheme] = {
        {"initial",
         {{"intra_spread", s.initial.intra_spread},
          {"inter_margin", s.initial.inter_margin},
          {"fg_bg_margin", s.initial.fg_bg_margin}}},
        {"final",
         {{"intra_spread", s.final_state.intra_spread},
          {"inter_margin", s.final_state.inter_margin},
          {"fg_bg_margin", s.final_state.fg_bg_margin}}}};
  }
  std::ofstream out(fs::path(out_dir) / "toy_metrics.json");
  if (!out) throw std::runtime_error("cannot write toy_metrics.json in " + out_dir);
  out << doc.dump(2) << "\n";
  return result;
}

}  // namespace semicount::evalkit
