// Command-line workbench: dataset generation, training, evaluation,
// parameter sweeps, curve rendering, and the toy geometry lab.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <string>

#include "CLI11.hpp"

#include "semicount/checkpoint.hpp"
#include "semicount/config.hpp"
#include "semicount/dataset.hpp"
#include "semicount/evalkit.hpp"
#include "semicount/network.hpp"
#include "semicount/trainer.hpp"

namespace fs = std::filesystem;
using namespace semicount;

namespace {

// Rebuild a network from a checkpoint alone (no trainer needed): the meta
// echo pins the architecture, the tensors pin the weights.
net::Network network_from_snapshot(const ckpt::Snapshot& snap) {
  net::NetworkConfig nc;
  nc.in_channels = std::stoul(snap.meta.at("model.in_channels"));
  nc.channels = std::stoul(snap.meta.at("model.channels"));
  nc.attn_layers = std::stoul(snap.meta.at("model.attn_layers"));
  net::Network network(nc);
  if (network.params().size() != snap.model.size())
    throw std::runtime_error("checkpoint/architecture parameter count mismatch");
  for (const auto& t : snap.model) {
    auto p = network.param(t.name);
    if (p->value.data.size() != t.data.size())
      throw std::runtime_error("checkpoint tensor size mismatch: " + t.name);
    p->value.data = t.data;
  }
  return network;
}

struct CommonCfg {
  train::TrainConfig train;
  DatasetConfig data;
  std::string config_path;

  void load_file() {
    if (!config_path.empty()) cfg::apply_config_file(config_path, train, data);
  }
};

// Attach a --config option; call cc.load_file() first in the callback so
// explicit flags override file values.
void add_config_opt(CLI::App* cmd, CommonCfg& cc) {
  cmd->add_option("--config", cc.config_path,
                  "flat dotted-key JSON config (see --help-keys)")
      ->check(CLI::ExistingFile);
}

}  // namespace

int main(int argc, char** argv) {
  // Handled before CLI11 so it works without a subcommand.
  for (int i = 1; i < argc; ++i) {
    if (std::string(argv[i]) == "--help-keys") {
      std::printf("%s", cfg::describe_keys().c_str());
      return 0;
    }
  }

  CLI::App app{"semicount: density-agency semi-supervised counting workbench"};
  app.require_subcommand(1);

  bool help_keys = false;
  app.add_flag("--help-keys", help_keys, "print the config-file key table and exit");

  CommonCfg cc;

  // --- generate --------------------------------------------------------------
  auto* gen = app.add_subcommand("generate", "synthesise a scene dataset");
  std::string gen_out = "data";
  std::string gen_layout;
  gen->add_option("--out", gen_out, "output directory (dataset.json + images/)");
  add_config_opt(gen, cc);
  auto* g_seed = gen->add_option("--seed", cc.data.seed, "dataset seed");
  auto* g_ntr = gen->add_option("--n-train", cc.data.n_train, "training scenes");
  auto* g_nte = gen->add_option("--n-test", cc.data.n_test, "test scenes");
  auto* g_lf = gen->add_option("--labeled-fraction", cc.data.labeled_fraction,
                               "fraction of training scenes with point labels");
  auto* g_clo = gen->add_option("--count-lo", cc.data.count_lo, "min points per scene");
  auto* g_chi = gen->add_option("--count-hi", cc.data.count_hi, "max points per scene");
  auto* g_lay = gen->add_option("--layout", gen_layout, "uniform|clustered|gradient");

  // --- train -----------------------------------------------------------------
  auto* tr = app.add_subcommand("train", "train on a generated dataset");
  std::string tr_data, tr_out = "run";
  tr->add_option("--data", tr_data, "dataset directory or dataset.json")->required();
  tr->add_option("--out", tr_out, "output directory (epochs.csv, checkpoints)");
  add_config_opt(tr, cc);
  auto* t_epochs = tr->add_option("--epochs", cc.train.epochs, "training epochs");
  auto* t_seed = tr->add_option("--seed", cc.train.seed, "training seed");
  auto* t_lonly = tr->add_flag("--labeled-only", cc.train.labeled_only,
                               "baseline: skip all unlabeled work");
  auto* t_beta = tr->add_option("--beta", cc.train.loss.beta, "noise-depression strength");
  auto* t_lu = tr->add_option("--lambda-u", cc.train.loss.lambda_u, "unlabeled weight");
  auto* t_lc = tr->add_option("--lambda-c", cc.train.loss.lambda_c, "contrastive weight");
  auto* t_lm = tr->add_option("--lambda-m", cc.train.loss.lambda_m, "mask-loss weight");
  auto* t_tau = tr->add_option("--tau", cc.train.contrastive.tau, "contrastive temperature");
  std::string tr_kernel;
  auto* t_ker = tr->add_option("--kernel", tr_kernel, "match kernel: laplace|normal");
  auto* t_na = tr->add_option("--n-agents", cc.train.n_agents, "density agents");
  auto* t_ch = tr->add_option("--channels", cc.train.network.channels, "token width");
  auto* t_al = tr->add_option("--attn-layers", cc.train.network.attn_layers,
                              "attention refinement depth");
  auto* t_mlr = tr->add_option("--model-lr", cc.train.model_lr, "model learning rate");
  auto* t_alr = tr->add_option("--agent-lr", cc.train.agent_lr, "agent learning rate");
  auto* t_bl = tr->add_option("--batch-labeled", cc.train.batch_labeled, "labeled batch");
  auto* t_bu = tr->add_option("--batch-unlabeled", cc.train.batch_unlabeled,
                              "unlabeled batch");
  auto* t_crop = tr->add_option("--crop", cc.train.crop, "square crop (stride multiple)");
  auto* t_ck = tr->add_option("--checkpoint-every", cc.train.checkpoint_every,
                              "checkpoint cadence in epochs (0: final only)");

  // --- eval ------------------------------------------------------------------
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a dataset split");
  std::string ev_data, ev_ckpt, ev_split = "test";
  bool ev_per_image = false;
  ev->add_option("--data", ev_data, "dataset directory or dataset.json")->required();
  ev->add_option("--checkpoint", ev_ckpt, "checkpoint file")->required()
      ->check(CLI::ExistingFile);
  ev->add_option("--split", ev_split, "labeled|unlabeled|test (default test)");
  ev->add_flag("--per-image", ev_per_image, "also print id,gt,pred per image");

  // --- sweep -----------------------------------------------------------------
  auto* sw = app.add_subcommand("sweep", "one-parameter ablation sweep");
  std::string sw_data, sw_out = "sweep", sw_param;
  sw->add_option("--data", sw_data, "dataset directory or dataset.json")->required();
  sw->add_option("--out", sw_out, "output directory (results.csv, table.md)");
  std::string sweep_help = "parameter: ";
  for (const auto& n : evalkit::sweep_names()) sweep_help += n + " ";
  sw->add_option("--param", sw_param, sweep_help)->required();
  add_config_opt(sw, cc);
  auto* s_epochs = sw->add_option("--epochs", cc.train.epochs, "epochs per cell");
  auto* s_seed = sw->add_option("--seed", cc.train.seed, "base seed (cells derive from it)");

  // --- curves ----------------------------------------------------------------
  auto* cu = app.add_subcommand("curves",
                                "overlay one or more runs' epochs.csv as curves");
  std::vector<std::string> cu_runs, cu_labels;
  std::string cu_out = ".";
  cu->add_option("--run", cu_runs, "epochs.csv written by train (repeatable)")
      ->required()
      ->check(CLI::ExistingFile);
  cu->add_option("--label", cu_labels, "run label, paired with --run by order");
  cu->add_option("--out", cu_out, "output directory");

  // --- toy -------------------------------------------------------------------
  auto* ty = app.add_subcommand("toy", "toy geometry lab (schemes a-d)");
  std::string ty_out = "toy", ty_scheme;
  evalkit::ToyConfig tycfg;
  std::string ty_kernel;
  ty->add_option("--out", ty_out, "output directory (toy_metrics.json, toy_frames/)");
  ty->add_option("--scheme", ty_scheme, "run one scheme only: a|b|c|d (default all)");
  ty->add_option("--steps,--iters", tycfg.iters, "optimisation steps");
  ty->add_option("--classes", tycfg.n_classes, "foreground classes");
  ty->add_option("--points-per-class", tycfg.pts_per_class, "points per class");
  ty->add_option("--background", tycfg.n_background, "background points");
  ty->add_option("--dim", tycfg.dim, "feature dimension (>= 2)");
  ty->add_option("--tau", tycfg.tau, "contrastive temperature");
  ty->add_option("--lambda-b", tycfg.lambda_b, "background-push weight on features");
  ty->add_option("--feature-lr", tycfg.feature_lr, "feature learning rate");
  ty->add_option("--agent-lr", tycfg.agent_lr, "agent learning rate");
  ty->add_option("--kernel", ty_kernel, "match kernel: laplace|normal");
  ty->add_option("--seed", tycfg.seed, "toy seed");
  ty->add_option("--frame-every", tycfg.frame_every, "frame cadence (0: no frames)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      // Flags were bound at parse time; the config file (applied now) would
      // clobber them, so explicit flags are re-applied afterwards.
      cc.load_file();
      if (g_seed->count()) cc.data.seed = std::stoull(g_seed->results()[0]);
      if (g_ntr->count()) cc.data.n_train = std::stoul(g_ntr->results()[0]);
      if (g_nte->count()) cc.data.n_test = std::stoul(g_nte->results()[0]);
      if (g_lf->count()) cc.data.labeled_fraction = std::stod(g_lf->results()[0]);
      if (g_clo->count()) cc.data.count_lo = std::stoul(g_clo->results()[0]);
      if (g_chi->count()) cc.data.count_hi = std::stoul(g_chi->results()[0]);
      if (g_lay->count()) cc.data.scene.layout = layout_from_string(gen_layout);
      Dataset ds = generate_dataset(cc.data);
      save_dataset(ds, gen_out);
      auto lab = ds.split(Split::labeled), unl = ds.split(Split::unlabeled),
           tst = ds.split(Split::test);
      std::printf("wrote %s: %zu labeled / %zu unlabeled / %zu test scenes\n",
                  gen_out.c_str(), lab.size(), unl.size(), tst.size());
    }

    if (*tr) {
      cc.load_file();
      if (t_epochs->count()) cc.train.epochs = std::stoul(t_epochs->results()[0]);
      if (t_seed->count()) cc.train.seed = std::stoull(t_seed->results()[0]);
      if (t_lonly->count()) cc.train.labeled_only = true;
      if (t_beta->count()) cc.train.loss.beta = std::stod(t_beta->results()[0]);
      if (t_lu->count()) cc.train.loss.lambda_u = std::stod(t_lu->results()[0]);
      if (t_lc->count()) cc.train.loss.lambda_c = std::stod(t_lc->results()[0]);
      if (t_lm->count()) cc.train.loss.lambda_m = std::stod(t_lm->results()[0]);
      if (t_tau->count()) cc.train.contrastive.tau = std::stod(t_tau->results()[0]);
      if (t_ker->count())
        cc.train.contrastive.match.kernel = agency::kernel_from_string(tr_kernel);
      if (t_na->count()) cc.train.n_agents = std::stoul(t_na->results()[0]);
      if (t_ch->count()) cc.train.network.channels = std::stoul(t_ch->results()[0]);
      if (t_al->count()) cc.train.network.attn_layers = std::stoul(t_al->results()[0]);
      if (t_mlr->count()) cc.train.model_lr = std::stod(t_mlr->results()[0]);
      if (t_alr->count()) cc.train.agent_lr = std::stod(t_alr->results()[0]);
      if (t_bl->count()) cc.train.batch_labeled = std::stoul(t_bl->results()[0]);
      if (t_bu->count()) cc.train.batch_unlabeled = std::stoul(t_bu->results()[0]);
      if (t_crop->count()) cc.train.crop = std::stoul(t_crop->results()[0]);
      if (t_ck->count()) cc.train.checkpoint_every = std::stoul(t_ck->results()[0]);

      Dataset ds = load_dataset(tr_data);
      fs::create_directories(tr_out);
      cc.train.checkpoint_dir = tr_out;
      train::Trainer trainer(ds, cc.train);
      std::printf("training: %zu epochs x %zu steps\n", cc.train.epochs,
                  trainer.steps_per_epoch());
      train::TrainResult result = trainer.run();
      evalkit::write_epochs_csv((fs::path(tr_out) / "epochs.csv").string(), result);
      std::printf("final test MAE %.4f MSE %.4f; wrote %s/epochs.csv\n",
                  result.final_test_mae, result.final_test_mse, tr_out.c_str());
    }

    if (*ev) {
      Dataset ds = load_dataset(ev_data);
      ckpt::Snapshot snap = ckpt::load(ev_ckpt);
      net::Network network = network_from_snapshot(snap);
      auto samples = ds.split(split_from_string(ev_split));
      if (samples.empty()) throw std::runtime_error("split '" + ev_split + "' is empty");
      train::Metrics m = train::evaluate(network, samples);
      std::printf("%s: n=%zu MAE %.4f MSE %.4f (epoch %zu)\n", ev_split.c_str(),
                  samples.size(), m.mae, m.mse, snap.epoch);
      if (ev_per_image)
        for (const auto& r : m.per_image)
          std::printf("%s,%g,%g\n", r.id.c_str(), r.gt, r.pred);
    }

    if (*sw) {
      cc.load_file();
      if (s_epochs->count()) cc.train.epochs = std::stoul(s_epochs->results()[0]);
      if (s_seed->count()) cc.train.seed = std::stoull(s_seed->results()[0]);
      Dataset ds = load_dataset(sw_data);
      evalkit::SweepSpec spec = evalkit::sweep_preset(sw_param);
      evalkit::SweepResult result = evalkit::run_sweep(ds, cc.train, spec);
      evalkit::write_sweep(sw_out, result);
      std::printf("wrote %s/results.csv and %s/table.md (%zu cells)\n", sw_out.c_str(),
                  sw_out.c_str(), result.cells.size());
    }

    if (*cu) {
      std::vector<evalkit::NamedRun> runs;
      for (std::size_t i = 0; i < cu_runs.size(); ++i) {
        std::string label = i < cu_labels.size()
                                ? cu_labels[i]
                                : "run" + std::to_string(i + 1);
        runs.emplace_back(label, evalkit::read_epochs_csv(cu_runs[i]));
      }
      evalkit::write_curves(cu_out, runs);
      std::printf("wrote %s/curves.csv and %s/curves.png (%zu runs)\n", cu_out.c_str(),
                  cu_out.c_str(), runs.size());
    }

    if (*ty) {
      if (!ty_kernel.empty()) tycfg.kernel = agency::kernel_from_string(ty_kernel);
      std::vector<evalkit::ToyScheme> schemes{
          evalkit::ToyScheme::init_only, evalkit::ToyScheme::align_align,
          evalkit::ToyScheme::contrast_contrast, evalkit::ToyScheme::contrast_align};
      if (!ty_scheme.empty()) {
        std::size_t k = std::string("abcd").find(ty_scheme);
        if (k == std::string::npos)
          throw std::runtime_error("unknown scheme '" + ty_scheme + "' (want a|b|c|d)");
        schemes = {schemes[k]};
      }
      evalkit::ToyResult result = evalkit::run_toy(tycfg, ty_out, schemes);
      for (const auto& s : result.schemes)
        std::printf("scheme %s: intra %.4f -> %.4f | inter %.4f -> %.4f | fg/bg %.4f -> %.4f\n",
                    s.scheme.c_str(), s.initial.intra_spread, s.final_state.intra_spread,
                    s.initial.inter_margin, s.final_state.inter_margin,
                    s.initial.fg_bg_margin, s.final_state.fg_bg_margin);
      std::printf("wrote %s/toy_metrics.json\n", ty_out.c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
