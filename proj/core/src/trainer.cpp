#include "semicount/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "semicount/random.hpp"

namespace semicount::train {

using agency::kDensityFloor;

Metrics metrics_from_counts(std::span<const double> gt, std::span<const double> pred) {
  if (gt.size() != pred.size())
    throw std::invalid_argument("metrics_from_counts: size mismatch");
  Metrics m;
  if (gt.empty()) return m;
  double abs_sum = 0.0, sq_sum = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    double err = pred[i] - gt[i];
    abs_sum += std::abs(err);
    sq_sum += err * err;
  }
  m.mae = abs_sum / double(gt.size());
  m.mse = std::sqrt(sq_sum / double(gt.size()));
  return m;
}

Metrics evaluate(const net::Network& network, const std::vector<const SceneSample*>& samples) {
  std::vector<double> gt, pred;
  std::vector<Metrics::PerImage> rows;
  gt.reserve(samples.size());
  pred.reserve(samples.size());
  for (const SceneSample* s : samples) {
    net::Forward fwd = network.forward(s->image);
    gt.push_back(double(s->points.size()));
    pred.push_back(fwd.predicted_count());
    rows.push_back({s->id, gt.back(), pred.back()});
  }
  Metrics m = metrics_from_counts(gt, pred);
  m.per_image = std::move(rows);
  return m;
}

IndexStream::IndexStream(std::size_t n, std::uint64_t seed) : pos_(n), rng_(seed) {
  idx_.resize(n);
  std::iota(idx_.begin(), idx_.end(), std::size_t{0});
}

std::size_t IndexStream::next() {
  if (idx_.empty()) throw std::logic_error("IndexStream: empty stream");
  if (pos_ >= idx_.size()) {
    shuffle(idx_, rng_);
    pos_ = 0;
  }
  return idx_[pos_++];
}

namespace {

std::size_t ceil_div(std::size_t a, std::size_t b) { return b == 0 ? 0 : (a + b - 1) / b; }

std::vector<losses::PointXY> to_xy(const std::vector<Point>& pts) {
  std::vector<losses::PointXY> out;
  out.reserve(pts.size());
  for (const Point& p : pts) out.push_back({p.x, p.y});
  return out;
}

// Posterior rows restricted to an index subset: densities outside the subset
// are structurally zero, so they drop out of the expected count.
losses::Posterior restrict_rows(const losses::Posterior& post,
                                const std::vector<std::size_t>& rows) {
  losses::Posterior out;
  out.n_cells = rows.size();
  out.n_points = post.n_points;
  if (post.empty()) return out;
  out.p.resize(rows.size() * post.n_points);
  for (std::size_t k = 0; k < rows.size(); ++k)
    std::copy_n(post.p.data() + rows[k] * post.n_points, post.n_points,
                out.p.data() + k * post.n_points);
  return out;
}

}  // namespace

Trainer::Trainer(const Dataset& dataset, TrainConfig cfg)
    : dataset_(dataset),
      cfg_(cfg),
      labeled_(dataset.split(Split::labeled)),
      unlabeled_(dataset.split(Split::unlabeled)),
      test_(dataset.split(Split::test)),
      network_([&] {
        net::NetworkConfig nc = cfg.network;
        nc.seed = mix_seed(cfg.seed, hash_str("model_init"));
        return net::Network(nc);
      }()),
      agents_(agency::AgentBank::random_init(
          cfg.n_agents, cfg.network.channels, mix_seed(cfg.seed, hash_str("agents")))),
      agent_opt_(AdamConfig{cfg.agent_lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps}),
      labeled_stream_(labeled_.size(), mix_seed(cfg.seed, hash_str("labeled_order"))),
      unlabeled_stream_(unlabeled_.size(), mix_seed(cfg.seed, hash_str("unlabeled_order"))) {
  if (labeled_.empty()) throw std::invalid_argument("training requires labeled samples");
  if (cfg_.batch_labeled == 0) throw std::invalid_argument("batch_labeled must be positive");
  if (cfg_.crop % 8 != 0) throw std::invalid_argument("crop must be a multiple of the stride");

  // Density partition: frozen now, from full labeled ground-truth grids.
  std::vector<double> positives;
  for (const SceneSample* s : labeled_) {
    CellGrid g = rasterize_density(s->points, network_.stride(), s->image.height,
                                   s->image.width);
    for (double v : g.values)
      if (v > 0.0) positives.push_back(v);
  }
  partition_ = agency::build_partition(std::move(positives), cfg_.n_agents);

  AdamConfig mc{cfg_.model_lr, cfg_.adam_beta1, cfg_.adam_beta2, cfg_.adam_eps};
  model_opt_.assign(network_.params().size(), Adam(mc));
  agent_grad_.assign(agents_.weights.size(), 0.0);

  std::size_t s_l = ceil_div(labeled_.size(), cfg_.batch_labeled);
  std::size_t s_u = cfg_.batch_unlabeled == 0
                        ? 0
                        : ceil_div(unlabeled_.size(), cfg_.batch_unlabeled);
  // The baseline keeps the full schedule so run lengths are comparable.
  steps_per_epoch_ = std::max<std::size_t>(1, std::max(s_l, s_u));
}

losses::LossReport Trainer::train_step(std::size_t epoch, std::size_t step) {
  losses::LossReport rep;
  std::vector<nn::NodePtr> terms;
  std::vector<double> coeffs;
  std::fill(agent_grad_.begin(), agent_grad_.end(), 0.0);
  const std::size_t dim = agents_.dim;

  auto augmented = [&](const SceneSample& raw, std::size_t slot) {
    AugmentConfig ac;
    ac.scale_lo = cfg_.aug_scale_lo;
    ac.scale_hi = cfg_.aug_scale_hi;
    ac.hflip_prob = cfg_.aug_hflip;
    ac.crop = cfg_.crop;
    ac.seed = mix_seed(cfg_.seed, 0xA5ULL, epoch, step, slot);
    return augment(raw, ac);
  };

  for (std::size_t slot = 0; slot < cfg_.batch_labeled; ++slot) {
    SceneSample s = augmented(*labeled_[labeled_stream_.next()], slot);
    net::Forward fwd = network_.forward(s.image);

    CellGrid gt_density = rasterize_density(s.points, network_.stride(), s.image.height,
                                            s.image.width);
    CellGrid gt_mask = rasterize_mask(s.points, network_.stride(), s.image.height,
                                      s.image.width, cfg_.mask_dilation);
    losses::Posterior post = losses::posterior_matrix(
        to_xy(s.points), network_.stride(), fwd.grid_h, fwd.grid_w, cfg_.sigma_posterior);

    // Expected-count loss over the predicted-foreground cells (all other
    // cells carry structurally zero density).
    if (fwd.fg_density) {
      nn::NodePtr nd = nn::nd_bayes_node(fwd.fg_density, restrict_rows(post, fwd.fg_idx),
                                         cfg_.loss.beta);
      rep.count += nd->value.data[0];
      terms.push_back(std::move(nd));
      coeffs.push_back(1.0);
    } else if (!s.points.empty()) {
      // No foreground was predicted: every point keeps its full residual.
      rep.count += std::exp(-cfg_.loss.beta) * double(s.points.size());
    }

    nn::NodePtr lm = nn::mask_loss_node(fwd.mask_prob, gt_mask.values);
    rep.mask += lm->value.data[0];
    terms.push_back(std::move(lm));
    coeffs.push_back(cfg_.loss.lambda_m);

    // Supervised agency split: ground-truth mask selects E/B, ground-truth
    // counts (floored on the dilation ring) are the densities.
    std::vector<std::size_t> e_idx, b_idx;
    std::vector<double> e_dens;
    for (std::size_t i = 0; i < gt_mask.values.size(); ++i) {
      if (gt_mask.values[i] > 0.0) {
        e_idx.push_back(i);
        double d = gt_density.values[i];
        e_dens.push_back(d > 0.0 ? d : kDensityFloor);
      } else {
        b_idx.push_back(i);
      }
    }

    double sample_contrast = 0.0;
    nn::NodePtr e_tokens, b_tokens;
    if (!e_idx.empty()) {
      e_tokens = nn::gather_rows(fwd.tokens, e_idx);
      nn::NodePtr lc = nn::contrastive_node(e_tokens, e_dens, agents_, partition_,
                                            cfg_.contrastive);
      sample_contrast += lc->value.data[0];
      terms.push_back(std::move(lc));
      coeffs.push_back(cfg_.loss.lambda_c);
    }
    if (!b_idx.empty()) {
      b_tokens = nn::gather_rows(fwd.tokens, b_idx);
      nn::NodePtr lb = nn::push_node(b_tokens, agents_);
      sample_contrast += cfg_.contrastive.lambda_b * lb->value.data[0];
      terms.push_back(std::move(lb));
      coeffs.push_back(cfg_.loss.lambda_c * cfg_.contrastive.lambda_b);
    }
    rep.contrast_labeled += sample_contrast;

    // Agent objective on detached features, full weight for labeled data.
    if (e_tokens)
      rep.agent_align += agency::alignment_loss(agents_, partition_,
                                                e_tokens->value.data, e_dens, dim, 1.0,
                                                &agent_grad_, nullptr);
    if (b_tokens)
      rep.agent_push += agency::background_push_loss(agents_, b_tokens->value.data, dim,
                                                     1.0, &agent_grad_, nullptr);
  }

  if (!cfg_.labeled_only && !unlabeled_.empty()) {
    const double lu = cfg_.loss.lambda_u;
    for (std::size_t slot = 0; slot < cfg_.batch_unlabeled; ++slot) {
      SceneSample s = augmented(*unlabeled_[unlabeled_stream_.next()],
                                cfg_.batch_labeled + slot);
      net::Forward fwd = network_.forward(s.image);
      if (fwd.fg_idx.empty()) continue;  // nothing matched; no unlabeled signal

      // Predicted split: detached predicted densities (floored) drive the
      // matching; gradients reach the backbone tokens only.
      std::vector<double> e_dens(fwd.fg_idx.size());
      for (std::size_t k = 0; k < fwd.fg_idx.size(); ++k) {
        double d = fwd.fg_density->value.data[k];
        e_dens[k] = d > 0.0 ? d : kDensityFloor;
      }

      nn::NodePtr e_tokens = nn::gather_rows(fwd.tokens, fwd.fg_idx);
      nn::NodePtr lc = nn::contrastive_node(e_tokens, e_dens, agents_, partition_,
                                            cfg_.contrastive);
      double sample_contrast = lc->value.data[0];
      terms.push_back(std::move(lc));
      coeffs.push_back(lu * cfg_.loss.lambda_c);

      nn::NodePtr b_tokens;
      if (!fwd.bg_idx.empty()) {
        b_tokens = nn::gather_rows(fwd.tokens, fwd.bg_idx);
        nn::NodePtr lb = nn::push_node(b_tokens, agents_);
        sample_contrast += cfg_.contrastive.lambda_b * lb->value.data[0];
        terms.push_back(std::move(lb));
        coeffs.push_back(lu * cfg_.loss.lambda_c * cfg_.contrastive.lambda_b);
      }
      rep.contrast_unlabeled += sample_contrast;

      rep.agent_align += agency::alignment_loss(agents_, partition_,
                                                e_tokens->value.data, e_dens, dim, lu,
                                                &agent_grad_, nullptr);
      if (b_tokens)
        rep.agent_push += agency::background_push_loss(agents_, b_tokens->value.data,
                                                       dim, lu, &agent_grad_, nullptr);
    }
  }

  losses::ComposedLoss composed =
      losses::compose(rep.count, rep.mask, rep.contrast_labeled, rep.contrast_unlabeled,
                      cfg_.loss);
  rep.labeled = composed.labeled;
  rep.unlabeled = composed.unlabeled;
  rep.total = composed.total;

  if (!terms.empty()) {
    // Parameters can drop out of a step's graph (the cross block when no cell
    // is background, the whole head when none is foreground); they must see a
    // zero gradient this step, not last step's.
    auto& params = network_.params();
    for (auto& [name, p] : params) p->grad.data.assign(p->value.data.size(), 0.0);
    nn::NodePtr total = nn::add_scalars(std::move(terms), std::move(coeffs));
    nn::backward(total);
    for (std::size_t i = 0; i < params.size(); ++i)
      model_opt_[i].step(params[i].second->value.data, params[i].second->grad.data);
  }

  std::vector<double> before = agents_.weights;
  agent_opt_.step(agents_.weights, agent_grad_);
  agents_.apply_norm_floor(before);
  return rep;
}

Metrics Trainer::evaluate_split(Split split) const {
  return evaluate(network_, dataset_.split(split));
}

TrainResult Trainer::run() {
  namespace fs = std::filesystem;
  TrainResult result;
  if (!cfg_.checkpoint_dir.empty()) fs::create_directories(cfg_.checkpoint_dir);

  for (std::size_t epoch = 0; epoch < cfg_.epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();
    losses::LossReport sum;
    for (std::size_t step = 0; step < steps_per_epoch_; ++step) {
      losses::LossReport r = train_step(epoch, step);
      sum.count += r.count;
      sum.mask += r.mask;
      sum.contrast_labeled += r.contrast_labeled;
      sum.contrast_unlabeled += r.contrast_unlabeled;
      sum.labeled += r.labeled;
      sum.unlabeled += r.unlabeled;
      sum.total += r.total;
      sum.agent_align += r.agent_align;
      sum.agent_push += r.agent_push;
    }
    double inv = 1.0 / double(steps_per_epoch_);
    EpochRow row;
    row.epoch = epoch + 1;
    row.mean.count = sum.count * inv;
    row.mean.mask = sum.mask * inv;
    row.mean.contrast_labeled = sum.contrast_labeled * inv;
    row.mean.contrast_unlabeled = sum.contrast_unlabeled * inv;
    row.mean.labeled = sum.labeled * inv;
    row.mean.unlabeled = sum.unlabeled * inv;
    row.mean.total = sum.total * inv;
    row.mean.agent_align = sum.agent_align * inv;
    row.mean.agent_push = sum.agent_push * inv;

    {
      // Training-split metrics cover every training scene; unlabeled ground
      // truth is used for reporting only, never for supervision.
      std::vector<const SceneSample*> train_all = labeled_;
      train_all.insert(train_all.end(), unlabeled_.begin(), unlabeled_.end());
      Metrics tm = evaluate(network_, train_all);
      row.train_mae = tm.mae;
      row.train_mse = tm.mse;
    }
    Metrics m = evaluate_split(Split::test);
    row.test_mae = m.mae;
    row.test_mse = m.mse;
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.epochs.push_back(row);
    epochs_done_ = epoch + 1;

    if (!cfg_.checkpoint_dir.empty() && cfg_.checkpoint_every > 0 &&
        (epoch + 1) % cfg_.checkpoint_every == 0) {
      std::ostringstream name;
      name << "checkpoint_epoch_";
      name.width(4);
      name.fill('0');
      name << (epoch + 1);
      name << ".sckp";
      save_checkpoint((fs::path(cfg_.checkpoint_dir) / name.str()).string());
    }
  }

  if (!cfg_.checkpoint_dir.empty())
    save_checkpoint((fs::path(cfg_.checkpoint_dir) / "checkpoint_final.sckp").string());

  if (!result.epochs.empty()) {
    result.final_test_mae = result.epochs.back().test_mae;
    result.final_test_mse = result.epochs.back().test_mse;
  } else if (!dataset_.split(Split::test).empty()) {
    Metrics m = evaluate_split(Split::test);
    result.final_test_mae = m.mae;
    result.final_test_mse = m.mse;
  }
  return result;
}

}  // namespace semicount::train
