#include <cstdio>
#include <fstream>
#include <string>

#include "doctest.h"
#include "semicount/agency.hpp"
#include "semicount/config.hpp"
#include "semicount/dataset.hpp"
#include "semicount/trainer.hpp"

using namespace semicount;

namespace {

// Fresh default configs per case so assertions see only the applied deltas.
struct Pair {
  train::TrainConfig t;
  DatasetConfig d;
};

}  // namespace

TEST_SUITE("config") {

TEST_CASE("keys land in the right fields across all groups") {
  Pair p;
  cfg::apply_config_json(R"({
    "train.epochs": 3,
    "train.batch_labeled": 2,
    "train.batch_unlabeled": 7,
    "train.model_lr": 0.5,
    "train.agent_lr": 0.25,
    "train.n_agents": 9,
    "train.labeled_only": true,
    "train.seed": 42,
    "train.crop": 48,
    "train.scale_lo": 0.9,
    "train.scale_hi": 1.1,
    "train.hflip": 0.0,
    "train.sigma_posterior": 4.0,
    "train.mask_dilation": 2,
    "train.checkpoint_every": 5,
    "model.channels": 32,
    "model.attn_layers": 4,
    "loss.beta": 2.5,
    "loss.lambda_m": 0.2,
    "loss.lambda_c": 0.02,
    "loss.lambda_u": 0.3,
    "contrastive.tau": 0.07,
    "contrastive.lambda_b": 0.6,
    "contrastive.kernel": "normal",
    "contrastive.clamp_weights": false,
    "data.n_train": 11,
    "data.n_test": 6,
    "data.labeled_fraction": 0.25,
    "data.count_lo": 5,
    "data.count_hi": 50,
    "data.height": 96,
    "data.width": 80,
    "data.noise_sigma": 0.1,
    "data.layout": "clustered",
    "data.seed": 99
  })",
                         p.t, p.d);

  CHECK(p.t.epochs == 3);
  CHECK(p.t.batch_labeled == 2);
  CHECK(p.t.batch_unlabeled == 7);
  CHECK(p.t.model_lr == doctest::Approx(0.5));
  CHECK(p.t.agent_lr == doctest::Approx(0.25));
  CHECK(p.t.n_agents == 9);
  CHECK(p.t.labeled_only);
  CHECK(p.t.seed == 42);
  CHECK(p.t.crop == 48);
  CHECK(p.t.aug_scale_lo == doctest::Approx(0.9));
  CHECK(p.t.aug_scale_hi == doctest::Approx(1.1));
  CHECK(p.t.aug_hflip == doctest::Approx(0.0));
  CHECK(p.t.sigma_posterior == doctest::Approx(4.0));
  CHECK(p.t.mask_dilation == 2);
  CHECK(p.t.checkpoint_every == 5);
  CHECK(p.t.network.channels == 32);
  CHECK(p.t.network.attn_layers == 4);
  CHECK(p.t.loss.beta == doctest::Approx(2.5));
  CHECK(p.t.loss.lambda_m == doctest::Approx(0.2));
  CHECK(p.t.loss.lambda_c == doctest::Approx(0.02));
  CHECK(p.t.loss.lambda_u == doctest::Approx(0.3));
  CHECK(p.t.contrastive.tau == doctest::Approx(0.07));
  CHECK(p.t.contrastive.lambda_b == doctest::Approx(0.6));
  CHECK(p.t.contrastive.match.kernel == agency::MatchKernel::normal);
  CHECK_FALSE(p.t.contrastive.match.clamp_weights);
  CHECK(p.d.n_train == 11);
  CHECK(p.d.n_test == 6);
  CHECK(p.d.labeled_fraction == doctest::Approx(0.25));
  CHECK(p.d.count_lo == 5);
  CHECK(p.d.count_hi == 50);
  CHECK(p.d.scene.height == 96);
  CHECK(p.d.scene.width == 80);
  CHECK(p.d.scene.noise_sigma == doctest::Approx(0.1));
  CHECK(p.d.scene.layout == Layout::clustered);
  CHECK(p.d.seed == 99);
}

TEST_CASE("empty object is a no-op") {
  Pair p;
  train::TrainConfig before_t = p.t;
  DatasetConfig before_d = p.d;
  cfg::apply_config_json("{}", p.t, p.d);
  CHECK(p.t.epochs == before_t.epochs);
  CHECK(p.t.loss.beta == before_t.loss.beta);
  CHECK(p.d.n_train == before_d.n_train);
}

TEST_CASE("unknown key names itself and lists the table") {
  Pair p;
  try {
    cfg::apply_config_json(R"({"train.epoch": 3})", p.t, p.d);
    FAIL("expected an error");
  } catch (const std::runtime_error& e) {
    std::string msg = e.what();
    CHECK(msg.find("unknown config key 'train.epoch'") != std::string::npos);
    // The message doubles as help: it includes the full key table.
    CHECK(msg.find("train.epochs") != std::string::npos);
    CHECK(msg.find("loss.beta") != std::string::npos);
    CHECK(msg.find("data.layout") != std::string::npos);
  }
}

TEST_CASE("wrong types name the offending key") {
  Pair p;
  CHECK_THROWS_WITH_AS(cfg::apply_config_json(R"({"loss.beta": "high"})", p.t, p.d),
                       doctest::Contains("config key 'loss.beta' has the wrong type"),
                       std::runtime_error);
  // Counts must be unsigned: a negative integer is a type error, not a wrap.
  CHECK_THROWS_WITH_AS(cfg::apply_config_json(R"({"train.epochs": -1})", p.t, p.d),
                       doctest::Contains("config key 'train.epochs' has the wrong type"),
                       std::runtime_error);
  CHECK_THROWS_WITH_AS(cfg::apply_config_json(R"({"train.labeled_only": 1})", p.t, p.d),
                       doctest::Contains("config key 'train.labeled_only' has the wrong type"),
                       std::runtime_error);
  CHECK_THROWS_WITH_AS(cfg::apply_config_json(R"({"contrastive.kernel": 3})", p.t, p.d),
                       doctest::Contains("config key 'contrastive.kernel' has the wrong type"),
                       std::runtime_error);
}

TEST_CASE("non-object and malformed documents are rejected") {
  Pair p;
  CHECK_THROWS_WITH_AS(cfg::apply_config_json("[1,2]", p.t, p.d),
                       doctest::Contains("config must be a JSON object"), std::runtime_error);
  CHECK_THROWS_WITH_AS(cfg::apply_config_json("{nope", p.t, p.d),
                       doctest::Contains("config parse error"), std::runtime_error);
}

TEST_CASE("bad enum strings propagate their own message") {
  Pair p;
  CHECK_THROWS_WITH_AS(cfg::apply_config_json(R"({"contrastive.kernel": "cauchy"})", p.t, p.d),
                       doctest::Contains("unknown match kernel: cauchy"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(cfg::apply_config_json(R"({"data.layout": "spiral"})", p.t, p.d),
                       doctest::Contains("unknown layout: spiral"), std::invalid_argument);
}

TEST_CASE("config files apply and errors carry the path") {
  Pair p;
  std::string path = "test_config_tmp.json";
  {
    std::ofstream out(path);
    out << R"({"train.epochs": 8, "loss.beta": 0.5})";
  }
  cfg::apply_config_file(path, p.t, p.d);
  CHECK(p.t.epochs == 8);
  CHECK(p.t.loss.beta == doctest::Approx(0.5));
  {
    std::ofstream out(path);
    out << R"({"bogus.key": 1})";
  }
  CHECK_THROWS_WITH_AS(cfg::apply_config_file(path, p.t, p.d),
                       doctest::Contains(path.c_str()), std::runtime_error);
  std::remove(path.c_str());
  CHECK_THROWS_WITH_AS(cfg::apply_config_file(path, p.t, p.d),
                       doctest::Contains("cannot open config file"), std::runtime_error);
}

TEST_CASE("describe_keys covers every documented group") {
  std::string keys = cfg::describe_keys();
  CHECK_FALSE(keys.empty());
  for (const char* k : {"train.epochs", "train.seed", "model.channels", "model.attn_layers",
                        "loss.beta", "loss.lambda_u", "contrastive.tau", "contrastive.kernel",
                        "data.n_train", "data.layout", "data.seed"})
    CHECK(keys.find(k) != std::string::npos);
  // One "key<TAB>description" line per key.
  CHECK(keys.find('\t') != std::string::npos);
}

}  // TEST_SUITE
