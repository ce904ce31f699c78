#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "csrl/checkpoint.hpp"
#include "csrl/inference.hpp"
#include "csrl/trainer.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace csrl;
using train::AdamW;
using train::lr_at;
using train::PretrainData;
using train::Stage;
using train::TrainConfig;

namespace {

// Aligned pairs over a small vocabulary; the target echoes the source with a
// marker prefix so masked-token and pair-identification losses have learnable
// structure.
corpus::ParallelCorpus toy_parallel(int n) {
  const std::vector<std::string> vocab = {"sun",  "moon", "star", "wind",
                                          "rain", "snow", "tree", "leaf",
                                          "rock", "fish"};
  corpus::ParallelCorpus out;
  for (int i = 0; i < n; ++i) {
    corpus::SentencePair p;
    const int len = 4 + i % 3;
    for (int k = 0; k < len; ++k)
      p.source.push_back(vocab[(i + 2 * k) % vocab.size()]);
    for (const auto& w : p.source) p.target.push_back("t_" + w);
    out.push_back(std::move(p));
  }
  return out;
}

corpus::Dataset toy_dialogue_pool(int n) {
  corpus::Dataset out;
  for (int i = 0; i < n; ++i) {
    corpus::DialogueSample s;
    s.dialogue = testutil::make_dialogue(3 + i % 2, 3, "dlg" + std::to_string(i));
    out.push_back(std::move(s));
  }
  return out;
}

// Single-utterance samples with one frame each.
corpus::Dataset toy_srl_pool(int n) {
  const std::vector<std::string> vocab = {"he",  "opened",  "door", "window",
                                          "she", "quickly", "closed"};
  corpus::Dataset out;
  for (int i = 0; i < n; ++i) {
    corpus::DialogueSample s;
    s.dialogue.id = "srl" + std::to_string(i);
    s.dialogue.language = "xx";
    corpus::Utterance u;
    u.speaker = "S1";
    u.turn = 1;
    for (int k = 0; k < 5; ++k)
      u.tokens.push_back(vocab[(i + k) % vocab.size()]);
    s.dialogue.utterances.push_back(std::move(u));
    corpus::Frame f;
    f.predicate = {0, 1, 1};
    f.arguments.push_back({{0, 0, 0}, "ARG0"});
    f.arguments.push_back({{0, 2, 3}, "ARG1"});
    s.frames.push_back(std::move(f));
    out.push_back(std::move(s));
  }
  return out;
}

// Two-utterance dialogues whose frame has one in-turn argument and one
// argument in the earlier turn.
corpus::Dataset toy_csrl_data(int n, const std::string& cross_role = "ARG0") {
  const std::vector<std::string> vocab = {"alpha", "bravo",   "charlie",
                                          "delta", "echo",    "foxtrot",
                                          "golf",  "hotel"};
  corpus::Dataset out;
  for (int i = 0; i < n; ++i) {
    corpus::DialogueSample s;
    s.dialogue.id = "c" + std::to_string(i);
    s.dialogue.language = "xx";
    for (int u = 0; u < 2; ++u) {
      corpus::Utterance ut;
      ut.speaker = u % 2 ? "B" : "A";
      ut.turn = u + 1;
      for (int k = 0; k < 4; ++k)
        ut.tokens.push_back(vocab[(i + 3 * u + k) % vocab.size()]);
      s.dialogue.utterances.push_back(std::move(ut));
    }
    corpus::Frame f;
    f.predicate = {1, 1, 1};
    f.arguments.push_back({{1, 2, 3}, "ARG1"});
    f.arguments.push_back({{0, 0, 1}, cross_role});
    s.frames.push_back(std::move(f));
    out.push_back(std::move(s));
  }
  return out;
}

TrainConfig fast_tcfg(int steps) {
  TrainConfig t;
  t.batch_size = 2;
  t.max_lr = 1e-3;
  t.min_lr = 1e-4;
  t.lm_max_lr = 1e-3;
  t.lm_min_lr = 1e-4;
  t.max_epochs = 100;
  t.max_steps = steps;
  t.patience = 10;
  t.seed = 7;
  return t;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(line);
  return out;
}

double metric_value(const std::string& line, const std::string& key) {
  const std::string needle = " " + key + "=";
  auto pos = line.find(needle);
  REQUIRE_MESSAGE(pos != std::string::npos,
                  "key " << key << " missing from: " << line);
  return std::stod(line.substr(pos + needle.size()));
}

bool has_key(const std::string& line, const std::string& key) {
  return line.find(" " + key + "=") != std::string::npos;
}

}  // namespace

TEST_CASE("stage names round-trip") {
  for (Stage s : {Stage::kClm, Stage::kSc, Stage::kPa, Stage::kEnd2End,
                  Stage::kCsrl})
    CHECK(train::stage_from_string(train::to_string(s)) == s);
  CHECK(train::to_string(Stage::kClm) == "clm");
  CHECK(train::to_string(Stage::kEnd2End) == "end2end");
  CHECK_THROWS_AS(train::stage_from_string("warmup"), ConfigError);
}

TEST_CASE("learning rate schedule") {
  const double max_lr = 5e-5, min_lr = 1e-5;

  SUBCASE("anchors: start, warmup peak, end") {
    CHECK(lr_at(0, 100, max_lr, min_lr, 0.1) == doctest::Approx(0.0));
    CHECK(lr_at(10, 100, max_lr, min_lr, 0.1) == doctest::Approx(max_lr));
    CHECK(lr_at(100, 100, max_lr, min_lr, 0.1) == doctest::Approx(min_lr));
  }
  SUBCASE("midpoint of the decay is the mean of max and min") {
    // Warmup ends at step 10; midpoint of [10, 100] is 55.
    CHECK(lr_at(55, 100, max_lr, min_lr, 0.1) ==
          doctest::Approx((max_lr + min_lr) / 2.0));
  }
  SUBCASE("both segments are linear") {
    CHECK(lr_at(5, 100, max_lr, min_lr, 0.1) == doctest::Approx(max_lr / 2.0));
    const double q = lr_at(32, 100, max_lr, min_lr, 0.1);
    CHECK(q == doctest::Approx(max_lr + (min_lr - max_lr) * 22.0 / 90.0));
  }
  SUBCASE("monotone up through warmup, down after") {
    for (int s = 1; s <= 10; ++s)
      CHECK(lr_at(s, 100, max_lr, min_lr, 0.1) >
            lr_at(s - 1, 100, max_lr, min_lr, 0.1));
    for (int s = 11; s <= 100; ++s)
      CHECK(lr_at(s, 100, max_lr, min_lr, 0.1) <
            lr_at(s - 1, 100, max_lr, min_lr, 0.1));
  }
  SUBCASE("warmup always spans at least one step") {
    // floor(0.1 * 5) = 0 is clamped to 1, so step 1 already sits at max lr.
    CHECK(lr_at(1, 5, max_lr, min_lr, 0.1) == doctest::Approx(max_lr));
    CHECK(lr_at(0, 5, max_lr, min_lr, 0.0) == doctest::Approx(0.0));
    CHECK(lr_at(1, 5, max_lr, min_lr, 0.0) == doctest::Approx(max_lr));
  }
  SUBCASE("range errors") {
    CHECK_THROWS_AS(lr_at(0, 0, max_lr, min_lr, 0.1), ConfigError);
    CHECK_THROWS_AS(lr_at(0, -3, max_lr, min_lr, 0.1), ConfigError);
    CHECK_THROWS_AS(lr_at(-1, 100, max_lr, min_lr, 0.1), ConfigError);
    CHECK_THROWS_AS(lr_at(101, 100, max_lr, min_lr, 0.1), ConfigError);
  }
}

TEST_CASE("optimizer steps") {
  std::mt19937_64 rng(11);
  nn::ParamStore store;
  nn::Parameter& p = store.create("p", 1, 1, nn::Init::kOne, rng);

  SUBCASE("first step normalizes to roughly lr times the gradient sign") {
    // With fresh moments the bias-corrected ratio is g / |g|.
    p.grad.setConstant(2.0);
    AdamW opt({&p}, /*weight_decay=*/0.0);
    opt.step(0.1);
    CHECK(p.value(0, 0) == doctest::Approx(0.9).epsilon(1e-6));

    p.value.setConstant(1.0);
    p.grad.setConstant(-0.5);
    AdamW opt2({&p}, 0.0);
    opt2.step(0.1);
    CHECK(p.value(0, 0) == doctest::Approx(1.1).epsilon(1e-6));
  }
  SUBCASE("weight decay applies after the gradient step") {
    p.value.setConstant(1.0);
    p.grad.setConstant(2.0);
    AdamW opt({&p}, /*weight_decay=*/0.5);
    opt.step(0.1);
    // Gradient step to 0.9, then shrink by lr * wd = 5%.
    CHECK(p.value(0, 0) == doctest::Approx(0.9 * 0.95).epsilon(1e-6));
  }
  SUBCASE("decay is decoupled: it acts even with a zero gradient") {
    p.value.setConstant(2.0);
    p.grad.setZero();
    AdamW opt({&p}, 0.01);
    opt.step(0.1);
    CHECK(p.value(0, 0) == doctest::Approx(2.0 * (1.0 - 0.1 * 0.01)));
  }
  SUBCASE("parameters outside the group are never touched") {
    nn::Parameter& q = store.create("q", 1, 1, nn::Init::kOne, rng);
    p.grad.setConstant(1.0);
    q.grad.setConstant(1.0);
    AdamW opt({&p}, 0.1);
    opt.step(0.1);
    CHECK(q.value(0, 0) == 1.0);
    opt.zero_grad();
    CHECK(p.grad(0, 0) == 0.0);
    CHECK(q.grad(0, 0) == 1.0);  // not in the group
  }
  SUBCASE("adaptive steps settle a quadratic") {
    // Minimize x^2 from x = 1: the gradient is 2x.
    p.value.setConstant(1.0);
    AdamW opt({&p}, 0.0);
    for (int i = 0; i < 200; ++i) {
      p.grad.setConstant(2.0 * p.value(0, 0));
      opt.step(0.05);
    }
    CHECK(std::abs(p.value(0, 0)) < 0.1);
  }
}

TEST_CASE("training configuration validation") {
  TrainConfig t;
  CHECK_NOTHROW(t.validate());

  auto rejects = [](auto mutate) {
    TrainConfig bad;
    mutate(bad);
    CHECK_THROWS_AS(bad.validate(), ConfigError);
  };
  rejects([](TrainConfig& c) { c.batch_size = 0; });
  rejects([](TrainConfig& c) { c.min_lr = c.max_lr * 2; });
  rejects([](TrainConfig& c) { c.max_lr = 0.0; });
  rejects([](TrainConfig& c) { c.min_lr = -1e-5; });
  rejects([](TrainConfig& c) { c.lm_min_lr = c.lm_max_lr * 2; });
  rejects([](TrainConfig& c) { c.lm_max_lr = 0.0; });
  rejects([](TrainConfig& c) { c.max_epochs = 0; });
  rejects([](TrainConfig& c) { c.max_steps = -1; });
  rejects([](TrainConfig& c) { c.patience = 0; });
  rejects([](TrainConfig& c) { c.weight_decay = -0.01; });
  rejects([](TrainConfig& c) { c.warmup_fraction = 1.0; });
  rejects([](TrainConfig& c) { c.warmup_fraction = -0.1; });
  rejects([](TrainConfig& c) { c.spi_mask_percent = 100.5; });
  rejects([](TrainConfig& c) { c.uor_shuffle_percent = -1.0; });
  rejects([](TrainConfig& c) { c.tlm_mask_rate = 0.0; });
  rejects([](TrainConfig& c) { c.tlm_mask_rate = 1.0; });
}

TEST_CASE("stage prerequisites and data requirements") {
  ModelConfig mcfg = testutil::tiny_config();
  TrainConfig tcfg = fast_tcfg(2);
  PretrainData data;
  data.parallel = toy_parallel(6);
  data.dialogues = toy_dialogue_pool(4);
  data.srl = toy_srl_pool(4);

  SUBCASE("sc needs a checkpoint that completed clm") {
    CHECK_THROWS_WITH_AS(
        train::pretrain(Stage::kSc, data, mcfg, tcfg, nullptr, nullptr),
        "stage sc requires a checkpoint that completed stage clm",
        StageOrderError);
    CsrlModel fresh(mcfg, 1);
    Checkpoint blank = Checkpoint::from_model(fresh, {});
    CHECK_THROWS_AS(
        train::pretrain(Stage::kSc, data, mcfg, tcfg, &blank, nullptr),
        StageOrderError);
  }
  SUBCASE("pa needs clm and sc") {
    CHECK_THROWS_AS(
        train::pretrain(Stage::kPa, data, mcfg, tcfg, nullptr, nullptr),
        StageOrderError);
    CsrlModel fresh(mcfg, 1);
    Checkpoint clm_only = Checkpoint::from_model(fresh, {"clm"});
    CHECK_THROWS_WITH_AS(
        train::pretrain(Stage::kPa, data, mcfg, tcfg, &clm_only, nullptr),
        "stage pa requires a checkpoint that completed stages clm and sc",
        StageOrderError);
  }
  SUBCASE("the supervised stage is not a pre-training stage") {
    CHECK_THROWS_AS(
        train::pretrain(Stage::kCsrl, data, mcfg, tcfg, nullptr, nullptr),
        ConfigError);
  }
  SUBCASE("each stage demands its data pool") {
    PretrainData empty;
    CHECK_THROWS_AS(
        train::pretrain(Stage::kClm, empty, mcfg, tcfg, nullptr, nullptr),
        corpus::DataError);
    CsrlModel fresh(mcfg, 1);
    Checkpoint clm_ck = Checkpoint::from_model(fresh, {"clm"});
    CHECK_THROWS_AS(
        train::pretrain(Stage::kSc, empty, mcfg, tcfg, &clm_ck, nullptr),
        corpus::DataError);
    Checkpoint sc_ck = Checkpoint::from_model(fresh, {"clm", "sc"});
    CHECK_THROWS_AS(
        train::pretrain(Stage::kPa, empty, mcfg, tcfg, &sc_ck, nullptr),
        corpus::DataError);
    CHECK_THROWS_AS(
        train::pretrain(Stage::kEnd2End, empty, mcfg, tcfg, nullptr, nullptr),
        corpus::DataError);
  }
}

TEST_CASE("hierarchical stages freeze earlier blocks byte for byte") {
  ModelConfig mcfg = testutil::tiny_config();
  TrainConfig tcfg = fast_tcfg(3);
  PretrainData data;
  data.parallel = toy_parallel(6);
  data.dialogues = toy_dialogue_pool(4);
  data.srl = toy_srl_pool(4);

  // The pre-training entry point seeds its model exactly like this when no
  // checkpoint is given, so these digests are the true starting point.
  CsrlModel seed_model(mcfg, tcfg.seed);
  Checkpoint init0 = Checkpoint::from_model(seed_model, {});

  Checkpoint ck_clm =
      train::pretrain(Stage::kClm, data, mcfg, tcfg, nullptr, nullptr);
  CHECK(ck_clm.stages == std::vector<std::string>{"clm"});
  CHECK(ck_clm.has_stage("clm"));
  CHECK_FALSE(ck_clm.has_stage("sc"));
  CHECK(ck_clm.block_digest("backbone") != init0.block_digest("backbone"));
  CHECK(ck_clm.block_digest("sc") == init0.block_digest("sc"));
  CHECK(ck_clm.block_digest("pa") == init0.block_digest("pa"));

  Checkpoint ck_sc =
      train::pretrain(Stage::kSc, data, mcfg, tcfg, &ck_clm, nullptr);
  CHECK(ck_sc.stages == std::vector<std::string>{"clm", "sc"});
  CHECK(ck_sc.block_digest("backbone") == ck_clm.block_digest("backbone"));
  CHECK(ck_sc.block_digest("sc") != ck_clm.block_digest("sc"));
  CHECK(ck_sc.block_digest("pa") == ck_clm.block_digest("pa"));

  Checkpoint ck_pa =
      train::pretrain(Stage::kPa, data, mcfg, tcfg, &ck_sc, nullptr);
  CHECK(ck_pa.stages == std::vector<std::string>{"clm", "sc", "pa"});
  CHECK(ck_pa.block_digest("backbone") == ck_sc.block_digest("backbone"));
  CHECK(ck_pa.block_digest("sc") == ck_sc.block_digest("sc"));
  CHECK(ck_pa.block_digest("pa") != ck_sc.block_digest("pa"));

  SUBCASE("supervised stage with the language model frozen") {
    TrainConfig ft = tcfg;
    ft.freeze_lm = true;
    ft.max_steps = 4;
    Checkpoint out = train::train_csrl(toy_csrl_data(4), nullptr, mcfg, ft,
                                       &ck_pa, nullptr);
    CHECK(out.stages ==
          std::vector<std::string>{"clm", "sc", "pa", "csrl"});
    CHECK(out.block_digest("backbone") == ck_pa.block_digest("backbone"));
    CHECK(out.block_digest("sc") != ck_pa.block_digest("sc"));
    CHECK(out.block_digest("pa") != ck_pa.block_digest("pa"));
    // The pre-training heads are not part of the supervised objective.
    CHECK(out.block_digest("heads") == ck_pa.block_digest("heads"));
  }
  SUBCASE("supervised stage fine-tuning the language model") {
    TrainConfig ft = tcfg;
    ft.freeze_lm = false;
    ft.max_steps = 4;
    Checkpoint out = train::train_csrl(toy_csrl_data(4), nullptr, mcfg, ft,
                                       &ck_pa, nullptr);
    CHECK(out.block_digest("backbone") != ck_pa.block_digest("backbone"));
  }
  SUBCASE("a checkpoint's config overrides the one passed in") {
    ModelConfig other = mcfg;
    other.model_width = 16;
    other.ffn_width = 32;
    TrainConfig ft = tcfg;
    ft.max_steps = 2;
    Checkpoint out = train::train_csrl(toy_csrl_data(2), nullptr, other, ft,
                                       &ck_pa, nullptr);
    CHECK(out.config.model_width == mcfg.model_width);
  }
}

TEST_CASE("end-to-end pre-training trains every block at once") {
  ModelConfig mcfg = testutil::tiny_config();
  TrainConfig tcfg = fast_tcfg(2);
  PretrainData data;
  data.parallel = toy_parallel(6);
  data.dialogues = toy_dialogue_pool(4);
  data.srl = toy_srl_pool(4);

  CsrlModel seed_model(mcfg, tcfg.seed);
  Checkpoint init0 = Checkpoint::from_model(seed_model, {});
  Checkpoint ck =
      train::pretrain(Stage::kEnd2End, data, mcfg, tcfg, nullptr, nullptr);
  CHECK(ck.stages == std::vector<std::string>{"end2end"});
  CHECK(ck.block_digest("backbone") != init0.block_digest("backbone"));
  CHECK(ck.block_digest("sc") != init0.block_digest("sc"));
  CHECK(ck.block_digest("pa") != init0.block_digest("pa"));
  CHECK(ck.block_digest("heads") != init0.block_digest("heads"));
}

TEST_CASE("supervised training validates its label space") {
  ModelConfig mcfg = testutil::tiny_config();
  TrainConfig tcfg = fast_tcfg(2);

  SUBCASE("empty dataset") {
    CHECK_THROWS_AS(
        train::train_csrl({}, nullptr, mcfg, tcfg, nullptr, nullptr),
        corpus::DataError);
  }
  SUBCASE("dialogues without frames") {
    corpus::Dataset data = toy_csrl_data(2);
    for (auto& s : data) s.frames.clear();
    CHECK_THROWS_AS(
        train::train_csrl(data, nullptr, mcfg, tcfg, nullptr, nullptr),
        corpus::DataError);
  }
  SUBCASE("unknown role without a checkpoint is a data error") {
    corpus::Dataset data = toy_csrl_data(2, "AGENT");
    CHECK_THROWS_AS(
        train::train_csrl(data, nullptr, mcfg, tcfg, nullptr, nullptr),
        corpus::DataError);
  }
  SUBCASE("unknown role against a checkpoint is a checkpoint mismatch") {
    CsrlModel fresh(mcfg, 1);
    Checkpoint ck = Checkpoint::from_model(fresh, {"clm", "sc", "pa"});
    corpus::Dataset data = toy_csrl_data(2, "AGENT");
    CHECK_THROWS_AS(
        train::train_csrl(data, nullptr, mcfg, tcfg, &ck, nullptr),
        CheckpointError);
    corpus::Dataset dev = toy_csrl_data(1, "AGENT");
    CHECK_THROWS_AS(train::train_csrl(toy_csrl_data(2), &dev, mcfg, tcfg, &ck,
                                      nullptr),
                    CheckpointError);
  }
  SUBCASE("an extended inventory accepts the extra role") {
    ModelConfig wide = mcfg;
    wide.roles.push_back("AGENT");
    corpus::Dataset data = toy_csrl_data(2, "AGENT");
    CHECK_NOTHROW(
        train::train_csrl(data, nullptr, wide, tcfg, nullptr, nullptr));
  }
}

TEST_CASE("metrics log shape and loss decrease") {
  ModelConfig mcfg = testutil::tiny_config();
  PretrainData data;
  data.parallel = toy_parallel(12);

  SUBCASE("masked-pair pre-training logs per-objective losses and improves") {
    TrainConfig tcfg = fast_tcfg(40);
    tcfg.batch_size = 4;
    std::ostringstream log;
    train::pretrain(Stage::kClm, data, mcfg, tcfg, nullptr, &log);
    auto lines = lines_of(log.str());
    REQUIRE(lines.size() == 40);
    CHECK(lines[0].rfind("stage=clm step=0 ", 0) == 0);
    CHECK(has_key(lines[0], "loss"));
    CHECK(has_key(lines[0], "loss_tlm"));
    CHECK(has_key(lines[0], "loss_hpsi"));
    CHECK(has_key(lines[0], "lr"));
    CHECK_FALSE(has_key(lines[0], "lm_lr"));  // nothing is on the LM curve

    // The schedule never reports a zero learning rate: the first update
    // already sits one step into the warmup.
    CHECK(metric_value(lines[0], "lr") > 0.0);
    CHECK(metric_value(lines.back(), "lr") ==
          doctest::Approx(tcfg.min_lr));

    const double first = metric_value(lines[0], "loss");
    const double last =
        (metric_value(lines[37], "loss") + metric_value(lines[38], "loss") +
         metric_value(lines[39], "loss")) /
        3.0;
    CHECK(last < first);
  }
  SUBCASE("supervised training logs epochs and improves") {
    TrainConfig tcfg = fast_tcfg(60);
    tcfg.batch_size = 3;
    tcfg.max_epochs = 10;
    corpus::Dataset train_data = toy_csrl_data(6);
    std::ostringstream log;
    train::train_csrl(train_data, nullptr, mcfg, tcfg, nullptr, &log);
    auto lines = lines_of(log.str());
    REQUIRE(lines.size() == 20);  // 2 steps/epoch, 10 epochs, no dev lines
    CHECK(lines[0].rfind("stage=csrl epoch=0 step=0 ", 0) == 0);
    CHECK(has_key(lines[0], "lm_lr"));  // backbone fine-tunes by default
    const double first = metric_value(lines[0], "loss");
    const double last = metric_value(lines.back(), "loss");
    CHECK(last < first);
  }
}

TEST_CASE("early stopping keeps the best dev epoch") {
  ModelConfig mcfg = testutil::tiny_config();
  TrainConfig tcfg = fast_tcfg(200);
  tcfg.batch_size = 3;
  tcfg.max_epochs = 8;
  tcfg.patience = 3;
  tcfg.max_lr = 5e-3;
  tcfg.min_lr = 5e-4;

  corpus::Dataset train_data = toy_csrl_data(6);
  corpus::Dataset dev = toy_csrl_data(3);

  std::ostringstream log;
  Checkpoint ck =
      train::train_csrl(train_data, &dev, mcfg, tcfg, nullptr, &log);

  double best_logged = -1.0;
  int epoch_lines = 0;
  for (const auto& line : lines_of(log.str())) {
    if (!has_key(line, "dev_f1_all")) continue;
    ++epoch_lines;
    CHECK(has_key(line, "dev_f1_cross"));
    CHECK(has_key(line, "dev_f1_intra"));
    best_logged = metric_value(line, "best_f1");
    CHECK(metric_value(line, "dev_f1_all") <= best_logged + 1e-12);
  }
  REQUIRE(epoch_lines > 0);

  // The returned parameters are the ones that scored best_f1 on dev.
  CsrlModel model(ck.config, 123);
  ck.load_into(model);
  eval::ScoreReport report = infer::evaluate_dataset(model, dev);
  CHECK(report.all.f1() == doctest::Approx(best_logged).epsilon(1e-6));
}

TEST_CASE("identical inputs give identical checkpoints") {
  ModelConfig mcfg = testutil::tiny_config();
  TrainConfig tcfg = fast_tcfg(3);
  PretrainData data;
  data.parallel = toy_parallel(6);

  Checkpoint a = train::pretrain(Stage::kClm, data, mcfg, tcfg, nullptr,
                                 nullptr);
  Checkpoint b = train::pretrain(Stage::kClm, data, mcfg, tcfg, nullptr,
                                 nullptr);
  for (const auto& tag : block_tags())
    CHECK(a.block_digest(tag) == b.block_digest(tag));

  TrainConfig other = tcfg;
  other.seed = 8;
  Checkpoint c = train::pretrain(Stage::kClm, data, mcfg, other, nullptr,
                                 nullptr);
  CHECK(c.block_digest("backbone") != a.block_digest("backbone"));

  corpus::Dataset fine = toy_csrl_data(4);
  Checkpoint d =
      train::train_csrl(fine, nullptr, mcfg, tcfg, nullptr, nullptr);
  Checkpoint e =
      train::train_csrl(fine, nullptr, mcfg, tcfg, nullptr, nullptr);
  for (const auto& tag : block_tags())
    CHECK(d.block_digest(tag) == e.block_digest(tag));
}
