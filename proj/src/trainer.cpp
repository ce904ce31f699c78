#include "csrl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include "csrl/inference.hpp"
#include "csrl/nn/rng.hpp"
#include "csrl/objectives.hpp"

namespace csrl::train {

using corpus::DataError;
using corpus::Dataset;
using corpus::Dialogue;
using corpus::Frame;
using corpus::LabelInventory;
using nn::Expr;
using nn::Mat;
using nn::Parameter;
using nn::Tape;

std::string to_string(Stage s) {
  switch (s) {
    case Stage::kClm:
      return "clm";
    case Stage::kSc:
      return "sc";
    case Stage::kPa:
      return "pa";
    case Stage::kEnd2End:
      return "end2end";
    case Stage::kCsrl:
      return "csrl";
  }
  throw ConfigError("unknown stage");
}

Stage stage_from_string(const std::string& s) {
  if (s == "clm") return Stage::kClm;
  if (s == "sc") return Stage::kSc;
  if (s == "pa") return Stage::kPa;
  if (s == "end2end") return Stage::kEnd2End;
  if (s == "csrl") return Stage::kCsrl;
  throw ConfigError("unknown stage: " + s);
}

void TrainConfig::validate() const {
  if (batch_size <= 0) throw ConfigError("batch_size must be positive");
  if (max_lr <= 0.0 || min_lr <= 0.0 || min_lr > max_lr)
    throw ConfigError("need 0 < min_lr <= max_lr");
  if (lm_max_lr <= 0.0 || lm_min_lr <= 0.0 || lm_min_lr > lm_max_lr)
    throw ConfigError("need 0 < lm_min_lr <= lm_max_lr");
  if (max_epochs <= 0) throw ConfigError("max_epochs must be positive");
  if (max_steps <= 0) throw ConfigError("max_steps must be positive");
  if (patience <= 0) throw ConfigError("patience must be positive");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
  if (warmup_fraction < 0.0 || warmup_fraction >= 1.0)
    throw ConfigError("warmup_fraction must be in [0, 1)");
  if (spi_mask_percent < 0.0 || spi_mask_percent > 100.0)
    throw ConfigError("spi_mask_percent out of range");
  if (uor_shuffle_percent < 0.0 || uor_shuffle_percent > 100.0)
    throw ConfigError("uor_shuffle_percent out of range");
  if (tlm_mask_rate <= 0.0 || tlm_mask_rate >= 1.0)
    throw ConfigError("tlm_mask_rate must be in (0, 1)");
}

double lr_at(int step, int total_steps, double max_lr, double min_lr,
             double warmup_fraction) {
  if (total_steps <= 0) throw ConfigError("lr_at: total_steps must be positive");
  if (step < 0 || step > total_steps)
    throw ConfigError("lr_at: step outside [0, total_steps]");
  const int warmup = std::max(
      1, static_cast<int>(std::floor(warmup_fraction * total_steps)));
  if (step <= warmup)
    return max_lr * static_cast<double>(step) / static_cast<double>(warmup);
  return max_lr + (min_lr - max_lr) * static_cast<double>(step - warmup) /
                      static_cast<double>(total_steps - warmup);
}

AdamW::AdamW(std::vector<Parameter*> params, double weight_decay)
    : params_(std::move(params)), wd_(weight_decay) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Parameter* p : params_) {
    m_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
  }
}

void AdamW::zero_grad() {
  for (Parameter* p : params_) p->zero_grad();
}

void AdamW::step(double lr) {
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  ++t_;
  const double bc1 = 1.0 - std::pow(kBeta1, t_);
  const double bc2 = 1.0 - std::pow(kBeta2, t_);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Parameter& p = *params_[i];
    m_[i] = kBeta1 * m_[i] + (1.0 - kBeta1) * p.grad;
    v_[i] = kBeta2 * v_[i] + (1.0 - kBeta2) * p.grad.cwiseProduct(p.grad);
    Mat mhat = m_[i] / bc1;
    Mat vhat = v_[i] / bc2;
    p.value -= lr * (mhat.array() / (vhat.array().sqrt() + kEps)).matrix();
    if (wd_ > 0.0) p.value -= lr * wd_ * p.value;
  }
}

namespace {

std::string format_metrics(
    const std::vector<std::pair<std::string, double>>& kv) {
  std::ostringstream out;
  out << std::setprecision(8);
  bool first = true;
  for (const auto& [k, v] : kv) {
    if (!first) out << ' ';
    first = false;
    out << k << '=' << v;
  }
  return out.str();
}

void log_line(std::ostream* metrics, const std::string& prefix,
              const std::vector<std::pair<std::string, double>>& kv) {
  if (!metrics) return;
  (*metrics) << prefix;
  if (!kv.empty()) (*metrics) << ' ' << format_metrics(kv);
  (*metrics) << '\n' << std::flush;
}

// One (pool, index) draw; uses both pools evenly when the second is
// non-empty.
objectives::PoolDraw draw_one(std::size_t a, std::size_t b,
                              std::mt19937_64& rng) {
  if (b == 0) return {0, nn::rand_index(rng, a)};
  return objectives::balanced_batch(a, b, 1, rng)[0];
}

std::vector<int> iota_rows(std::size_t n) {
  std::vector<int> rows(n);
  for (std::size_t i = 0; i < n; ++i) rows[i] = static_cast<int>(i);
  return rows;
}

// Tracks per-objective scalar means for the metrics log.
struct LossMeter {
  std::map<std::string, std::pair<double, int>> acc;
  void add(const std::string& key, double v) {
    auto& [sum, n] = acc[key];
    sum += v;
    ++n;
  }
  std::vector<std::pair<std::string, double>> means() const {
    std::vector<std::pair<std::string, double>> out;
    for (const auto& [k, p] : acc)
      out.emplace_back("loss_" + k, p.first / p.second);
    return out;
  }
};

std::vector<Parameter*> collect(CsrlModel& model,
                                const std::vector<std::string>& prefixes) {
  std::vector<Parameter*> out;
  for (const auto& prefix : prefixes)
    for (Parameter* p : model.params().with_prefix(prefix)) out.push_back(p);
  return out;
}

// Parameter groups a stage trains. Everything else stays untouched.
std::pair<std::vector<Parameter*>, std::vector<Parameter*>> stage_groups(
    CsrlModel& model, Stage stage, bool freeze_lm) {
  switch (stage) {
    case Stage::kClm:
      return {collect(model, {"backbone.", "heads.tlm.", "heads.hpsi."}), {}};
    case Stage::kSc:
      return {collect(model, {"sc.", "heads.spi.", "heads.uor."}), {}};
    case Stage::kPa:
      return {collect(model, {"pa.", "heads.sai."}), {}};
    case Stage::kEnd2End:
      return {collect(model, {"sc.", "pa.", "heads."}),
              collect(model, {"backbone."})};
    case Stage::kCsrl:
      return {collect(model, {"sc.", "pa."}),
              freeze_lm ? std::vector<Parameter*>{}
                        : collect(model, {"backbone."})};
  }
  throw ConfigError("unknown stage");
}

void zero_all_grads(CsrlModel& model) {
  for (Parameter* p : model.params().all()) p->zero_grad();
}

Expr mean_of(Tape& t, const std::vector<Expr>& xs) {
  Expr sum = xs[0];
  for (std::size_t i = 1; i < xs.size(); ++i) sum = t.add(sum, xs[i]);
  return t.scale(sum, 1.0 / static_cast<double>(xs.size()));
}

// ---- Per-stage example losses ----------------------------------------------

struct SlotContext {
  CsrlModel& model;
  const PretrainData& data;
  const TrainConfig& tcfg;
  const corpus::LabelInventory& sai_inv;
  const objectives::HpsiSampler* hpsi_a;
  const objectives::HpsiSampler* hpsi_b;
  std::mt19937_64& rng;
};

// Masked-pair and pair-identification losses from one slot.
std::vector<Expr> clm_slot(SlotContext& s, Tape& t, LossMeter& meter) {
  const ModelConfig& cfg = s.model.config();
  std::vector<Expr> losses;

  auto draw = draw_one(s.data.parallel.size(), s.data.parallel_b.size(), s.rng);
  const corpus::SentencePair& pair = draw.pool == 0
                                         ? s.data.parallel[draw.index]
                                         : s.data.parallel_b[draw.index];
  objectives::TlmExample ex = objectives::tlm_corrupt(
      pair, s.model.tokenizer(), s.tcfg.tlm_mask_rate, s.rng);
  if (!ex.positions.empty() &&
      static_cast<int>(ex.tokens.size()) <= cfg.max_seq_len) {
    Expr logits = s.model.tlm_logits(t, ex.tokens, ex.positions, cfg.dropout);
    Expr loss = objectives::objective_loss(objectives::ObjectiveId::kTlm, t,
                                           logits,
                                           iota_rows(ex.positions.size()),
                                           ex.targets);
    meter.add("tlm", t.scalar(loss));
    losses.push_back(loss);
  }

  const objectives::HpsiSampler* sampler =
      draw.pool == 0 || !s.hpsi_b ? s.hpsi_a : s.hpsi_b;
  objectives::HpsiExample hx = sampler->sample(s.rng);
  std::vector<int> ids = s.model.tokenizer().encode_words(hx.source);
  ids.push_back(Tokenizer::kSep);
  for (int id : s.model.tokenizer().encode_words(hx.target)) ids.push_back(id);
  if (static_cast<int>(ids.size()) <= cfg.max_seq_len) {
    Expr logits = s.model.hpsi_logits(t, ids, cfg.dropout);
    Expr loss = objectives::objective_loss(objectives::ObjectiveId::kHpsi, t,
                                           logits, {0},
                                           {hx.parallel ? 1 : 0});
    meter.add("hpsi", t.scalar(loss));
    losses.push_back(loss);
  }
  return losses;
}

// Speaker-identification and order-restoration losses from one dialogue.
std::vector<Expr> sc_slot(SlotContext& s, Tape& t, LossMeter& meter) {
  const ModelConfig& cfg = s.model.config();
  std::vector<Expr> losses;

  auto draw =
      draw_one(s.data.dialogues.size(), s.data.dialogues_b.size(), s.rng);
  const Dialogue& d = (draw.pool == 0 ? s.data.dialogues
                                      : s.data.dialogues_b)[draw.index]
                          .dialogue;

  // Speaker identification over masked units.
  objectives::SpiExample sx =
      objectives::spi_corrupt(d, s.tcfg.spi_mask_percent, s.rng);
  TokenizedContext ctx =
      tokenize_context(d, nullptr, cfg.max_seq_len, s.model.tokenizer());
  std::vector<int> speakers = ctx.speaker_ids;
  std::vector<std::pair<int, int>> unit_bounds;
  std::vector<int> targets;
  for (int ui : sx.masked_units) {
    const objectives::SpiUnit& unit = sx.units[ui];
    if (unit.utt < ctx.first_utt) continue;  // truncated away
    const int base = ctx.utterance_bounds[unit.utt - ctx.first_utt].first;
    unit_bounds.emplace_back(base + unit.start, base + unit.end + 1);
    targets.push_back(sx.unit_speaker[ui]);
    for (int w = base + unit.start; w <= base + unit.end; ++w)
      speakers[w] = s.model.sc().mask_speaker_id();
  }
  if (!targets.empty()) {
    int n_speakers = 0;
    for (int id : speaker_id_map(d)) n_speakers = std::max(n_speakers, id + 1);
    Expr g = s.model.fused_words(t, ctx, &speakers, cfg.dropout);
    Expr logits = s.model.spi_logits(t, g, unit_bounds);
    Expr loss = objectives::objective_loss(objectives::ObjectiveId::kSpi, t,
                                           logits, iota_rows(targets.size()),
                                           targets, n_speakers);
    meter.add("spi", t.scalar(loss));
    losses.push_back(loss);
  }

  // Order restoration over the shuffled suffix.
  objectives::UorExample ux =
      objectives::uor_shuffle(d, s.tcfg.uor_shuffle_percent, s.rng);
  TokenizedContext ctx2 = tokenize_context(ux.shuffled, nullptr,
                                           cfg.max_seq_len,
                                           s.model.tokenizer());
  const int m = static_cast<int>(ux.original_offset.size());
  const int first_kept_slot = std::max(0, ctx2.first_utt - ux.suffix_begin);
  if (first_kept_slot < m) {
    const int window_suffix_begin =
        ux.suffix_begin + first_kept_slot - ctx2.first_utt;
    std::vector<int> order_targets(ux.original_offset.begin() + first_kept_slot,
                                   ux.original_offset.end());
    Expr logits = s.model.uor_logits(t, ctx2, window_suffix_begin, cfg.dropout);
    Expr loss = objectives::objective_loss(
        objectives::ObjectiveId::kUor, t, logits,
        iota_rows(order_targets.size()), order_targets, m);
    meter.add("uor", t.scalar(loss));
    losses.push_back(loss);
  }
  return losses;
}

// Single-sentence SRL loss from one sample.
std::vector<Expr> pa_slot(SlotContext& s, Tape& t, LossMeter& meter) {
  const ModelConfig& cfg = s.model.config();
  auto draw = draw_one(s.data.srl.size(), s.data.srl_b.size(), s.rng);
  const corpus::DialogueSample& sample =
      (draw.pool == 0 ? s.data.srl : s.data.srl_b)[draw.index];
  objectives::SaiExample ex = objectives::sai_build(sample, s.sai_inv);
  TokenizedContext ctx =
      tokenize_context(ex.sample.dialogue, &ex.sample.frames[0],
                       cfg.max_seq_len, s.model.tokenizer());
  Expr logits = s.model.sai_logits(t, ctx, cfg.dropout);
  Expr loss = objectives::objective_loss(objectives::ObjectiveId::kSai, t,
                                         logits, iota_rows(ex.tags.tags.size()),
                                         ex.tags.tags);
  meter.add("sai", t.scalar(loss));
  return {loss};
}

}  // namespace

Checkpoint pretrain(Stage stage, const PretrainData& data,
                    const ModelConfig& mcfg_in, const TrainConfig& tcfg,
                    const Checkpoint* init, std::ostream* metrics) {
  if (stage == Stage::kCsrl)
    throw ConfigError("supervised training uses train_csrl");
  tcfg.validate();

  // Stage prerequisites.
  if (stage == Stage::kSc && (!init || !init->has_stage("clm")))
    throw StageOrderError(
        "stage sc requires a checkpoint that completed stage clm");
  if (stage == Stage::kPa &&
      (!init || !init->has_stage("clm") || !init->has_stage("sc")))
    throw StageOrderError(
        "stage pa requires a checkpoint that completed stages clm and sc");

  // Data requirements.
  const bool needs_parallel =
      stage == Stage::kClm || stage == Stage::kEnd2End;
  const bool needs_dialogues = stage == Stage::kSc || stage == Stage::kEnd2End;
  const bool needs_srl = stage == Stage::kPa || stage == Stage::kEnd2End;
  if (needs_parallel && data.parallel.empty())
    throw DataError("stage " + to_string(stage) + " needs parallel data");
  if (needs_dialogues && data.dialogues.empty())
    throw DataError("stage " + to_string(stage) + " needs dialogue data");
  if (needs_srl && data.srl.empty())
    throw DataError("stage " + to_string(stage) + " needs sentence SRL data");

  ModelConfig mcfg = init ? init->config : mcfg_in;
  mcfg.validate();
  CsrlModel model(mcfg, tcfg.seed);
  if (init) init->load_into(model);

  auto [main_params, lm_params] = stage_groups(model, stage, false);
  AdamW main_opt(main_params, tcfg.weight_decay);
  std::optional<AdamW> lm_opt;
  if (!lm_params.empty()) lm_opt.emplace(lm_params, tcfg.weight_decay);

  std::optional<objectives::HpsiSampler> hpsi_a, hpsi_b;
  if (needs_parallel) {
    hpsi_a.emplace(data.parallel);
    if (!data.parallel_b.empty()) hpsi_b.emplace(data.parallel_b);
  }
  corpus::LabelInventory sai_inv;  // sentence SRL uses the standard roles

  std::mt19937_64 rng(tcfg.seed ^ 0x9e3779b97f4a7c15ULL);
  const int total = tcfg.max_steps;
  const std::string stage_name = to_string(stage);

  for (int step = 0; step < total; ++step) {
    Tape t(/*training=*/true, &rng);
    LossMeter meter;
    SlotContext sctx{model,
                     data,
                     tcfg,
                     sai_inv,
                     hpsi_a ? &*hpsi_a : nullptr,
                     hpsi_b ? &*hpsi_b : nullptr,
                     rng};
    std::vector<Expr> slot_losses;
    for (int slot = 0; slot < tcfg.batch_size; ++slot) {
      std::vector<Expr> parts;
      if (needs_parallel) {
        auto v = clm_slot(sctx, t, meter);
        parts.insert(parts.end(), v.begin(), v.end());
      }
      if (needs_dialogues) {
        auto v = sc_slot(sctx, t, meter);
        parts.insert(parts.end(), v.begin(), v.end());
      }
      if (needs_srl) {
        auto v = pa_slot(sctx, t, meter);
        parts.insert(parts.end(), v.begin(), v.end());
      }
      if (parts.empty()) continue;
      Expr sum = parts[0];
      for (std::size_t i = 1; i < parts.size(); ++i) sum = t.add(sum, parts[i]);
      slot_losses.push_back(sum);
    }
    if (slot_losses.empty())
      throw DataError("no usable examples in pre-training batch");
    Expr loss = mean_of(t, slot_losses);

    zero_all_grads(model);
    t.backward(loss);
    const double lr =
        lr_at(step + 1, total, tcfg.max_lr, tcfg.min_lr, tcfg.warmup_fraction);
    main_opt.step(lr);
    double lm_lr = 0.0;
    if (lm_opt) {
      lm_lr = lr_at(step + 1, total, tcfg.lm_max_lr, tcfg.lm_min_lr,
                    tcfg.warmup_fraction);
      lm_opt->step(lm_lr);
    }

    std::vector<std::pair<std::string, double>> kv{
        {"loss", t.scalar(loss)}};
    for (auto& p : meter.means()) kv.push_back(p);
    kv.emplace_back("lr", lr);
    if (lm_opt) kv.emplace_back("lm_lr", lm_lr);
    log_line(metrics,
             "stage=" + stage_name + " step=" + std::to_string(step), kv);
  }

  std::vector<std::string> stages = init ? init->stages
                                         : std::vector<std::string>{};
  stages.push_back(stage_name);
  return Checkpoint::from_model(model, std::move(stages));
}

Checkpoint train_csrl(const Dataset& data, const Dataset* dev,
                      const ModelConfig& mcfg_in, const TrainConfig& tcfg,
                      const Checkpoint* init, std::ostream* metrics) {
  tcfg.validate();
  if (data.empty()) throw DataError("training dataset is empty");

  ModelConfig mcfg = init ? init->config : mcfg_in;
  mcfg.validate();
  LabelInventory inv(mcfg.roles);
  auto check_roles = [&](const Dataset& ds, const char* which) {
    for (const auto& sample : ds)
      for (const auto& frame : sample.frames)
        for (const auto& arg : frame.arguments)
          if (inv.role_id(arg.role) < 0) {
            const std::string msg = std::string(which) + " data uses role " +
                                    arg.role +
                                    " that is not in the label inventory";
            if (init) throw CheckpointError(msg);
            throw DataError(msg);
          }
  };
  check_roles(data, "training");
  if (dev) check_roles(*dev, "dev");

  CsrlModel model(mcfg, tcfg.seed);
  if (init) init->load_into(model);

  struct Item {
    const Dialogue* d;
    const Frame* f;
  };
  std::vector<Item> items;
  for (const auto& sample : data)
    for (const auto& frame : sample.frames)
      items.push_back({&sample.dialogue, &frame});
  if (items.empty()) throw DataError("training data has no frames");

  const int steps_per_epoch = static_cast<int>(
      (items.size() + tcfg.batch_size - 1) / tcfg.batch_size);
  const int total =
      std::min(tcfg.max_steps, tcfg.max_epochs * steps_per_epoch);

  auto [main_params, lm_params] =
      stage_groups(model, Stage::kCsrl, tcfg.freeze_lm);
  AdamW main_opt(main_params, tcfg.weight_decay);
  std::optional<AdamW> lm_opt;
  if (!lm_params.empty()) lm_opt.emplace(lm_params, tcfg.weight_decay);

  std::mt19937_64 rng(tcfg.seed ^ 0x9e3779b97f4a7c15ULL);

  double best_f1 = -1.0;
  std::vector<Mat> best_values;
  int epochs_since_improvement = 0;
  int step = 0;

  for (int epoch = 0; epoch < tcfg.max_epochs && step < total; ++epoch) {
    nn::shuffle(items, rng);
    for (std::size_t at = 0; at < items.size() && step < total;
         at += static_cast<std::size_t>(tcfg.batch_size), ++step) {
      const std::size_t end =
          std::min(items.size(), at + static_cast<std::size_t>(tcfg.batch_size));
      Tape t(/*training=*/true, &rng);
      std::vector<Expr> losses;
      for (std::size_t k = at; k < end; ++k) {
        TokenizedContext ctx = tokenize_context(
            *items[k].d, items[k].f, mcfg.max_seq_len, model.tokenizer());
        corpus::TagSequence tags =
            corpus::bio_encode(*items[k].f, *items[k].d, inv, ctx.first_utt);
        Expr logits = model.csrl_logits(t, ctx, mcfg.dropout);
        losses.push_back(t.mean_cross_entropy(
            logits, iota_rows(tags.tags.size()), tags.tags));
      }
      Expr loss = mean_of(t, losses);
      zero_all_grads(model);
      t.backward(loss);
      const double lr =
          lr_at(step + 1, total, tcfg.max_lr, tcfg.min_lr, tcfg.warmup_fraction);
      main_opt.step(lr);
      double lm_lr = 0.0;
      if (lm_opt) {
        lm_lr = lr_at(step + 1, total, tcfg.lm_max_lr, tcfg.lm_min_lr,
                      tcfg.warmup_fraction);
        lm_opt->step(lm_lr);
      }
      std::vector<std::pair<std::string, double>> kv{{"loss", t.scalar(loss)},
                                                     {"lr", lr}};
      if (lm_opt) kv.emplace_back("lm_lr", lm_lr);
      log_line(metrics,
               "stage=csrl epoch=" + std::to_string(epoch) +
                   " step=" + std::to_string(step),
               kv);
    }

    if (dev) {
      eval::ScoreReport report = infer::evaluate_dataset(model, *dev);
      const double f1 = report.all.f1();
      if (f1 > best_f1) {
        best_f1 = f1;
        best_values.clear();
        for (Parameter* p : model.params().all()) best_values.push_back(p->value);
        epochs_since_improvement = 0;
      } else {
        ++epochs_since_improvement;
      }
      log_line(metrics, "stage=csrl epoch=" + std::to_string(epoch),
               {{"dev_f1_all", report.all.f1()},
                {"dev_f1_cross", report.cross.f1()},
                {"dev_f1_intra", report.intra.f1()},
                {"best_f1", best_f1}});
      if (epochs_since_improvement >= tcfg.patience) break;
    }
  }

  if (dev && !best_values.empty()) {
    auto params = model.params().all();
    for (std::size_t i = 0; i < params.size(); ++i)
      params[i]->value = best_values[i];
  }

  std::vector<std::string> stages = init ? init->stages
                                         : std::vector<std::string>{};
  stages.push_back("csrl");
  return Checkpoint::from_model(model, std::move(stages));
}

}  // namespace csrl::train
