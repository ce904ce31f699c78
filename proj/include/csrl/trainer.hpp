#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "csrl/checkpoint.hpp"
#include "csrl/config.hpp"
#include "csrl/corpus.hpp"
#include "csrl/evaluator.hpp"
#include "csrl/model.hpp"
#include "csrl/nn/tape.hpp"

namespace csrl::train {

enum class Stage { kClm, kSc, kPa, kEnd2End, kCsrl };

std::string to_string(Stage s);
Stage stage_from_string(const std::string& s);

struct TrainConfig {
  int batch_size = 24;
  double max_lr = 5e-5;
  double min_lr = 1e-5;
  // Separate schedule for the backbone when it is fine-tuned.
  double lm_max_lr = 1e-5;
  double lm_min_lr = 1e-6;
  int max_epochs = 50;
  int max_steps = 15000;
  int patience = 10;  // epochs without dev improvement before stopping
  bool freeze_lm = false;
  double weight_decay = 0.01;
  double warmup_fraction = 0.1;
  std::uint64_t seed = 1;
  double spi_mask_percent = 30.0;     // share of units whose speaker is masked
  double uor_shuffle_percent = 50.0;  // share of utterances shuffled
  double tlm_mask_rate = 0.15;

  void validate() const;
};

// Linear warmup to max_lr over the first warmup_fraction of total_steps,
// then linear decay to min_lr at total_steps. step must lie in [0, total].
double lr_at(int step, int total_steps, double max_lr, double min_lr,
             double warmup_fraction = 0.1);

// AdamW with decoupled weight decay over a fixed parameter group. Only the
// parameters handed to the optimizer are ever touched, which is also how
// freezing works: frozen blocks simply belong to no optimizer.
class AdamW {
 public:
  AdamW(std::vector<nn::Parameter*> params, double weight_decay);

  void zero_grad();
  void step(double lr);
  const std::vector<nn::Parameter*>& params() const { return params_; }

 private:
  std::vector<nn::Parameter*> params_;
  std::vector<nn::Mat> m_, v_;
  double wd_;
  int t_ = 0;
};

// Data pools for pre-training. The *_b pools are optional second sources;
// when present, batches draw from both sides evenly.
struct PretrainData {
  corpus::ParallelCorpus parallel;
  corpus::ParallelCorpus parallel_b;
  corpus::Dataset dialogues;
  corpus::Dataset dialogues_b;
  corpus::Dataset srl;
  corpus::Dataset srl_b;
};

// Runs one pre-training stage and returns the resulting checkpoint (the
// input checkpoint's completed stages plus this one). Stage prerequisites:
// sc requires a clm checkpoint, pa requires clm and sc; violations raise
// StageOrderError. Metrics lines go to `metrics` when non-null.
Checkpoint pretrain(Stage stage, const PretrainData& data,
                    const ModelConfig& mcfg, const TrainConfig& tcfg,
                    const Checkpoint* init, std::ostream* metrics);

// Supervised conversational SRL training. With dev data, keeps the
// parameters of the best dev F1 epoch and stops after `patience` epochs
// without improvement.
Checkpoint train_csrl(const corpus::Dataset& data, const corpus::Dataset* dev,
                      const ModelConfig& mcfg, const TrainConfig& tcfg,
                      const Checkpoint* init, std::ostream* metrics);

}  // namespace csrl::train
