#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "csrl/backbone.hpp"
#include "csrl/corpus.hpp"
#include "csrl/nn/tape.hpp"

namespace csrl::objectives {

// ---- Translation language modeling ----------------------------------------

// A corrupted parallel pair: source and target joined by a separator, with
// prediction targets at the selected positions.
struct TlmExample {
  std::vector<int> tokens;
  std::vector<int> positions;  // rows carrying prediction targets
  std::vector<int> targets;    // original subtoken ids at those rows
};

// Selects content positions at mask_rate; a selected position becomes the
// mask id 80% of the time, a random content id 10%, and stays put 10%.
TlmExample tlm_corrupt(const corpus::SentencePair& pair,
                       const Tokenizer& tokenizer, double mask_rate,
                       std::mt19937_64& rng);

// ---- Hard parallel sentence identification ---------------------------------

enum class NegativeSource { kNone, kNgram, kPerturb };

struct HpsiExample {
  std::vector<std::string> source;
  std::vector<std::string> target;
  bool parallel = false;
  NegativeSource negative_source = NegativeSource::kNone;
};

// For each n in 1..4, the pool sentence sharing the largest fraction of the
// input's n-grams (ties: lowest pool index). Pool entries equal to the input
// and entries sharing nothing are skipped, as are n with no input n-grams.
std::vector<std::vector<std::string>> ngram_hard_negatives(
    const std::vector<std::vector<std::string>>& pool,
    const std::vector<std::string>& sentence);

// Applies one uniformly chosen edit: token deletion, replacement with a
// vocabulary token, or order permutation. Always returns a sentence that
// differs from the input.
std::vector<std::string> perturb(const std::vector<std::string>& sentence,
                                 const std::vector<std::string>& vocab,
                                 std::mt19937_64& rng);

// Draws pair-identification examples: a true pair with probability 1/2,
// otherwise the target side is replaced by an n-gram hard negative (40% of
// negatives) or a perturbation (60%).
class HpsiSampler {
 public:
  explicit HpsiSampler(const corpus::ParallelCorpus& corpus);

  HpsiExample sample(std::mt19937_64& rng) const;
  // Times the n-gram path produced no candidate and fell back to perturb.
  std::size_t ngram_fallbacks() const { return fallbacks_; }

 private:
  const corpus::ParallelCorpus* corpus_;
  std::vector<std::vector<std::string>> target_pool_;
  std::vector<std::string> target_vocab_;
  mutable std::size_t fallbacks_ = 0;
};

// ---- Speaker identification -------------------------------------------------

// A maskable unit: a token range of one utterance (end inclusive).
struct SpiUnit {
  int utt = 0;
  int start = 0;
  int end = 0;
};

struct SpiExample {
  std::vector<SpiUnit> units;
  std::vector<int> unit_speaker;  // per-dialogue speaker id of each unit
  std::vector<int> masked_units;  // indices into units, ascending
  bool clause_level = false;
};

// Masks ceil(k1% of units). Units are clauses when exactly two speakers
// strictly alternate, whole utterances otherwise.
SpiExample spi_corrupt(const corpus::Dialogue& d, double k1_percent,
                       std::mt19937_64& rng);

// ---- Utterance order restoration -------------------------------------------

struct UorExample {
  corpus::Dialogue shuffled;
  int suffix_begin = 0;  // utterances [suffix_begin, N) were permuted
  // Per suffix slot: the original offset (0-based within the suffix) of the
  // utterance now sitting there.
  std::vector<int> original_offset;
};

// Uniformly permutes the last ceil(k2% of N) utterances; turn fields are
// renumbered so order must be recovered from content, not indicators.
UorExample uor_shuffle(const corpus::Dialogue& d, double k2_percent,
                       std::mt19937_64& rng);

// ---- Single-sentence SRL ----------------------------------------------------

struct SaiExample {
  corpus::DialogueSample sample;  // one utterance, one frame
  corpus::TagSequence tags;
};

SaiExample sai_build(const corpus::DialogueSample& srl,
                     const corpus::LabelInventory& inv);

// ---- Batch composition -------------------------------------------------------

struct PoolDraw {
  int pool = 0;  // 0 or 1
  std::size_t index = 0;
};

// Each slot picks a pool by fair coin, then an element uniformly within it,
// keeping two data sources balanced regardless of their sizes.
std::vector<PoolDraw> balanced_batch(std::size_t pool_a, std::size_t pool_b,
                                     int batch_size, std::mt19937_64& rng);

// ---- Loss --------------------------------------------------------------------

enum class ObjectiveId { kTlm, kHpsi, kSpi, kUor, kSai };

// Mean cross-entropy of the objective's logits at the given rows. The
// distribution may be limited to the first class_limit columns (speaker and
// order prediction restrict to the classes present in the example).
nn::Expr objective_loss(ObjectiveId id, nn::Tape& t, nn::Expr logits,
                        const std::vector<int>& rows,
                        const std::vector<int>& targets, int class_limit = -1);

}  // namespace csrl::objectives
