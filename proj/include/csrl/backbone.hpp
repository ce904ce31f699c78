#pragma once

#include <memory>
#include <random>
#include <string>
#include <vector>

#include "csrl/config.hpp"
#include "csrl/corpus.hpp"
#include "csrl/mtrans.hpp"
#include "csrl/nn/tape.hpp"

namespace csrl {

// Deterministic hash tokenizer: one subtoken per word, id derived from the
// word bytes. A handful of low ids are reserved for control tokens.
class Tokenizer {
 public:
  explicit Tokenizer(int vocab_size);

  static constexpr int kPad = 0;
  static constexpr int kSep = 1;
  static constexpr int kMask = 2;
  static constexpr int kContentFloor = 4;  // first id hashing can produce

  int vocab_size() const { return vocab_; }
  int word_id(const std::string& word) const;
  std::vector<int> encode_words(const std::vector<std::string>& words) const;
  int random_content_id(std::mt19937_64& rng) const;

 private:
  int vocab_;
};

// A dialogue rendered as one backbone input sequence: the utterances of a
// context window joined by separator subtokens, plus per-word indicator
// inputs and bookkeeping that maps window words back to the dialogue.
struct TokenizedContext {
  std::vector<int> subtokens;
  // Window word index per subtoken; -1 at separators.
  std::vector<int> word_of_subtoken;
  // Subtoken range [begin, end) per window word.
  std::vector<std::pair<int, int>> word_segments;

  // Per-word inputs for the encoders above the backbone.
  std::vector<int> speaker_ids;      // per-dialogue, by first appearance
  std::vector<int> turn_ids;         // window-relative utterance position
  std::vector<int> predicate_flags;  // 1 on predicate words

  // Word range [begin, end) per window utterance.
  std::vector<std::pair<int, int>> utterance_bounds;
  std::vector<int> utt_of_word;  // window-relative utterance per word

  // Mapping back to the dialogue.
  std::vector<int> orig_utt_of_word;
  std::vector<int> orig_tok_of_word;
  int first_utt = 0;  // first dialogue utterance kept in the window
  int last_utt = 0;   // last one (the predicate's when a frame is given)

  int word_count() const { return static_cast<int>(speaker_ids.size()); }
  int utterance_count() const {
    return static_cast<int>(utterance_bounds.size());
  }
};

// Speaker ids by order of first appearance over the whole dialogue.
std::vector<int> speaker_id_map(const corpus::Dialogue& d);

// Serializes the window of utterances ending at frame->predicate.utt (the
// whole dialogue when frame is null). Oldest utterances are dropped whole
// until the subtoken count fits max_len; it is an error when the last
// utterance alone does not fit.
TokenizedContext tokenize_context(const corpus::Dialogue& dialogue,
                                  const corpus::Frame* frame, int max_len,
                                  const Tokenizer& tokenizer);

// Trainable contextual encoder standing in for a pretrained multilingual
// language model: token + position embeddings under a stack of post-norm
// transformer layers.
class Backbone {
 public:
  Backbone(nn::ParamStore& store, const ModelConfig& cfg,
           std::mt19937_64& rng);

  // Hidden states of every layer, each |subtokens| x h.
  std::vector<nn::Expr> forward_layers(nn::Tape& t,
                                       const std::vector<int>& subtokens,
                                       double dropout = 0.0) const;
  // Final layer only.
  nn::Expr final_hidden(nn::Tape& t, const std::vector<int>& subtokens,
                        double dropout = 0.0) const;
  // Word representations: concatenation of the four topmost layers (4h
  // wide), then one row per word via the configured subtoken pooling.
  nn::Expr encode(nn::Tape& t, const TokenizedContext& ctx,
                  double dropout = 0.0) const;

  int width() const { return h_; }
  int encode_width() const { return 4 * h_; }

 private:
  int h_;
  int max_seq_len_;
  WordPooling pooling_;
  nn::Parameter* token_table_;
  nn::Parameter* pos_table_;
  std::vector<std::unique_ptr<MTransLayer>> layers_;
};

}  // namespace csrl
