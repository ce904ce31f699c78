#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace csrl {

// Transformer encoder layer variants. The concat variants replace the Add
// operation of the named residual connection with feature concatenation,
// which widens the residual to 2d before it is reduced back to d.
enum class MTransVariant {
  kStandard,    // Add in both residuals
  kMTrans,      // Concat in the first (attention) residual
  kLaterMTrans, // Concat in the second (feed-forward) residual
  kBothMTrans,  // Concat in both residuals
};

std::string to_string(MTransVariant v);
MTransVariant mtrans_variant_from_string(const std::string& s);

// How subtoken states are reduced to one row per word.
enum class WordPooling { kFirstSubtoken, kMean };

std::string to_string(WordPooling p);
WordPooling word_pooling_from_string(const std::string& s);

// Eight roles shared between sentence-level SRL and conversational SRL.
const std::vector<std::string>& standard_roles();

struct ModelConfig {
  // Contextual token encoder (the trainable stand-in for a pretrained
  // multilingual language model).
  int vocab_size = 8192;
  int backbone_layers = 4;  // must be >= 4, the top four are concatenated
  int backbone_width = 64;  // h; word representations are 4h wide
  int backbone_heads = 4;
  int backbone_ffn = 256;
  int max_seq_len = 512;

  // Hierarchical encoders.
  int model_width = 512;  // d
  int word_layers = 2;    // N1, word-level encoder depth
  int pa_layers = 1;      // N2, predicate-argument encoder depth
  MTransVariant variant = MTransVariant::kMTrans;
  int heads = 8;
  int ffn_width = 1024;
  int turn_width = 16;       // d_t
  int speaker_width = 16;    // d_r
  int predicate_width = 16;  // d_p
  int max_turns = 64;
  int max_speakers = 8;
  int utterance_layers = 2;  // BiLSTM stack depth
  double dropout = 0.1;
  // Concat residuals: normalize at width 2d then project (default), or
  // project to d first and normalize at d.
  bool project_before_norm = false;
  WordPooling pooling = WordPooling::kFirstSubtoken;

  // Role inventory; the tag set is O plus B-/I- per role.
  std::vector<std::string> roles = standard_roles();

  void validate() const;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace csrl
