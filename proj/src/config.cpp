#include "csrl/config.hpp"

namespace csrl {

std::string to_string(MTransVariant v) {
  switch (v) {
    case MTransVariant::kStandard:
      return "standard";
    case MTransVariant::kMTrans:
      return "mtrans";
    case MTransVariant::kLaterMTrans:
      return "later-mtrans";
    case MTransVariant::kBothMTrans:
      return "both-mtrans";
  }
  throw ConfigError("unknown layer variant");
}

MTransVariant mtrans_variant_from_string(const std::string& s) {
  if (s == "standard") return MTransVariant::kStandard;
  if (s == "mtrans") return MTransVariant::kMTrans;
  if (s == "later-mtrans") return MTransVariant::kLaterMTrans;
  if (s == "both-mtrans") return MTransVariant::kBothMTrans;
  throw ConfigError("unknown layer variant: " + s);
}

std::string to_string(WordPooling p) {
  return p == WordPooling::kFirstSubtoken ? "first" : "mean";
}

WordPooling word_pooling_from_string(const std::string& s) {
  if (s == "first") return WordPooling::kFirstSubtoken;
  if (s == "mean") return WordPooling::kMean;
  throw ConfigError("unknown word pooling: " + s);
}

const std::vector<std::string>& standard_roles() {
  static const std::vector<std::string> kRoles = {
      "ARG0", "ARG1", "ARG2", "ARG3", "ARG4", "ARG-LOC", "ARG-TMP", "ARG-PRP",
  };
  return kRoles;
}

void ModelConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v <= 0) throw ConfigError(std::string(name) + " must be positive");
  };
  positive(vocab_size, "vocab_size");
  positive(backbone_width, "backbone_width");
  positive(backbone_heads, "backbone_heads");
  positive(backbone_ffn, "backbone_ffn");
  positive(max_seq_len, "max_seq_len");
  positive(model_width, "model_width");
  positive(heads, "heads");
  positive(ffn_width, "ffn_width");
  positive(turn_width, "turn_width");
  positive(speaker_width, "speaker_width");
  positive(predicate_width, "predicate_width");
  positive(max_turns, "max_turns");
  positive(max_speakers, "max_speakers");
  positive(utterance_layers, "utterance_layers");
  if (vocab_size < 8) throw ConfigError("vocab_size must be at least 8");
  if (backbone_layers < 4)
    throw ConfigError("backbone_layers must be at least 4");
  if (word_layers < 0 || pa_layers < 0)
    throw ConfigError("encoder depths must be non-negative");
  if (backbone_width % backbone_heads != 0)
    throw ConfigError("backbone_width must be divisible by backbone_heads");
  if (model_width % heads != 0)
    throw ConfigError("model_width must be divisible by heads");
  if (dropout < 0.0 || dropout >= 1.0)
    throw ConfigError("dropout must be in [0, 1)");
  if (roles.empty()) throw ConfigError("role inventory must not be empty");
}

}  // namespace csrl
