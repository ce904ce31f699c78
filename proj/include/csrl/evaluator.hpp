#pragma once

#include <vector>

#include "csrl/corpus.hpp"

namespace csrl::eval {

struct Bucket {
  std::size_t gold = 0;
  std::size_t predicted = 0;
  std::size_t matched = 0;

  double precision() const {
    return predicted == 0 ? 0.0
                          : static_cast<double>(matched) /
                                static_cast<double>(predicted);
  }
  double recall() const {
    return gold == 0
               ? 0.0
               : static_cast<double>(matched) / static_cast<double>(gold);
  }
  double f1() const {
    double p = precision(), r = recall();
    return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
  }
};

// Micro-averaged scores over exact (predicate, argument, role) matches,
// overall and split by whether the argument sits in the predicate's
// utterance (intra) or another one (cross).
struct ScoreReport {
  Bucket all, cross, intra;
};

// An argument in a different utterance than its predicate.
inline bool is_cross(const corpus::SemanticTuple& t) {
  return t.argument.utt != t.predicate.utt;
}

// Gold tuples of a frame.
std::vector<corpus::SemanticTuple> tuples_from_frame(const corpus::Frame& f);

// Tuples from predicted tags over a context window. utt/tok map window word
// positions back to dialogue coordinates; a tagged run crossing an utterance
// boundary yields one tuple per utterance it touches.
std::vector<corpus::SemanticTuple> extract_tuples(
    const corpus::TagSequence& tags, const corpus::Span& predicate,
    const std::vector<int>& utt_of_word, const std::vector<int>& tok_of_word,
    const corpus::LabelInventory& inv);

// Gold and predicted tuples of one frame.
struct FrameTuples {
  std::vector<corpus::SemanticTuple> gold;
  std::vector<corpus::SemanticTuple> predicted;
};

ScoreReport score(const std::vector<FrameTuples>& frames);

}  // namespace csrl::eval
