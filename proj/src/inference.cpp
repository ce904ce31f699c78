#include "csrl/inference.hpp"

namespace csrl::infer {

using corpus::Dataset;
using corpus::Dialogue;
using corpus::Frame;
using corpus::LabelInventory;
using corpus::SemanticTuple;
using corpus::TagSequence;

TagSequence predict_tags(const CsrlModel& model, const TokenizedContext& ctx) {
  nn::Tape t(/*training=*/false);
  nn::Expr logits = model.csrl_logits(t, ctx);
  const nn::Mat& l = t.val(logits);
  TagSequence tags;
  tags.tags.resize(static_cast<std::size_t>(l.rows()));
  for (Eigen::Index r = 0; r < l.rows(); ++r) {
    Eigen::Index best = 0;
    l.row(r).maxCoeff(&best);
    tags.tags[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return tags;
}

std::vector<SemanticTuple> predict_frame(const CsrlModel& model,
                                         const Dialogue& d,
                                         const Frame& frame) {
  TokenizedContext ctx = tokenize_context(
      d, &frame, model.config().max_seq_len, model.tokenizer());
  TagSequence tags = predict_tags(model, ctx);
  LabelInventory inv(model.config().roles);
  return eval::extract_tuples(tags, frame.predicate, ctx.orig_utt_of_word,
                              ctx.orig_tok_of_word, inv);
}

Dataset predict_dataset(const CsrlModel& model, const Dataset& data) {
  Dataset out = data;
  for (auto& sample : out)
    for (auto& frame : sample.frames) {
      std::vector<SemanticTuple> tuples =
          predict_frame(model, sample.dialogue, frame);
      frame.arguments.clear();
      for (const auto& t : tuples) frame.arguments.push_back({t.argument, t.role});
    }
  return out;
}

eval::ScoreReport evaluate_dataset(const CsrlModel& model,
                                   const Dataset& data) {
  std::vector<eval::FrameTuples> frames;
  for (const auto& sample : data)
    for (const auto& frame : sample.frames) {
      eval::FrameTuples ft;
      ft.gold = eval::tuples_from_frame(frame);
      ft.predicted = predict_frame(model, sample.dialogue, frame);
      frames.push_back(std::move(ft));
    }
  return eval::score(frames);
}

}  // namespace csrl::infer
