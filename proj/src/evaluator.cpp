#include "csrl/evaluator.hpp"

#include <algorithm>
#include <iterator>

namespace csrl::eval {

using corpus::FlatSpan;
using corpus::SemanticTuple;
using corpus::Span;

std::vector<SemanticTuple> tuples_from_frame(const corpus::Frame& f) {
  std::vector<SemanticTuple> out;
  out.reserve(f.arguments.size());
  for (const auto& a : f.arguments)
    out.push_back({f.predicate, a.span, a.role});
  return out;
}

std::vector<SemanticTuple> extract_tuples(
    const corpus::TagSequence& tags, const Span& predicate,
    const std::vector<int>& utt_of_word, const std::vector<int>& tok_of_word,
    const corpus::LabelInventory& inv) {
  if (tags.tags.size() != utt_of_word.size() ||
      tags.tags.size() != tok_of_word.size())
    throw corpus::DataError("tag/word map length mismatch");

  std::vector<SemanticTuple> out;
  for (const FlatSpan& s : corpus::bio_decode(tags, inv)) {
    // Break the decoded run at utterance boundaries.
    int piece_start = s.start;
    for (int w = s.start; w <= s.end; ++w) {
      const bool last = w == s.end;
      if (!last && utt_of_word[w + 1] == utt_of_word[w]) continue;
      Span arg;
      arg.utt = utt_of_word[piece_start];
      arg.start = tok_of_word[piece_start];
      arg.end = tok_of_word[w];
      out.push_back({predicate, arg, inv.roles()[s.role]});
      piece_start = w + 1;
    }
  }
  return out;
}

ScoreReport score(const std::vector<FrameTuples>& frames) {
  ScoreReport report;
  for (const auto& f : frames) {
    std::vector<SemanticTuple> gold = f.gold;
    std::vector<SemanticTuple> pred = f.predicted;
    std::sort(gold.begin(), gold.end());
    std::sort(pred.begin(), pred.end());
    std::vector<SemanticTuple> matched;
    std::set_intersection(gold.begin(), gold.end(), pred.begin(), pred.end(),
                          std::back_inserter(matched));
    auto add = [](Bucket& b, std::size_t g, std::size_t p, std::size_t m) {
      b.gold += g;
      b.predicted += p;
      b.matched += m;
    };
    auto cross_count = [](const std::vector<SemanticTuple>& v) {
      return static_cast<std::size_t>(
          std::count_if(v.begin(), v.end(), is_cross));
    };
    std::size_t gc = cross_count(gold), pc = cross_count(pred),
                mc = cross_count(matched);
    add(report.all, gold.size(), pred.size(), matched.size());
    add(report.cross, gc, pc, mc);
    add(report.intra, gold.size() - gc, pred.size() - pc, matched.size() - mc);
  }
  return report;
}

}  // namespace csrl::eval
