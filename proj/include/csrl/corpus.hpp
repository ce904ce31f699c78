#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace csrl::corpus {

// Raised for malformed or inconsistent input data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Utterance {
  std::string speaker;
  int turn = 0;  // 1-based, strictly increasing within a dialogue
  std::vector<std::string> tokens;
};

// Token span inside a single utterance; end is inclusive.
struct Span {
  int utt = 0;
  int start = 0;
  int end = 0;

  friend bool operator==(const Span& a, const Span& b) {
    return a.utt == b.utt && a.start == b.start && a.end == b.end;
  }
  friend bool operator<(const Span& a, const Span& b) {
    if (a.utt != b.utt) return a.utt < b.utt;
    if (a.start != b.start) return a.start < b.start;
    return a.end < b.end;
  }
};

struct Argument {
  Span span;
  std::string role;
};

struct Frame {
  Span predicate;
  std::vector<Argument> arguments;
};

struct Dialogue {
  std::string id;
  std::string language;
  std::vector<Utterance> utterances;
};

struct DialogueSample {
  Dialogue dialogue;
  std::vector<Frame> frames;
};

using Dataset = std::vector<DialogueSample>;

// One aligned sentence pair, whitespace-tokenized; both sides non-empty.
struct SentencePair {
  std::vector<std::string> source;
  std::vector<std::string> target;
};

using ParallelCorpus = std::vector<SentencePair>;

// Role inventory and the derived BIO tag space: tag 0 is O, role k owns
// tags 1+2k (B) and 2+2k (I).
class LabelInventory {
 public:
  LabelInventory();  // the eight standard roles
  explicit LabelInventory(std::vector<std::string> roles);

  static constexpr int kOutside = 0;

  const std::vector<std::string>& roles() const { return roles_; }
  int role_count() const { return static_cast<int>(roles_.size()); }
  int tag_count() const { return 1 + 2 * role_count(); }
  int role_id(const std::string& role) const;  // -1 when absent
  int begin_tag(int role) const { return 1 + 2 * role; }
  int inside_tag(int role) const { return 2 + 2 * role; }
  // Role owning a B-/I- tag; O has no role.
  int role_of_tag(int tag) const;
  bool is_begin(int tag) const { return tag > 0 && tag % 2 == 1; }
  bool is_inside(int tag) const { return tag > 0 && tag % 2 == 0; }
  std::string tag_name(int tag) const;

  friend bool operator==(const LabelInventory& a, const LabelInventory& b) {
    return a.roles_ == b.roles_;
  }

 private:
  std::vector<std::string> roles_;
};

// Builds an inventory covering every role in the dataset: standard roles
// first, any extras appended in sorted order.
LabelInventory inventory_for(const Dataset& data);

struct TagSequence {
  std::vector<int> tags;

  friend bool operator==(const TagSequence& a, const TagSequence& b) {
    return a.tags == b.tags;
  }
};

// Argument span over the flattened word sequence of a context window.
struct FlatSpan {
  int start = 0;  // inclusive
  int end = 0;    // inclusive
  int role = 0;

  friend bool operator==(const FlatSpan& a, const FlatSpan& b) {
    return a.start == b.start && a.end == b.end && a.role == b.role;
  }
  friend bool operator<(const FlatSpan& a, const FlatSpan& b) {
    if (a.start != b.start) return a.start < b.start;
    if (a.end != b.end) return a.end < b.end;
    return a.role < b.role;
  }
};

// (predicate, argument, role) triple used for scoring.
struct SemanticTuple {
  Span predicate;
  Span argument;
  std::string role;

  friend bool operator==(const SemanticTuple& a, const SemanticTuple& b) {
    return a.predicate == b.predicate && a.argument == b.argument &&
           a.role == b.role;
  }
  friend bool operator<(const SemanticTuple& a, const SemanticTuple& b) {
    if (!(a.predicate == b.predicate)) return a.predicate < b.predicate;
    if (!(a.argument == b.argument)) return a.argument < b.argument;
    return a.role < b.role;
  }
};

struct DatasetStats {
  std::size_t dialogues = 0;
  std::size_t utterances = 0;
  std::size_t tokens = 0;
  std::size_t predicates = 0;
  std::size_t arguments = 0;
  std::size_t cross_arguments = 0;  // argument utterance != predicate utterance

  double tokens_per_utterance() const {
    return utterances == 0 ? 0.0
                           : static_cast<double>(tokens) /
                                 static_cast<double>(utterances);
  }
  double cross_ratio() const {
    return arguments == 0 ? 0.0
                          : static_cast<double>(cross_arguments) /
                                static_cast<double>(arguments);
  }
};

// Loaders. All throw DataError on unreadable files or schema violations.
Dataset load_dialogues(const std::string& path);
ParallelCorpus load_parallel(const std::string& path);
// Single-utterance SRL data: {"tokens", "predicate", "arguments"}.
Dataset load_srl(const std::string& path);

DatasetStats compute_stats(const Dataset& data);

// Number of words in utterances [first_utt, last_utt] of a dialogue.
int flat_length(const Dialogue& d, int first_utt, int last_utt);

// Tags the flattened words of utterances [first_utt, frame.predicate.utt].
// Arguments before first_utt are dropped (the window truncated them away);
// overlapping spans inside the window are an error.
TagSequence bio_encode(const Frame& frame, const Dialogue& dialogue,
                       const LabelInventory& inv, int first_utt = 0);

// Recovers spans from a tag sequence. Never fails: an I-x that does not
// continue a same-role span is repaired to B-x.
std::vector<FlatSpan> bio_decode(const TagSequence& tags,
                                 const LabelInventory& inv);

// Renders disjoint spans as tags; overlap is an error.
TagSequence tags_from_spans(const std::vector<FlatSpan>& spans, int length,
                            const LabelInventory& inv);

}  // namespace csrl::corpus
