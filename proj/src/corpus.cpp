#include "csrl/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "csrl/config.hpp"
#include "json.hpp"

namespace csrl::corpus {
namespace {

using nlohmann::json;

std::string where(const std::string& path, std::size_t line) {
  return path + ":" + std::to_string(line);
}

json parse_line(const std::string& text, const std::string& path,
                std::size_t line) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded())
    throw DataError(where(path, line) + ": invalid JSON");
  if (!j.is_object())
    throw DataError(where(path, line) + ": expected a JSON object");
  return j;
}

const json& field(const json& j, const char* key, const std::string& ctx) {
  auto it = j.find(key);
  if (it == j.end()) throw DataError(ctx + ": missing field '" + key + "'");
  return *it;
}

int int_field(const json& j, const char* key, const std::string& ctx) {
  const json& v = field(j, key, ctx);
  if (!v.is_number_integer())
    throw DataError(ctx + ": field '" + key + "' must be an integer");
  return v.get<int>();
}

std::string string_field(const json& j, const char* key,
                         const std::string& ctx) {
  const json& v = field(j, key, ctx);
  if (!v.is_string())
    throw DataError(ctx + ": field '" + key + "' must be a string");
  return v.get<std::string>();
}

std::vector<std::string> token_list(const json& v, const std::string& ctx) {
  if (!v.is_array() || v.empty())
    throw DataError(ctx + ": 'tokens' must be a non-empty array");
  std::vector<std::string> out;
  out.reserve(v.size());
  for (const auto& t : v) {
    if (!t.is_string() || t.get<std::string>().empty())
      throw DataError(ctx + ": tokens must be non-empty strings");
    out.push_back(t.get<std::string>());
  }
  return out;
}

Span span_field(const json& j, const std::string& ctx, bool with_utt) {
  Span s;
  s.utt = with_utt ? int_field(j, "utt", ctx) : 0;
  s.start = int_field(j, "start", ctx);
  s.end = int_field(j, "end", ctx);
  return s;
}

void check_span(const Span& s, const Dialogue& d, const std::string& ctx) {
  if (s.utt < 0 || s.utt >= static_cast<int>(d.utterances.size()))
    throw DataError(ctx + ": span utterance index out of range");
  int n = static_cast<int>(d.utterances[s.utt].tokens.size());
  if (s.start < 0 || s.end < s.start || s.end >= n)
    throw DataError(ctx + ": span token range out of bounds");
}

// Frame-level invariants shared by the dialogue and SRL loaders: no
// argument may sit in an utterance after the predicate's, and argument
// spans must not overlap each other.
void check_frame(const Frame& f, const std::string& ctx) {
  for (const auto& arg : f.arguments)
    if (arg.span.utt > f.predicate.utt)
      throw DataError(ctx + ": argument in utterance " +
                      std::to_string(arg.span.utt) +
                      " lies after the predicate's utterance " +
                      std::to_string(f.predicate.utt));
  std::vector<Span> spans;
  for (const auto& arg : f.arguments) spans.push_back(arg.span);
  std::sort(spans.begin(), spans.end());
  for (std::size_t i = 1; i < spans.size(); ++i)
    if (spans[i].utt == spans[i - 1].utt &&
        spans[i].start <= spans[i - 1].end)
      throw DataError(ctx + ": overlapping argument spans");
}

Frame parse_frame(const json& j, const Dialogue& d, const std::string& ctx) {
  Frame f;
  f.predicate = span_field(field(j, "predicate", ctx), ctx + " predicate",
                           /*with_utt=*/true);
  check_span(f.predicate, d, ctx + " predicate");
  const json& args = field(j, "arguments", ctx);
  if (!args.is_array())
    throw DataError(ctx + ": 'arguments' must be an array");
  for (const auto& a : args) {
    Argument arg;
    arg.span = span_field(a, ctx + " argument", /*with_utt=*/true);
    check_span(arg.span, d, ctx + " argument");
    arg.role = string_field(a, "role", ctx + " argument");
    if (arg.role.empty())
      throw DataError(ctx + ": argument role must be non-empty");
    f.arguments.push_back(std::move(arg));
  }
  check_frame(f, ctx);
  return f;
}

void check_dialogue(const Dialogue& d, const std::string& ctx) {
  if (d.id.empty()) throw DataError(ctx + ": dialogue id must be non-empty");
  if (d.utterances.empty())
    throw DataError(ctx + ": dialogue has no utterances");
  int prev_turn = 0;
  for (const auto& u : d.utterances) {
    if (u.speaker.empty())
      throw DataError(ctx + ": utterance speaker must be non-empty");
    if (u.turn <= prev_turn)
      throw DataError(ctx + ": turn indices must be strictly increasing");
    prev_turn = u.turn;
  }
}

std::vector<std::string> split_whitespace(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

}  // namespace

LabelInventory::LabelInventory() : roles_(standard_roles()) {}

LabelInventory::LabelInventory(std::vector<std::string> roles)
    : roles_(std::move(roles)) {
  if (roles_.empty()) throw DataError("label inventory must not be empty");
  std::set<std::string> seen;
  for (const auto& r : roles_) {
    if (r.empty()) throw DataError("label inventory role must be non-empty");
    if (!seen.insert(r).second)
      throw DataError("duplicate role in label inventory: " + r);
  }
}

int LabelInventory::role_id(const std::string& role) const {
  for (std::size_t i = 0; i < roles_.size(); ++i)
    if (roles_[i] == role) return static_cast<int>(i);
  return -1;
}

int LabelInventory::role_of_tag(int tag) const {
  if (tag <= 0 || tag >= tag_count())
    throw DataError("tag id out of range: " + std::to_string(tag));
  return (tag - 1) / 2;
}

std::string LabelInventory::tag_name(int tag) const {
  if (tag == kOutside) return "O";
  int role = role_of_tag(tag);
  return (is_begin(tag) ? "B-" : "I-") + roles_[role];
}

LabelInventory inventory_for(const Dataset& data) {
  std::set<std::string> extra;
  LabelInventory standard;
  for (const auto& sample : data)
    for (const auto& frame : sample.frames)
      for (const auto& arg : frame.arguments)
        if (standard.role_id(arg.role) < 0) extra.insert(arg.role);
  std::vector<std::string> roles = standard.roles();
  roles.insert(roles.end(), extra.begin(), extra.end());
  return LabelInventory(std::move(roles));
}

Dataset load_dialogues(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  Dataset data;
  std::string text;
  std::size_t line = 0;
  std::set<std::string> ids;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string ctx = where(path, line);
    json j = parse_line(text, path, line);
    DialogueSample sample;
    sample.dialogue.id = string_field(j, "id", ctx);
    sample.dialogue.language = string_field(j, "language", ctx);
    const json& utts = field(j, "utterances", ctx);
    if (!utts.is_array())
      throw DataError(ctx + ": 'utterances' must be an array");
    for (const auto& u : utts) {
      Utterance ut;
      ut.speaker = string_field(u, "speaker", ctx);
      ut.turn = int_field(u, "turn", ctx);
      ut.tokens = token_list(field(u, "tokens", ctx), ctx);
      sample.dialogue.utterances.push_back(std::move(ut));
    }
    check_dialogue(sample.dialogue, ctx);
    if (!ids.insert(sample.dialogue.id).second)
      throw DataError(ctx + ": duplicate dialogue id " + sample.dialogue.id);
    if (auto it = j.find("frames"); it != j.end()) {
      if (!it->is_array()) throw DataError(ctx + ": 'frames' must be an array");
      for (std::size_t k = 0; k < it->size(); ++k)
        sample.frames.push_back(parse_frame(
            (*it)[k], sample.dialogue,
            ctx + " frame " + std::to_string(k)));
    }
    data.push_back(std::move(sample));
  }
  return data;
}

ParallelCorpus load_parallel(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  ParallelCorpus pairs;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.find_first_not_of(" \t") == std::string::npos) continue;
    auto tab = text.find('\t');
    if (tab == std::string::npos)
      throw DataError(where(path, line) + ": expected tab-separated pair");
    SentencePair pair;
    pair.source = split_whitespace(text.substr(0, tab));
    pair.target = split_whitespace(text.substr(tab + 1));
    if (pair.source.empty() || pair.target.empty())
      throw DataError(where(path, line) + ": both sides must be non-empty");
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

Dataset load_srl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  Dataset data;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string ctx = where(path, line);
    json j = parse_line(text, path, line);
    DialogueSample sample;
    sample.dialogue.id = j.contains("id") ? string_field(j, "id", ctx)
                                          : "srl-" + std::to_string(line);
    sample.dialogue.language =
        j.contains("language") ? string_field(j, "language", ctx) : "und";
    Utterance ut;
    ut.speaker = "S1";
    ut.turn = 1;
    ut.tokens = token_list(field(j, "tokens", ctx), ctx);
    sample.dialogue.utterances.push_back(std::move(ut));
    check_dialogue(sample.dialogue, ctx);

    Frame f;
    f.predicate = span_field(field(j, "predicate", ctx), ctx + " predicate",
                             /*with_utt=*/false);
    check_span(f.predicate, sample.dialogue, ctx + " predicate");
    const json& args = field(j, "arguments", ctx);
    if (!args.is_array())
      throw DataError(ctx + ": 'arguments' must be an array");
    const LabelInventory standard;  // only shared roles survive the load
    for (const auto& a : args) {
      Argument arg;
      arg.span = span_field(a, ctx + " argument", /*with_utt=*/false);
      check_span(arg.span, sample.dialogue, ctx + " argument");
      arg.role = string_field(a, "role", ctx + " argument");
      if (arg.role.empty())
        throw DataError(ctx + ": argument role must be non-empty");
      if (standard.role_id(arg.role) < 0) continue;
      f.arguments.push_back(std::move(arg));
    }
    check_frame(f, ctx);
    sample.frames.push_back(std::move(f));
    data.push_back(std::move(sample));
  }
  return data;
}

DatasetStats compute_stats(const Dataset& data) {
  DatasetStats st;
  st.dialogues = data.size();
  for (const auto& sample : data) {
    st.utterances += sample.dialogue.utterances.size();
    for (const auto& u : sample.dialogue.utterances)
      st.tokens += u.tokens.size();
    st.predicates += sample.frames.size();
    for (const auto& f : sample.frames)
      for (const auto& a : f.arguments) {
        ++st.arguments;
        if (a.span.utt != f.predicate.utt) ++st.cross_arguments;
      }
  }
  return st;
}

int flat_length(const Dialogue& d, int first_utt, int last_utt) {
  if (first_utt < 0 || last_utt >= static_cast<int>(d.utterances.size()) ||
      first_utt > last_utt)
    throw DataError("utterance window out of range");
  int n = 0;
  for (int u = first_utt; u <= last_utt; ++u)
    n += static_cast<int>(d.utterances[u].tokens.size());
  return n;
}

TagSequence bio_encode(const Frame& frame, const Dialogue& dialogue,
                       const LabelInventory& inv, int first_utt) {
  const int last_utt = frame.predicate.utt;
  const int length = flat_length(dialogue, first_utt, last_utt);

  // Word offset of each window utterance in the flattened sequence.
  std::vector<int> offset(static_cast<std::size_t>(last_utt - first_utt + 1));
  int acc = 0;
  for (int u = first_utt; u <= last_utt; ++u) {
    offset[u - first_utt] = acc;
    acc += static_cast<int>(dialogue.utterances[u].tokens.size());
  }

  std::vector<FlatSpan> spans;
  for (const auto& arg : frame.arguments) {
    if (arg.span.utt < first_utt || arg.span.utt > last_utt) continue;
    int role = inv.role_id(arg.role);
    if (role < 0) throw DataError("role not in label inventory: " + arg.role);
    int base = offset[arg.span.utt - first_utt];
    spans.push_back({base + arg.span.start, base + arg.span.end, role});
  }
  return tags_from_spans(spans, length, inv);
}

TagSequence tags_from_spans(const std::vector<FlatSpan>& spans, int length,
                            const LabelInventory& inv) {
  TagSequence seq;
  seq.tags.assign(static_cast<std::size_t>(length), LabelInventory::kOutside);
  for (const auto& s : spans) {
    if (s.start < 0 || s.end < s.start || s.end >= length)
      throw DataError("span out of bounds");
    if (s.role < 0 || s.role >= inv.role_count())
      throw DataError("span role out of range");
    for (int i = s.start; i <= s.end; ++i)
      if (seq.tags[i] != LabelInventory::kOutside)
        throw DataError("overlapping argument spans");
    seq.tags[s.start] = inv.begin_tag(s.role);
    for (int i = s.start + 1; i <= s.end; ++i)
      seq.tags[i] = inv.inside_tag(s.role);
  }
  return seq;
}

std::vector<FlatSpan> bio_decode(const TagSequence& tags,
                                 const LabelInventory& inv) {
  std::vector<FlatSpan> spans;
  int open_role = -1;  // role of the span currently being extended
  int open_start = 0;
  auto close = [&](int end) {
    if (open_role >= 0) spans.push_back({open_start, end, open_role});
    open_role = -1;
  };
  for (int i = 0; i < static_cast<int>(tags.tags.size()); ++i) {
    int tag = tags.tags[i];
    if (tag == LabelInventory::kOutside) {
      close(i - 1);
      continue;
    }
    int role = inv.role_of_tag(tag);
    if (inv.is_begin(tag) || role != open_role) {
      // B-x, or an I-x with no live same-role span: both start a new span.
      close(i - 1);
      open_role = role;
      open_start = i;
    }
  }
  close(static_cast<int>(tags.tags.size()) - 1);
  return spans;
}

}  // namespace csrl::corpus
