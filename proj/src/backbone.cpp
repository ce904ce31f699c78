#include "csrl/backbone.hpp"

#include <cstdint>

#include "csrl/nn/rng.hpp"

namespace csrl {

using corpus::DataError;
using corpus::Dialogue;
using corpus::Frame;
using nn::Expr;
using nn::Init;
using nn::Tape;

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

Tokenizer::Tokenizer(int vocab_size) : vocab_(vocab_size) {
  if (vocab_ <= kContentFloor + 1)
    throw ConfigError("vocab_size too small for reserved ids");
}

int Tokenizer::word_id(const std::string& word) const {
  const std::uint64_t span = static_cast<std::uint64_t>(vocab_ - kContentFloor);
  return kContentFloor + static_cast<int>(fnv1a(word) % span);
}

std::vector<int> Tokenizer::encode_words(
    const std::vector<std::string>& words) const {
  std::vector<int> out;
  out.reserve(words.size());
  for (const auto& w : words) out.push_back(word_id(w));
  return out;
}

int Tokenizer::random_content_id(std::mt19937_64& rng) const {
  return kContentFloor +
         static_cast<int>(nn::rand_index(
             rng, static_cast<std::size_t>(vocab_ - kContentFloor)));
}

std::vector<int> speaker_id_map(const Dialogue& d) {
  std::vector<std::string> seen;
  std::vector<int> ids;
  ids.reserve(d.utterances.size());
  for (const auto& u : d.utterances) {
    int id = -1;
    for (std::size_t i = 0; i < seen.size(); ++i)
      if (seen[i] == u.speaker) id = static_cast<int>(i);
    if (id < 0) {
      id = static_cast<int>(seen.size());
      seen.push_back(u.speaker);
    }
    ids.push_back(id);
  }
  return ids;
}

TokenizedContext tokenize_context(const Dialogue& dialogue, const Frame* frame,
                                  int max_len, const Tokenizer& tokenizer) {
  if (dialogue.utterances.empty()) throw DataError("dialogue has no utterances");
  const int n_utts = static_cast<int>(dialogue.utterances.size());
  int last = frame ? frame->predicate.utt : n_utts - 1;
  if (last < 0 || last >= n_utts)
    throw DataError("predicate utterance out of range");

  // Keep the longest suffix of utterances [first, last] whose serialized
  // length (words plus separators between utterances) fits.
  auto subtoken_len = [&](int first) {
    int n = last - first;  // separators
    for (int u = first; u <= last; ++u)
      n += static_cast<int>(dialogue.utterances[u].tokens.size());
    return n;
  };
  int first = 0;
  while (first < last && subtoken_len(first) > max_len) ++first;
  if (subtoken_len(first) > max_len)
    throw DataError("utterance " + std::to_string(last) + " of dialogue " +
                    dialogue.id + " exceeds the sequence length limit");

  const std::vector<int> speaker_of_utt = speaker_id_map(dialogue);

  TokenizedContext ctx;
  ctx.first_utt = first;
  ctx.last_utt = last;
  for (int u = first; u <= last; ++u) {
    if (u > first) {
      ctx.subtokens.push_back(Tokenizer::kSep);
      ctx.word_of_subtoken.push_back(-1);
    }
    const auto& ut = dialogue.utterances[u];
    const int word_begin = ctx.word_count();
    for (int k = 0; k < static_cast<int>(ut.tokens.size()); ++k) {
      const int word = ctx.word_count();
      const int sub = static_cast<int>(ctx.subtokens.size());
      ctx.subtokens.push_back(tokenizer.word_id(ut.tokens[k]));
      ctx.word_of_subtoken.push_back(word);
      ctx.word_segments.emplace_back(sub, sub + 1);
      ctx.speaker_ids.push_back(speaker_of_utt[u]);
      ctx.turn_ids.push_back(u - first);
      ctx.predicate_flags.push_back(0);
      ctx.utt_of_word.push_back(u - first);
      ctx.orig_utt_of_word.push_back(u);
      ctx.orig_tok_of_word.push_back(k);
    }
    ctx.utterance_bounds.emplace_back(word_begin, ctx.word_count());
  }
  if (frame) {
    const auto& p = frame->predicate;
    if (p.utt >= first) {
      const int base = ctx.utterance_bounds[p.utt - first].first;
      for (int k = p.start; k <= p.end; ++k) ctx.predicate_flags[base + k] = 1;
    }
  }
  return ctx;
}

Backbone::Backbone(nn::ParamStore& store, const ModelConfig& cfg,
                   std::mt19937_64& rng)
    : h_(cfg.backbone_width),
      max_seq_len_(cfg.max_seq_len),
      pooling_(cfg.pooling) {
  token_table_ =
      &store.create("backbone.tokens", cfg.vocab_size, h_, Init::kXavier, rng);
  pos_table_ =
      &store.create("backbone.positions", cfg.max_seq_len, h_, Init::kXavier,
                    rng);
  for (int l = 0; l < cfg.backbone_layers; ++l)
    layers_.push_back(std::make_unique<MTransLayer>(
        store, "backbone.layer" + std::to_string(l), h_, h_,
        cfg.backbone_heads, cfg.backbone_ffn, MTransVariant::kStandard,
        /*project_before_norm=*/false, rng));
}

std::vector<Expr> Backbone::forward_layers(Tape& t,
                                           const std::vector<int>& subtokens,
                                           double dropout) const {
  if (subtokens.empty()) throw DataError("empty input sequence");
  if (static_cast<int>(subtokens.size()) > max_seq_len_)
    throw DataError("input sequence exceeds max_seq_len");
  std::vector<int> positions(subtokens.size());
  for (std::size_t i = 0; i < subtokens.size(); ++i)
    positions[i] = static_cast<int>(i);
  Expr x = t.add(t.gather_rows(t.param(*token_table_), subtokens),
                 t.gather_rows(t.param(*pos_table_), positions));
  x = t.dropout(x, dropout);
  std::vector<Expr> states;
  states.reserve(layers_.size());
  for (const auto& layer : layers_) {
    x = layer->forward(t, x, dropout);
    states.push_back(x);
  }
  return states;
}

Expr Backbone::final_hidden(Tape& t, const std::vector<int>& subtokens,
                            double dropout) const {
  return forward_layers(t, subtokens, dropout).back();
}

Expr Backbone::encode(Tape& t, const TokenizedContext& ctx,
                      double dropout) const {
  std::vector<Expr> states = forward_layers(t, ctx.subtokens, dropout);
  // Concatenate the four topmost layers feature-wise.
  std::vector<Expr> top(states.end() - 4, states.end());
  Expr cat = t.concat_cols(top);
  if (ctx.word_count() == 0) throw DataError("context window has no words");
  if (pooling_ == WordPooling::kFirstSubtoken) {
    std::vector<int> first;
    first.reserve(ctx.word_segments.size());
    for (const auto& [b, e] : ctx.word_segments) first.push_back(b);
    return t.gather_rows(cat, first);
  }
  return t.segment_mean_rows(cat, ctx.word_segments);
}

}  // namespace csrl
