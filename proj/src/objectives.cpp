#include "csrl/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "csrl/nn/rng.hpp"

namespace csrl::objectives {

using corpus::DataError;
using corpus::Dialogue;
using nn::rand_index;
using nn::rand_unit;

TlmExample tlm_corrupt(const corpus::SentencePair& pair,
                       const Tokenizer& tokenizer, double mask_rate,
                       std::mt19937_64& rng) {
  if (mask_rate <= 0.0 || mask_rate >= 1.0)
    throw DataError("mask rate must be in (0, 1)");
  TlmExample ex;
  ex.tokens = tokenizer.encode_words(pair.source);
  ex.tokens.push_back(Tokenizer::kSep);
  for (int id : tokenizer.encode_words(pair.target)) ex.tokens.push_back(id);

  for (std::size_t i = 0; i < ex.tokens.size(); ++i) {
    if (ex.tokens[i] == Tokenizer::kSep) continue;
    if (rand_unit(rng) >= mask_rate) continue;
    ex.positions.push_back(static_cast<int>(i));
    ex.targets.push_back(ex.tokens[i]);
    double r = rand_unit(rng);
    if (r < 0.8)
      ex.tokens[i] = Tokenizer::kMask;
    else if (r < 0.9)
      ex.tokens[i] = tokenizer.random_content_id(rng);
    // else: keep the original token, but still predict it.
  }
  return ex;
}

namespace {

std::set<std::string> ngram_set(const std::vector<std::string>& s, int n) {
  std::set<std::string> out;
  if (static_cast<int>(s.size()) < n) return out;
  for (std::size_t i = 0; i + n <= s.size(); ++i) {
    std::string key = s[i];
    for (int j = 1; j < n; ++j) key += '\x1f' + s[i + j];
    out.insert(std::move(key));
  }
  return out;
}

std::size_t intersection_size(const std::set<std::string>& a,
                              const std::set<std::string>& b) {
  std::size_t n = 0;
  const auto& small = a.size() <= b.size() ? a : b;
  const auto& big = a.size() <= b.size() ? b : a;
  for (const auto& k : small) n += big.count(k);
  return n;
}

}  // namespace

std::vector<std::vector<std::string>> ngram_hard_negatives(
    const std::vector<std::vector<std::string>>& pool,
    const std::vector<std::string>& sentence) {
  std::vector<std::vector<std::string>> out;
  for (int n = 1; n <= 4; ++n) {
    std::set<std::string> own = ngram_set(sentence, n);
    if (own.empty()) continue;
    double best = 0.0;
    int best_idx = -1;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (pool[i] == sentence) continue;
      double score =
          static_cast<double>(intersection_size(own, ngram_set(pool[i], n))) /
          static_cast<double>(own.size());
      if (score > best) {
        best = score;
        best_idx = static_cast<int>(i);
      }
    }
    if (best_idx >= 0) out.push_back(pool[best_idx]);
  }
  return out;
}

std::vector<std::string> perturb(const std::vector<std::string>& sentence,
                                 const std::vector<std::string>& vocab,
                                 std::mt19937_64& rng) {
  if (sentence.empty()) throw DataError("cannot perturb an empty sentence");

  auto replace = [&](std::vector<std::string> s) {
    std::size_t pos = rand_index(rng, s.size());
    const std::string old = s[pos];
    std::string repl;
    bool found = false;
    for (int attempt = 0; attempt < 32 && !vocab.empty(); ++attempt) {
      repl = vocab[rand_index(rng, vocab.size())];
      if (repl != old) {
        found = true;
        break;
      }
    }
    // Degenerate vocabulary: mutate the token so the sentence still changes.
    s[pos] = found ? repl : old + "'";
    return s;
  };

  // Single-token sentences can only change by replacement.
  int op = sentence.size() == 1 ? 1 : static_cast<int>(rand_index(rng, 3));
  switch (op) {
    case 0: {  // deletion
      std::vector<std::string> s = sentence;
      s.erase(s.begin() + static_cast<std::ptrdiff_t>(
                              rand_index(rng, s.size())));
      return s;
    }
    case 1:
      return replace(sentence);
    default: {  // permutation; must actually change the order
      for (int attempt = 0; attempt < 16; ++attempt) {
        std::vector<std::string> s = sentence;
        nn::shuffle(s, rng);
        if (s != sentence) return s;
      }
      // All tokens equal: no permutation differs, change a token instead.
      return replace(sentence);
    }
  }
}

HpsiSampler::HpsiSampler(const corpus::ParallelCorpus& corpus)
    : corpus_(&corpus) {
  if (corpus.empty()) throw DataError("parallel corpus is empty");
  std::set<std::string> seen;
  for (const auto& pair : corpus) {
    target_pool_.push_back(pair.target);
    for (const auto& tok : pair.target)
      if (seen.insert(tok).second) target_vocab_.push_back(tok);
  }
}

HpsiExample HpsiSampler::sample(std::mt19937_64& rng) const {
  const auto& pair = (*corpus_)[rand_index(rng, corpus_->size())];
  HpsiExample ex;
  ex.source = pair.source;
  if (rand_unit(rng) < 0.5) {
    ex.target = pair.target;
    ex.parallel = true;
    return ex;
  }
  ex.parallel = false;
  if (rand_unit(rng) < 0.4) {
    auto candidates = ngram_hard_negatives(target_pool_, pair.target);
    if (!candidates.empty()) {
      ex.target = candidates[rand_index(rng, candidates.size())];
      ex.negative_source = NegativeSource::kNgram;
      return ex;
    }
    ++fallbacks_;  // nothing overlaps; fall through to perturbation
  }
  ex.target = perturb(pair.target, target_vocab_, rng);
  ex.negative_source = NegativeSource::kPerturb;
  return ex;
}

namespace {

bool is_sentence_final(const std::string& tok) {
  static const std::set<std::string> kFinal = {".", "!",  "?",  "。",
                                               "！", "？", ";",  "；"};
  return kFinal.count(tok) > 0;
}

bool two_speakers_alternate(const Dialogue& d) {
  std::set<std::string> speakers;
  for (const auto& u : d.utterances) speakers.insert(u.speaker);
  if (speakers.size() != 2) return false;
  for (std::size_t i = 1; i < d.utterances.size(); ++i)
    if (d.utterances[i].speaker == d.utterances[i - 1].speaker) return false;
  return true;
}

}  // namespace

SpiExample spi_corrupt(const Dialogue& d, double k1_percent,
                       std::mt19937_64& rng) {
  if (k1_percent < 0.0 || k1_percent > 100.0)
    throw DataError("masking percentage out of range");
  const std::vector<int> speaker_ids = speaker_id_map(d);

  SpiExample ex;
  ex.clause_level = two_speakers_alternate(d);
  for (std::size_t u = 0; u < d.utterances.size(); ++u) {
    const auto& toks = d.utterances[u].tokens;
    if (ex.clause_level) {
      int begin = 0;
      for (int i = 0; i < static_cast<int>(toks.size()); ++i) {
        if (is_sentence_final(toks[i]) || i + 1 == static_cast<int>(toks.size())) {
          ex.units.push_back({static_cast<int>(u), begin, i});
          ex.unit_speaker.push_back(speaker_ids[u]);
          begin = i + 1;
        }
      }
    } else {
      ex.units.push_back(
          {static_cast<int>(u), 0, static_cast<int>(toks.size()) - 1});
      ex.unit_speaker.push_back(speaker_ids[u]);
    }
  }
  const std::size_t n_masked = static_cast<std::size_t>(
      std::ceil(k1_percent / 100.0 * static_cast<double>(ex.units.size())));
  ex.masked_units = nn::sample_without_replacement(rng, ex.units.size(),
                                                   std::min(n_masked,
                                                            ex.units.size()));
  std::sort(ex.masked_units.begin(), ex.masked_units.end());
  return ex;
}

UorExample uor_shuffle(const Dialogue& d, double k2_percent,
                       std::mt19937_64& rng) {
  if (k2_percent < 0.0 || k2_percent > 100.0)
    throw DataError("shuffling percentage out of range");
  const int n = static_cast<int>(d.utterances.size());
  int m = static_cast<int>(
      std::ceil(k2_percent / 100.0 * static_cast<double>(n)));
  m = std::min(m, n);

  UorExample ex;
  ex.suffix_begin = n - m;
  std::vector<int> order(m);
  for (int i = 0; i < m; ++i) order[i] = i;
  nn::shuffle(order, rng);

  ex.shuffled = d;
  for (int j = 0; j < m; ++j)
    ex.shuffled.utterances[ex.suffix_begin + j] =
        d.utterances[ex.suffix_begin + order[j]];
  // Renumber turns so the corruption is invisible in the indicator inputs.
  for (int i = 0; i < n; ++i) ex.shuffled.utterances[i].turn = i + 1;
  ex.original_offset = std::move(order);
  return ex;
}

SaiExample sai_build(const corpus::DialogueSample& srl,
                     const corpus::LabelInventory& inv) {
  if (srl.dialogue.utterances.size() != 1)
    throw DataError("sentence-level SRL sample must have one utterance");
  if (srl.frames.size() != 1)
    throw DataError("sentence-level SRL sample must have one frame");
  SaiExample ex;
  ex.sample = srl;
  ex.tags = corpus::bio_encode(srl.frames[0], srl.dialogue, inv);
  return ex;
}

std::vector<PoolDraw> balanced_batch(std::size_t pool_a, std::size_t pool_b,
                                     int batch_size, std::mt19937_64& rng) {
  if (batch_size <= 0) throw DataError("batch size must be positive");
  if (pool_a == 0 || pool_b == 0)
    throw DataError("balanced batch requires two non-empty pools");
  std::vector<PoolDraw> out;
  out.reserve(static_cast<std::size_t>(batch_size));
  for (int i = 0; i < batch_size; ++i) {
    PoolDraw draw;
    draw.pool = rand_unit(rng) < 0.5 ? 0 : 1;
    draw.index = rand_index(rng, draw.pool == 0 ? pool_a : pool_b);
    out.push_back(draw);
  }
  return out;
}

nn::Expr objective_loss(ObjectiveId id, nn::Tape& t, nn::Expr logits,
                        const std::vector<int>& rows,
                        const std::vector<int>& targets, int class_limit) {
  if (rows.empty()) {
    static const char* kNames[] = {"tlm", "hpsi", "spi", "uor", "sai"};
    throw DataError(std::string(kNames[static_cast<int>(id)]) +
                    ": example has no prediction targets");
  }
  return t.mean_cross_entropy(logits, rows, targets, class_limit);
}

}  // namespace csrl::objectives
