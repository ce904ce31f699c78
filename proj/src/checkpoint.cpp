#include "csrl/checkpoint.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include "json.hpp"

namespace csrl {

using nlohmann::json;
using nn::Mat;
using nn::Parameter;

namespace {

constexpr char kMagic[8] = {'X', 'C', 'R', 'L', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint64_t kFnvBasis = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

struct Fnv {
  std::uint64_t h = kFnvBasis;
  void feed(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= kFnvPrime;
    }
  }
  template <typename T>
  void feed_pod(const T& v) {
    feed(&v, sizeof(v));
  }
};

// Canonical parameter serialization: name, shape, then values row-major.
void feed_entry(Fnv& f, const std::string& name, const Mat& value) {
  std::uint32_t len = static_cast<std::uint32_t>(name.size());
  f.feed_pod(len);
  f.feed(name.data(), name.size());
  std::uint32_t rows = static_cast<std::uint32_t>(value.rows());
  std::uint32_t cols = static_cast<std::uint32_t>(value.cols());
  f.feed_pod(rows);
  f.feed_pod(cols);
  for (Eigen::Index r = 0; r < value.rows(); ++r)
    for (Eigen::Index c = 0; c < value.cols(); ++c) f.feed_pod(value(r, c));
}

std::uint64_t digest_entries(const std::vector<Checkpoint::Entry>& entries) {
  Fnv f;
  for (const auto& e : entries) feed_entry(f, e.name, e.value);
  return f.h;
}

json config_to_json(const ModelConfig& c) {
  return json{{"vocab_size", c.vocab_size},
              {"backbone_layers", c.backbone_layers},
              {"backbone_width", c.backbone_width},
              {"backbone_heads", c.backbone_heads},
              {"backbone_ffn", c.backbone_ffn},
              {"max_seq_len", c.max_seq_len},
              {"model_width", c.model_width},
              {"word_layers", c.word_layers},
              {"pa_layers", c.pa_layers},
              {"variant", to_string(c.variant)},
              {"heads", c.heads},
              {"ffn_width", c.ffn_width},
              {"turn_width", c.turn_width},
              {"speaker_width", c.speaker_width},
              {"predicate_width", c.predicate_width},
              {"max_turns", c.max_turns},
              {"max_speakers", c.max_speakers},
              {"utterance_layers", c.utterance_layers},
              {"dropout", c.dropout},
              {"project_before_norm", c.project_before_norm},
              {"pooling", to_string(c.pooling)},
              {"roles", c.roles}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  try {
    c.vocab_size = j.at("vocab_size").get<int>();
    c.backbone_layers = j.at("backbone_layers").get<int>();
    c.backbone_width = j.at("backbone_width").get<int>();
    c.backbone_heads = j.at("backbone_heads").get<int>();
    c.backbone_ffn = j.at("backbone_ffn").get<int>();
    c.max_seq_len = j.at("max_seq_len").get<int>();
    c.model_width = j.at("model_width").get<int>();
    c.word_layers = j.at("word_layers").get<int>();
    c.pa_layers = j.at("pa_layers").get<int>();
    c.variant = mtrans_variant_from_string(j.at("variant").get<std::string>());
    c.heads = j.at("heads").get<int>();
    c.ffn_width = j.at("ffn_width").get<int>();
    c.turn_width = j.at("turn_width").get<int>();
    c.speaker_width = j.at("speaker_width").get<int>();
    c.predicate_width = j.at("predicate_width").get<int>();
    c.max_turns = j.at("max_turns").get<int>();
    c.max_speakers = j.at("max_speakers").get<int>();
    c.utterance_layers = j.at("utterance_layers").get<int>();
    c.dropout = j.at("dropout").get<double>();
    c.project_before_norm = j.at("project_before_norm").get<bool>();
    c.pooling = word_pooling_from_string(j.at("pooling").get<std::string>());
    c.roles = j.at("roles").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("bad checkpoint metadata: ") + e.what());
  }
  return c;
}

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T read_pod(std::istream& in) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw CheckpointError("truncated checkpoint");
  return v;
}

void write_string(std::ostream& out, const std::string& s) {
  write_pod(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
  auto len = read_pod<std::uint32_t>(in);
  if (len > (1u << 24)) throw CheckpointError("corrupt checkpoint string");
  std::string s(len, '\0');
  in.read(s.data(), len);
  if (!in) throw CheckpointError("truncated checkpoint");
  return s;
}

}  // namespace

std::uint64_t digest_params(const std::vector<const Parameter*>& params) {
  Fnv f;
  for (const Parameter* p : params) feed_entry(f, p->name, p->value);
  return f.h;
}

bool Checkpoint::has_stage(const std::string& s) const {
  return std::find(stages.begin(), stages.end(), s) != stages.end();
}

const Checkpoint::Block& Checkpoint::block(const std::string& tag) const {
  for (const auto& b : blocks)
    if (b.tag == tag) return b;
  throw CheckpointError("checkpoint has no block " + tag);
}

std::uint64_t Checkpoint::block_digest(const std::string& tag) const {
  return digest_entries(block(tag).entries);
}

Checkpoint Checkpoint::from_model(CsrlModel& model,
                                  std::vector<std::string> stages) {
  Checkpoint ck;
  ck.config = model.config();
  ck.stages = std::move(stages);
  for (const std::string& tag : block_tags()) {
    Block b;
    b.tag = tag;
    for (const Parameter* p : model.block(tag))
      b.entries.push_back({p->name, p->value});
    ck.blocks.push_back(std::move(b));
  }
  return ck;
}

void Checkpoint::load_into(CsrlModel& model) const {
  std::size_t copied = 0;
  for (const auto& b : blocks)
    for (const auto& e : b.entries) {
      Parameter* p = model.params().find(e.name);
      if (!p) throw CheckpointError("model has no parameter " + e.name);
      if (p->value.rows() != e.value.rows() ||
          p->value.cols() != e.value.cols())
        throw CheckpointError("shape mismatch for parameter " + e.name);
      p->value = e.value;
      ++copied;
    }
  if (copied != model.params().all().size())
    throw CheckpointError("checkpoint does not cover the whole model");
}

void Checkpoint::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write " + path);
  out.write(kMagic, sizeof(kMagic));
  write_pod(out, kVersion);
  json meta{{"config", config_to_json(config)}, {"stages", stages}};
  write_string(out, meta.dump());
  write_pod(out, static_cast<std::uint32_t>(blocks.size()));
  for (const auto& b : blocks) {
    write_string(out, b.tag);
    write_pod(out, digest_entries(b.entries));
    write_pod(out, static_cast<std::uint32_t>(b.entries.size()));
    for (const auto& e : b.entries) {
      write_string(out, e.name);
      write_pod(out, static_cast<std::uint32_t>(e.value.rows()));
      write_pod(out, static_cast<std::uint32_t>(e.value.cols()));
      for (Eigen::Index r = 0; r < e.value.rows(); ++r)
        for (Eigen::Index c = 0; c < e.value.cols(); ++c)
          write_pod(out, e.value(r, c));
    }
  }
  if (!out) throw CheckpointError("failed writing " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw CheckpointError(path + " is not a checkpoint");
  if (read_pod<std::uint32_t>(in) != kVersion)
    throw CheckpointError("unsupported checkpoint version");

  json meta = json::parse(read_string(in), nullptr, false);
  if (meta.is_discarded())
    throw CheckpointError("bad checkpoint metadata: invalid JSON");
  Checkpoint ck;
  ck.config = config_from_json(meta.at("config"));
  try {
    ck.stages = meta.at("stages").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("bad checkpoint metadata: ") + e.what());
  }

  auto n_blocks = read_pod<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < n_blocks; ++i) {
    Block b;
    b.tag = read_string(in);
    auto stored_digest = read_pod<std::uint64_t>(in);
    auto n_entries = read_pod<std::uint32_t>(in);
    for (std::uint32_t k = 0; k < n_entries; ++k) {
      Entry e;
      e.name = read_string(in);
      auto rows = read_pod<std::uint32_t>(in);
      auto cols = read_pod<std::uint32_t>(in);
      if (rows == 0 || cols == 0 || rows > (1u << 24) || cols > (1u << 24))
        throw CheckpointError("corrupt parameter shape in " + path);
      e.value.resize(rows, cols);
      for (std::uint32_t r = 0; r < rows; ++r)
        for (std::uint32_t c = 0; c < cols; ++c)
          e.value(r, c) = read_pod<double>(in);
      b.entries.push_back(std::move(e));
    }
    if (digest_entries(b.entries) != stored_digest)
      throw CheckpointError("digest mismatch in block " + b.tag +
                            "; checkpoint is corrupt");
    ck.blocks.push_back(std::move(b));
  }
  return ck;
}

}  // namespace csrl
