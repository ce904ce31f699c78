#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "csrl/config.hpp"
#include "csrl/model.hpp"
#include "csrl/nn/tape.hpp"

namespace csrl {

// Unusable, corrupt, or incompatible checkpoints.
class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Pre-training stages started out of order.
class StageOrderError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// FNV-1a over the canonical serialization of the given parameters; the
// value for no parameters is the FNV offset basis. Used both for checkpoint
// integrity and for asserting that frozen blocks stayed byte-identical.
std::uint64_t digest_params(const std::vector<const nn::Parameter*>& params);

struct Checkpoint {
  ModelConfig config;
  std::vector<std::string> stages;  // completed pre-training stages

  struct Entry {
    std::string name;
    nn::Mat value;
  };
  struct Block {
    std::string tag;
    std::vector<Entry> entries;
  };
  std::vector<Block> blocks;  // one per block tag, in block_tags() order

  bool has_stage(const std::string& s) const;
  const Block& block(const std::string& tag) const;
  std::uint64_t block_digest(const std::string& tag) const;

  static Checkpoint from_model(CsrlModel& model,
                               std::vector<std::string> stages);
  // Copies values into an identically shaped model; any name or shape
  // mismatch is an error.
  void load_into(CsrlModel& model) const;

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);
};

}  // namespace csrl
