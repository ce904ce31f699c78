#pragma once

#include <vector>

#include "csrl/corpus.hpp"
#include "csrl/evaluator.hpp"
#include "csrl/model.hpp"

namespace csrl::infer {

// Highest-scoring tag per word, decoded without dropout.
corpus::TagSequence predict_tags(const CsrlModel& model,
                                 const TokenizedContext& ctx);

// Predicted (predicate, argument, role) tuples for one frame, in dialogue
// coordinates.
std::vector<corpus::SemanticTuple> predict_frame(const CsrlModel& model,
                                                 const corpus::Dialogue& d,
                                                 const corpus::Frame& frame);

// Copy of the dataset with every frame's arguments replaced by predictions.
corpus::Dataset predict_dataset(const CsrlModel& model,
                                const corpus::Dataset& data);

eval::ScoreReport evaluate_dataset(const CsrlModel& model,
                                   const corpus::Dataset& data);

}  // namespace csrl::infer
