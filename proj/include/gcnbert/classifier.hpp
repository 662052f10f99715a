#pragma once

#include <span>
#include <vector>

#include "gcnbert/autodiff.hpp"

namespace gcnbert {

/// ŷ = Û + V̂.
Var fuse(Var u_hat, Var v_hat);

/// -log softmax(ŷ)[target], evaluated in log space.
Var classification_loss(Var logits, std::size_t target);

struct Prediction {
    std::vector<double> probabilities;
    // Gloss ids by descending score; equal scores keep ascending id order.
    std::vector<std::size_t> ranking;
};

std::vector<double> softmax_probabilities(std::span<const Real> logits);
std::vector<std::size_t> rank_classes(std::span<const Real> logits);
Prediction make_prediction(std::span<const Real> logits);

/// First k entries of the ranking; k must lie in [1, G].
std::vector<std::size_t> predict(std::span<const Real> logits, std::size_t k);

}  // namespace gcnbert
