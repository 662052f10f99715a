#include "gcnbert/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace gcnbert {

Var fuse(Var u_hat, Var v_hat) {
    if (u_hat.shape().size() != 1 || u_hat.shape() != v_hat.shape()) {
        throw ShapeError("fuse: head outputs " + shape_to_string(u_hat.shape()) + " and " +
                         shape_to_string(v_hat.shape()) + " differ");
    }
    return add(u_hat, v_hat);
}

Var classification_loss(Var logits, std::size_t target) { return cross_entropy(logits, target); }

std::vector<double> softmax_probabilities(std::span<const Real> logits) {
    if (logits.empty()) return {};
    const double mx = static_cast<double>(*std::max_element(logits.begin(), logits.end()));
    std::vector<double> p(logits.size());
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(static_cast<double>(logits[i]) - mx);
        total += p[i];
    }
    for (double& v : p) v /= total;
    return p;
}

std::vector<std::size_t> rank_classes(std::span<const Real> logits) {
    std::vector<std::size_t> order(logits.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return logits[a] > logits[b]; });
    return order;
}

Prediction make_prediction(std::span<const Real> logits) {
    return {softmax_probabilities(logits), rank_classes(logits)};
}

std::vector<std::size_t> predict(std::span<const Real> logits, std::size_t k) {
    if (k < 1 || k > logits.size()) {
        throw std::out_of_range("predict: k=" + std::to_string(k) + " outside [1, " + std::to_string(logits.size()) +
                                "]");
    }
    auto order = rank_classes(logits);
    order.resize(k);
    return order;
}

}  // namespace gcnbert
