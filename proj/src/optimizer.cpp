#include "gcnbert/optimizer.hpp"

#include <cmath>

namespace gcnbert {

AdamState::AdamState(AdamOptions opts, std::span<const Parameter* const> params) : options(opts) {
    for (const Parameter* p : params) {
        first_moment.emplace_back(p->value.shape());
        second_moment.emplace_back(p->value.shape());
    }
}

void adam_step(std::span<Parameter* const> params, std::span<const Tensor> grads, AdamState& state) {
    if (grads.size() != params.size() || state.first_moment.size() != params.size()) {
        throw ShapeError("adam_step: parameter, gradient and moment counts differ");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (grads[i].shape() != params[i]->value.shape()) {
            throw ShapeError("adam_step: gradient for " + params[i]->name + " has shape " +
                             shape_to_string(grads[i].shape()) + ", expected " +
                             shape_to_string(params[i]->value.shape()));
        }
        if (!grads[i].all_finite()) throw NumericError("non-finite gradient for parameter " + params[i]->name);
    }

    const AdamOptions& o = state.options;
    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(o.beta1, t);
    const double correction2 = 1.0 - std::pow(o.beta2, t);
    const double decay = o.learning_rate * o.weight_decay;

    for (std::size_t i = 0; i < params.size(); ++i) {
        auto p = params[i]->value.data();
        const auto g = grads[i].data();
        auto m = state.first_moment[i].data();
        auto v = state.second_moment[i].data();
        for (std::size_t j = 0; j < p.size(); ++j) {
            double value = static_cast<double>(p[j]);
            value -= decay * value;
            const double gj = static_cast<double>(g[j]);
            const double mj = o.beta1 * static_cast<double>(m[j]) + (1.0 - o.beta1) * gj;
            const double vj = o.beta2 * static_cast<double>(v[j]) + (1.0 - o.beta2) * gj * gj;
            m[j] = static_cast<Real>(mj);
            v[j] = static_cast<Real>(vj);
            const double m_hat = mj / correction1;
            const double v_hat = vj / correction2;
            value -= o.learning_rate * m_hat / (std::sqrt(v_hat) + o.epsilon);
            p[j] = static_cast<Real>(value);
        }
    }
}

double clip_global_norm(std::span<Tensor> grads, double max_norm) {
    double sq = 0.0;
    for (const Tensor& g : grads)
        for (Real v : g.data()) sq += static_cast<double>(v) * static_cast<double>(v);
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        const Real factor = static_cast<Real>(max_norm / norm);
        for (Tensor& g : grads)
            for (Real& v : g.storage()) v *= factor;
    }
    return norm;
}

}  // namespace gcnbert
