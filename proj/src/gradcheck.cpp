#include "gcnbert/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gcnbert {

namespace {

double evaluate(const ScalarFunction& f) {
    Tape tape(false);
    const Var y = f(tape);
    if (y.value().size() != 1) throw ShapeError("grad_check: function must return a single element");
    return static_cast<double>(y.value()[0]);
}

}  // namespace

GradCheckResult grad_check(const ScalarFunction& f, std::span<Parameter* const> params, double epsilon,
                           Stencil stencil) {
    if (!(epsilon > 0.0 && epsilon <= 1e-2)) throw std::invalid_argument("grad_check: epsilon must lie in (0, 1e-2]");

    std::vector<Tensor> analytic;
    {
        Tape tape(true);
        const Var y = f(tape);
        tape.backward(y);
        for (const Parameter* p : params) {
            auto g = tape.gradient_of(*p);
            analytic.push_back(g ? std::move(*g) : Tensor(p->value.shape()));
        }
    }

    GradCheckResult result;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Parameter& p = *params[pi];
        double worst = 0.0;
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const Real saved = p.value[i];
            auto at = [&](double offset) {
                p.value[i] = saved + static_cast<Real>(offset);
                return evaluate(f);
            };
            double numeric = 0.0;
            try {
                if (stencil == Stencil::Central2) {
                    numeric = (at(epsilon) - at(-epsilon)) / (2.0 * epsilon);
                } else {
                    numeric = (8.0 * (at(epsilon) - at(-epsilon)) - (at(2.0 * epsilon) - at(-2.0 * epsilon))) /
                              (12.0 * epsilon);
                }
            } catch (const NumericError&) {
                p.value[i] = saved;
                throw NumericError("grad_check: non-finite value when perturbing " + p.name + "[" +
                                   std::to_string(i) + "]");
            }
            p.value[i] = saved;
            const double exact = static_cast<double>(analytic[pi][i]);
            const double denom = std::max({std::abs(exact), std::abs(numeric), 1e-8});
            const double rel = std::abs(exact - numeric) / denom;
            if (rel > worst) worst = rel;
            if (rel > result.max_relative_error) {
                result.max_relative_error = rel;
                result.worst_parameter = p.name;
                result.worst_index = i;
            }
        }
        auto& slot = result.per_parameter[p.name];
        slot = std::max(slot, worst);
    }
    return result;
}

}  // namespace gcnbert
