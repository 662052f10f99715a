#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>

#include "gcnbert/autodiff.hpp"

namespace gcnbert {

/// Builds a scalar on the given tape from the current parameter values.
using ScalarFunction = std::function<Var(Tape&)>;

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::string worst_parameter;
    std::size_t worst_index = 0;
    std::map<std::string, double> per_parameter;
};

/// Central2: (f(x+h) - f(x-h)) / 2h.
/// Central4: (8(f(x+h) - f(x-h)) - (f(x+2h) - f(x-2h))) / 12h, which tolerates
/// a larger h and so loses less to round-off on very small gradients.
enum class Stencil { Central2, Central4 };

/// Compares reverse-mode gradients against central differences.
///
/// For every entry of every parameter the relative error is
/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8); the maximum is
/// reported overall and per parameter name. Parameters are perturbed in place
/// and restored before returning.
GradCheckResult grad_check(const ScalarFunction& f, std::span<Parameter* const> params, double epsilon = 1e-5,
                           Stencil stencil = Stencil::Central2);

}  // namespace gcnbert
