#pragma once

#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "gcnbert/config.hpp"
#include "gcnbert/gradcheck.hpp"

namespace gcnbert {

/// One component under test: a scalar function of some parameters. `state`
/// keeps whatever the parameters and the function point into alive.
struct GradCheckCase {
    std::string component;
    std::shared_ptr<void> state;
    std::vector<Parameter*> params;
    ScalarFunction f;
};

struct ComponentReport {
    std::string component;
    GradCheckResult result;
    bool passed = false;
};

struct GradCheckReport {
    double threshold = 1e-4;
    std::vector<ComponentReport> components;

    bool passed() const;
    std::vector<std::string> failures() const;
    nlohmann::json to_json() const;
    std::string to_table() const;
};

/// Shrinks a configuration to K=5 keypoints, T=3 frames, F=4 features and a
/// small temporal encoder while keeping its architectural switches.
ModelConfig gradcheck_toy_config(const ModelConfig& base);

/// Every layer of the network and the full loss, each as its own case.
/// Parameters are drawn at a scale where tanh does not saturate.
std::vector<GradCheckCase> model_gradcheck_cases(const ModelConfig& toy, std::uint64_t seed = 0);

// Uses the fourth-order stencil: several toy entries have gradients near the
// 1e-8 floor, where second-order differences lose to round-off or truncation.
GradCheckReport run_gradcheck(std::vector<GradCheckCase>& cases, double threshold = 1e-4, double epsilon = 1e-3,
                              Stencil stencil = Stencil::Central4);

}  // namespace gcnbert
