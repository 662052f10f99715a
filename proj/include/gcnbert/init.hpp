#pragma once

#include <random>

#include "gcnbert/tensor.hpp"

namespace gcnbert {

using Rng = std::mt19937_64;

// Uniform in ±sqrt(6 / (fan_in + fan_out)), shaped fan_in×fan_out.
Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);
Tensor normal_tensor(Shape shape, double stddev, Rng& rng);

}  // namespace gcnbert
