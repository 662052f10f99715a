#include "gcnbert/init.hpp"

#include <cmath>

namespace gcnbert {

Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensor t({fan_in, fan_out});
    for (Real& v : t.storage()) v = static_cast<Real>(dist(rng));
    return t;
}

Tensor normal_tensor(Shape shape, double stddev, Rng& rng) {
    std::normal_distribution<double> dist(0.0, stddev);
    Tensor t(std::move(shape));
    for (Real& v : t.storage()) v = static_cast<Real>(dist(rng));
    return t;
}

}  // namespace gcnbert
