#include "cargo/random.hpp"

#include <algorithm>
#include <stdexcept>

namespace cargo {

CategoricalSampler::CategoricalSampler(std::span<const double> weights) {
    cumulative_.reserve(weights.size());
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) throw std::invalid_argument("categorical weights must be non-negative");
        total += w;
        cumulative_.push_back(total);
    }
    if (!(total > 0.0)) throw std::invalid_argument("categorical weights sum to zero");
}

std::size_t CategoricalSampler::operator()(Rng& rng) const {
    const double u = uniform01(rng) * cumulative_.back();
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    auto idx = static_cast<std::size_t>(it - cumulative_.begin());
    // u can only reach the end through rounding; step back to the last
    // index with non-zero weight.
    if (idx >= cumulative_.size()) idx = cumulative_.size() - 1;
    while (idx > 0 && cumulative_[idx] == cumulative_[idx - 1]) --idx;
    return idx;
}

}  // namespace cargo
