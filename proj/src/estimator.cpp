#include "cargo/estimator.hpp"

#include <stdexcept>

namespace cargo {

std::vector<double> ConditionalEstimator::label_posteriors(std::span<const EventId> prefix, const QueryContext& ctx) const {
    if (prefix.empty()) throw std::invalid_argument("label_posteriors needs a non-empty prefix");
    const Matrix path = label_posterior_path(prefix, ctx);
    const auto last = path.row(path.rows() - 1);
    return {last.begin(), last.end()};
}

}  // namespace cargo
