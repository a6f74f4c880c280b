#include "frame_sampler/stats.hpp"

#include "frame_sampler/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace frame_sampler::stats {

namespace {

double sorted_quantile(const std::vector<double> &sorted, double p) {
    const auto n = sorted.size();
    const double h = (static_cast<double>(n) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, n - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

} // namespace

double mean(std::span<const double> x) {
    if (x.empty()) {
        throw InputError("mean of an empty range");
    }
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double variance(std::span<const double> x) {
    if (x.size() < 2) {
        return 0.0;
    }
    const double m = mean(x);
    double ss = 0.0;
    for (double v : x) {
        ss += (v - m) * (v - m);
    }
    return ss / static_cast<double>(x.size() - 1);
}

double quantile(std::span<const double> x, double p) {
    const double probs[] = {p};
    return quantiles(x, probs).front();
}

double median(std::span<const double> x) { return quantile(x, 0.5); }

std::vector<double> quantiles(std::span<const double> x, std::span<const double> probs) {
    if (x.empty()) {
        throw InputError("quantile of an empty range");
    }
    std::vector<double> sorted(x.begin(), x.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> out;
    out.reserve(probs.size());
    for (double p : probs) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw InputError("quantile probability outside [0, 1]");
        }
        out.push_back(sorted_quantile(sorted, p));
    }
    return out;
}

} // namespace frame_sampler::stats
