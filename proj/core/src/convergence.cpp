#include "frame_sampler/convergence.hpp"

#include "frame_sampler/errors.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace frame_sampler {

namespace {

void check_chains(std::span<const std::vector<double>> chains) {
    if (chains.empty() || chains.front().size() < 4) {
        throw InputError("convergence diagnostics need at least one chain of four draws");
    }
    for (const auto &c : chains) {
        if (c.size() != chains.front().size()) {
            throw InputError("convergence diagnostics need equal-length chains");
        }
    }
}

bool is_constant(std::span<const std::vector<double>> chains) {
    const double first = chains.front().front();
    return std::all_of(chains.begin(), chains.end(), [first](const auto &c) {
        return std::all_of(c.begin(), c.end(), [first](double v) { return v == first; });
    });
}

std::vector<std::vector<double>> split(const std::vector<std::vector<double>> &chains) {
    std::vector<std::vector<double>> halves;
    for (const auto &c : chains) {
        const auto half = c.size() / 2;
        const auto offset = c.size() - 2 * half; // drop the middle draw of odd chains
        halves.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(half));
        halves.emplace_back(c.begin() + static_cast<std::ptrdiff_t>(half + offset), c.end());
    }
    return halves;
}

struct ChainMoments {
    std::vector<double> means;
    std::vector<double> variances;
    double within = 0.0;
    double between = 0.0;
    double n = 0.0;
};

ChainMoments moments(const std::vector<std::vector<double>> &chains) {
    ChainMoments out;
    out.n = static_cast<double>(chains.front().size());
    for (const auto &c : chains) {
        const double m = std::accumulate(c.begin(), c.end(), 0.0) / out.n;
        double ss = 0.0;
        for (double v : c) {
            ss += (v - m) * (v - m);
        }
        out.means.push_back(m);
        out.variances.push_back(ss / (out.n - 1.0));
    }
    const double k = static_cast<double>(chains.size());
    out.within = std::accumulate(out.variances.begin(), out.variances.end(), 0.0) / k;
    const double grand = std::accumulate(out.means.begin(), out.means.end(), 0.0) / k;
    double bs = 0.0;
    for (double m : out.means) {
        bs += (m - grand) * (m - grand);
    }
    out.between = k > 1.0 ? out.n * bs / (k - 1.0) : 0.0;
    return out;
}

} // namespace

std::vector<std::vector<double>> rank_normalize(std::span<const std::vector<double>> chains) {
    std::vector<std::pair<double, std::size_t>> pooled;
    for (std::size_t c = 0; c < chains.size(); ++c) {
        for (std::size_t i = 0; i < chains[c].size(); ++i) {
            pooled.emplace_back(chains[c][i], c * chains.front().size() + i);
        }
    }
    std::sort(pooled.begin(), pooled.end());
    const double total = static_cast<double>(pooled.size());
    std::vector<double> score(pooled.size());
    const boost::math::normal_distribution<double> standard;
    for (std::size_t i = 0; i < pooled.size();) {
        auto j = i;
        while (j < pooled.size() && pooled[j].first == pooled[i].first) {
            ++j;
        }
        const double rank = 0.5 * static_cast<double>(i + 1 + j); // average of ranks i+1..j
        const double z = boost::math::quantile(standard, (rank - 0.375) / (total + 0.25));
        for (auto k = i; k < j; ++k) {
            score[pooled[k].second] = z;
        }
        i = j;
    }
    std::vector<std::vector<double>> out(chains.size());
    for (std::size_t c = 0; c < chains.size(); ++c) {
        const auto first = score.begin() + static_cast<std::ptrdiff_t>(c * chains.front().size());
        out[c].assign(first, first + static_cast<std::ptrdiff_t>(chains[c].size()));
    }
    return out;
}

double split_rhat(std::span<const std::vector<double>> chains) {
    check_chains(chains);
    if (is_constant(chains)) {
        return 1.0;
    }
    const auto m = moments(split(rank_normalize(chains)));
    if (!(m.within > 0.0)) {
        return 1.0;
    }
    const double var_plus = (m.n - 1.0) / m.n * m.within + m.between / m.n;
    return std::sqrt(var_plus / m.within);
}

double bulk_ess(std::span<const std::vector<double>> chains) {
    check_chains(chains);
    const double total_draws = static_cast<double>(chains.size() * chains.front().size());
    if (is_constant(chains)) {
        return total_draws;
    }
    const auto halves = split(rank_normalize(chains));
    const auto m = moments(halves);
    if (!(m.within > 0.0)) {
        return total_draws;
    }
    const auto n = halves.front().size();
    const double var_plus = (m.n - 1.0) / m.n * m.within + m.between / m.n;
    const double k = static_cast<double>(halves.size());

    auto rho = [&](std::size_t lag) {
        double acov = 0.0;
        for (std::size_t c = 0; c < halves.size(); ++c) {
            const auto &x = halves[c];
            double s = 0.0;
            for (std::size_t i = 0; i + lag < n; ++i) {
                s += (x[i] - m.means[c]) * (x[i + lag] - m.means[c]);
            }
            acov += s / static_cast<double>(n);
        }
        acov /= k;
        // Chain variances use n - 1; convert the lag-0 autocovariance consistently.
        return 1.0 - (m.within * (m.n - 1.0) / m.n - acov) / var_plus;
    };

    double tau = -1.0;
    double previous_pair = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t + 1 < n; t += 2) {
        double pair = rho(t) + rho(t + 1);
        if (pair <= 0.0) {
            break;
        }
        pair = std::min(pair, previous_pair);
        previous_pair = pair;
        tau += 2.0 * pair;
    }
    tau = std::max(tau, 1.0 / std::log10(total_draws));
    return total_draws / tau;
}

} // namespace frame_sampler
