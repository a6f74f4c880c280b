#include "frame_sampler/weights.hpp"

#include "frame_sampler/csv.hpp"
#include "frame_sampler/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <set>

namespace frame_sampler {

namespace {

struct Accumulator {
    double sum = 0.0;
    double sum_sq = 0.0;

    void add(double v) {
        sum += v;
        sum_sq += v * v;
    }
};

InclusionResult finish_mc(const Accumulator &acc, std::size_t replicates, double stage_i_fraction) {
    const double r = static_cast<double>(replicates);
    const double mean = acc.sum / r;
    double sd = 0.0;
    if (replicates > 1) {
        sd = std::sqrt(std::max(0.0, (acc.sum_sq - r * mean * mean) / (r - 1.0)));
    }
    return {stage_i_fraction * mean, InclusionMethod::monte_carlo, replicates, stage_i_fraction * sd / std::sqrt(r)};
}

std::vector<long long> eligible_counts(const GroupIndex &index) {
    std::vector<long long> counts(index.household_count());
    for (std::size_t h = 0; h < counts.size(); ++h) {
        counts[h] = static_cast<long long>(index.count(h));
    }
    return counts;
}

void check_inclusion_args(const GroupIndex &index, std::size_t h, std::size_t n_I) {
    if (h >= index.household_count()) {
        throw InputError("inclusion probability requested for a household outside the frame");
    }
    if (n_I == 0) {
        throw InputError("n_I must be at least 1");
    }
}

} // namespace

std::string_view to_string(InclusionMethod method) noexcept {
    switch (method) {
    case InclusionMethod::closed_form_exact: return "closed_form_exact";
    case InclusionMethod::closed_form_approx: return "closed_form_approx";
    case InclusionMethod::monte_carlo: return "monte_carlo";
    case InclusionMethod::enumeration: return "enumeration";
    }
    return "unknown";
}

PpsInclusion pps_inclusion(double p_h, int n_h, int N_h, std::size_t m) {
    if (!(p_h >= 0.0 && p_h <= 1.0)) {
        throw InputError("pps_inclusion: p_h outside [0, 1]");
    }
    if (N_h == 0) {
        return {0.0, 0.0};
    }
    if (N_h < 0 || n_h < 0 || n_h > N_h) {
        throw InputError("pps_inclusion: need 0 <= n_h <= N_h");
    }
    const double q = p_h * static_cast<double>(n_h) / static_cast<double>(N_h);
    if (m <= 1) {
        return {m == 1 ? q : 0.0, static_cast<double>(m) * q};
    }
    const double md = static_cast<double>(m);
    return {-std::expm1(md * std::log1p(-q)), md * q};
}

double within_selection_probability(WithinScheme scheme, int N_h, long long stage_total, int n_target) {
    if (N_h <= 0 || stage_total <= 0) {
        return 0.0;
    }
    const double ratio = static_cast<double>(n_target) / static_cast<double>(stage_total);
    if (scheme == WithinScheme::systematic) {
        return std::min(ratio, 1.0);
    }
    // Census applies when the total fits within the target.
    if (stage_total <= n_target) {
        return 1.0;
    }
    const double n_h = static_cast<double>(std::lround(static_cast<double>(N_h) * ratio));
    return std::min(n_h / static_cast<double>(N_h), 1.0);
}

double binomial_coefficient(std::size_t n, std::size_t k) {
    if (k > n) {
        return 0.0;
    }
    k = std::min(k, n - k);
    double c = 1.0;
    for (std::size_t i = 1; i <= k; ++i) {
        c = c * static_cast<double>(n - k + i) / static_cast<double>(i);
        if (!std::isfinite(c)) {
            return std::numeric_limits<double>::infinity();
        }
    }
    return std::round(c);
}

InclusionResult srs_scheme_inclusion_mc(const GroupIndex &index, std::size_t h, std::size_t n_I, int n_target,
                                        WithinScheme scheme, std::size_t replicates, Rng &rng) {
    check_inclusion_args(index, h, n_I);
    if (replicates == 0) {
        throw InputError("srs_scheme_inclusion_mc: need at least one replicate");
    }
    const auto counts = eligible_counts(index);
    const auto N_I = counts.size();
    const auto n = std::min(n_I, N_I);
    const double fraction = static_cast<double>(n) / static_cast<double>(N_I);

    std::vector<std::size_t> others;
    others.reserve(N_I - 1);
    for (std::size_t g = 0; g < N_I; ++g) {
        if (g != h) {
            others.push_back(g);
        }
    }
    const auto N_h = static_cast<int>(counts[h]);
    Accumulator acc;
    for (std::size_t r = 0; r < replicates; ++r) {
        long long total = counts[h];
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const auto j = i + uniform_index(rng, others.size() - i);
            std::swap(others[i], others[j]);
            total += counts[others[i]];
        }
        acc.add(within_selection_probability(scheme, N_h, total, n_target));
    }
    return finish_mc(acc, replicates, fraction);
}

InclusionResult srs_scheme_inclusion_exhaustive(const GroupIndex &index, std::size_t h, std::size_t n_I,
                                                int n_target, WithinScheme scheme) {
    check_inclusion_args(index, h, n_I);
    const auto counts = eligible_counts(index);
    const auto N_I = counts.size();
    const auto n = std::min(n_I, N_I);
    const auto k = n - 1;

    std::vector<long long> others;
    for (std::size_t g = 0; g < N_I; ++g) {
        if (g != h) {
            others.push_back(counts[g]);
        }
    }
    const auto N_h = static_cast<int>(counts[h]);
    // Walk all k-combinations of `others` in lexicographic order.
    std::vector<std::size_t> pick(k);
    std::iota(pick.begin(), pick.end(), std::size_t{0});
    double sum = 0.0;
    std::size_t sets = 0;
    for (;;) {
        long long total = counts[h];
        for (auto i : pick) {
            total += others[i];
        }
        sum += within_selection_probability(scheme, N_h, total, n_target);
        ++sets;
        std::size_t pos = k;
        while (pos > 0 && pick[pos - 1] == others.size() - k + pos - 1) {
            --pos;
        }
        if (pos == 0) {
            break;
        }
        ++pick[pos - 1];
        for (auto i = pos; i < k; ++i) {
            pick[i] = pick[i - 1] + 1;
        }
    }
    const double fraction = static_cast<double>(n) / static_cast<double>(N_I);
    return {fraction * sum / static_cast<double>(sets), InclusionMethod::enumeration, 0, 0.0};
}

std::vector<InclusionResult> srs_scheme_inclusion_all(const GroupIndex &index, std::size_t n_I, int n_target,
                                                      WithinScheme scheme, std::size_t replicates, Rng &rng) {
    if (n_I == 0) {
        throw InputError("n_I must be at least 1");
    }
    const auto counts = eligible_counts(index);
    const auto N_I = counts.size();
    std::vector<InclusionResult> out(N_I);
    if (N_I == 0) {
        return out;
    }
    const auto n = std::min(n_I, N_I);
    if (binomial_coefficient(N_I - 1, n - 1) <= enumeration_limit) {
        for (std::size_t h = 0; h < N_I; ++h) {
            out[h] = srs_scheme_inclusion_exhaustive(index, h, n, n_target, scheme);
        }
        return out;
    }
    if (replicates == 0) {
        throw InputError("srs_scheme_inclusion_all: need at least one replicate");
    }

    // One permutation per replicate serves every household: the other
    // members of a stage-I sample containing h are the first n - 1 positions
    // with h removed (position n - 1 fills in when h is among them).
    std::vector<std::size_t> perm(N_I);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::vector<char> in_head(N_I, 0);
    std::vector<Accumulator> acc(N_I);
    for (std::size_t r = 0; r < replicates; ++r) {
        for (std::size_t i = 0; i < n && i + 1 < N_I; ++i) {
            std::swap(perm[i], perm[i + uniform_index(rng, N_I - i)]);
        }
        long long head_total = 0;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            head_total += counts[perm[i]];
            in_head[perm[i]] = 1;
        }
        const long long spare = counts[perm[n - 1]];
        for (std::size_t h = 0; h < N_I; ++h) {
            const long long others = in_head[h] ? head_total - counts[h] + spare : head_total;
            acc[h].add(within_selection_probability(scheme, static_cast<int>(counts[h]), counts[h] + others,
                                                    n_target));
        }
        for (std::size_t i = 0; i + 1 < n; ++i) {
            in_head[perm[i]] = 0;
        }
    }
    const double fraction = static_cast<double>(n) / static_cast<double>(N_I);
    for (std::size_t h = 0; h < N_I; ++h) {
        out[h] = finish_mc(acc[h], replicates, fraction);
    }
    return out;
}

std::size_t WeightedSample::psu_count() const {
    std::set<std::int64_t> psus;
    for (const auto &row : rows) {
        psus.insert(row.psu_id);
    }
    return psus.size();
}

WeightedSample design_weights(const DesignContext &ctx, const StageIISample &sample) {
    if (ctx.frame == nullptr || ctx.index == nullptr || ctx.module == nullptr) {
        throw InputError("design_weights: incomplete context");
    }
    const auto &frame = *ctx.frame;
    const auto &index = *ctx.index;
    const auto &module = *ctx.module;
    const bool household_level = module.level == OutcomeLevel::household;
    const auto stage = stage_i_scheme_of(ctx.scheme);
    if (stage && (ctx.stage_i == nullptr || ctx.stage_i->scheme != *stage)) {
        throw InputError("design_weights: stage-I sample does not match the scheme");
    }

    const std::vector<double> *outcome = household_level ? &frame.household_outcome(module.outcome_name)
                                                          : &frame.person_outcome(module.outcome_name);
    double size_total = 0.0;
    if (stage == StageIScheme::pps_wr) {
        if (ctx.size_measure.size() != frame.household_count()) {
            throw InputError("design_weights: PPS size measure missing");
        }
        size_total = std::accumulate(ctx.size_measure.begin(), ctx.size_measure.end(), 0.0);
    }
    if (!household_level && stage == StageIScheme::srs_wor &&
        ctx.household_inclusion.size() != frame.household_count()) {
        throw InputError("design_weights: SRS inclusion probabilities missing");
    }

    WeightedSample out;
    out.rows.reserve(sample.persons.size());
    const double N_I = static_cast<double>(frame.household_count());
    for (auto p : sample.persons) {
        const auto hh = frame.household_of(p);
        if (!hh) {
            throw ConsistencyError("design_weights: selected person has no household");
        }
        const auto h = *hh;
        double pi = 0.0;
        double w = 0.0;
        if (household_level && !stage) {
            pi = static_cast<double>(sample.persons.size()) / static_cast<double>(index.total());
            w = 1.0 / pi;
        } else if (household_level) {
            if (*stage == StageIScheme::srs_wor) {
                pi = std::min(static_cast<double>(ctx.stage_i->draws), N_I) / N_I;
            } else {
                const double p_h = ctx.size_measure[h] / size_total;
                pi = -std::expm1(static_cast<double>(ctx.stage_i->draws) * std::log1p(-p_h));
            }
            w = pi > 0.0 ? 1.0 / pi : 0.0;
        } else if (ctx.scheme == SchemeId::pps_one_per_draw) {
            const double x_h = ctx.size_measure[h];
            pi = x_h > 0.0 ? 1.0 : 0.0;
            w = x_h > 0.0 ? size_total / (static_cast<double>(sample.retained_draws) * x_h) *
                                static_cast<double>(index.count(h))
                          : 0.0;
        } else if (ctx.scheme == SchemeId::srs_persons) {
            pi = static_cast<double>(sample.persons.size()) / static_cast<double>(index.total());
            w = 1.0 / pi;
        } else {
            pi = ctx.household_inclusion[h].pi;
            w = pi > 0.0 ? 1.0 / pi : 0.0;
        }
        if (!(pi > 0.0) || !std::isfinite(w)) {
            throw ConsistencyError("design_weights: selected person " + std::to_string(to_int(frame.persons()[p].id)) +
                                   " has zero inclusion probability");
        }
        const double y = household_level ? (*outcome)[h] : (*outcome)[p];
        if (!std::isfinite(y)) {
            throw ConsistencyError("design_weights: selected person " + std::to_string(to_int(frame.persons()[p].id)) +
                                   " has no value for '" + module.outcome_name + "'");
        }
        const auto hid = frame.households()[h].id;
        const auto pid = frame.persons()[p].id;
        const auto psu = ctx.scheme == SchemeId::srs_persons ? to_int(pid) : to_int(hid);
        out.rows.push_back({pid, hid, psu, y, w});
    }
    return out;
}

double pps_approximation_gap(const DesignContext &ctx, const StageIISample &sample) {
    if (ctx.scheme != SchemeId::pps_one_per_draw || ctx.frame == nullptr || ctx.index == nullptr) {
        return 0.0;
    }
    const double size_total = std::accumulate(ctx.size_measure.begin(), ctx.size_measure.end(), 0.0);
    double gap = 0.0;
    for (const auto &alloc : sample.allocation) {
        const int N_h = static_cast<int>(ctx.index->count(alloc.household));
        if (N_h == 0) {
            continue;
        }
        const auto pi = pps_inclusion(ctx.size_measure[alloc.household] / size_total, 1, N_h, sample.retained_draws);
        if (pi.exact > 0.0) {
            gap = std::max(gap, (pi.approx - pi.exact) / pi.exact);
        }
    }
    return gap;
}

void write_weighted_header(std::ostream &out) { out << "scheme,module,psu_id,household_id,person_id,y,w\n"; }

void write_weighted_rows(std::ostream &out, std::string_view scheme, std::string_view module,
                         const WeightedSample &sample) {
    for (const auto &row : sample.rows) {
        out << scheme << ',' << module << ',' << row.psu_id << ',' << to_int(row.household_id) << ','
            << to_int(row.person_id) << ',' << csv::format_double(row.y) << ',' << csv::format_double(row.w)
            << '\n';
    }
}

} // namespace frame_sampler
