#include "frame_sampler/sampler.hpp"

#include "frame_sampler/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>

namespace frame_sampler {

namespace {

/// Moves a uniform random k-subset of `items` to the front (partial Fisher-Yates).
template <typename T>
void partial_shuffle(std::vector<T> &items, std::size_t k, Rng &rng) {
    const auto n = items.size();
    for (std::size_t i = 0; i < k && i + 1 < n; ++i) {
        const auto j = i + uniform_index(rng, n - i);
        std::swap(items[i], items[j]);
    }
}

template <typename T>
void full_shuffle(std::vector<T> &items, Rng &rng) {
    partial_shuffle(items, items.size(), rng);
}

std::size_t eligible_in(const GroupIndex &index, const StageISample &stage_i) {
    std::size_t total = 0;
    for (auto h : stage_i.households) {
        total += index.count(h);
    }
    return total;
}

StageIISample census_of(const GroupIndex &index, const StageISample &stage_i) {
    StageIISample out;
    out.census = true;
    for (auto h : stage_i.households) {
        const auto members = index.eligible(h);
        out.persons.insert(out.persons.end(), members.begin(), members.end());
        out.allocation.push_back({h, static_cast<int>(members.size()), 0});
    }
    std::sort(out.persons.begin(), out.persons.end());
    return out;
}

void require_scheme(const StageISample &stage_i, StageIScheme expected, std::string_view who) {
    if (stage_i.scheme != expected) {
        throw InputError(std::string{who} + ": wrong stage-I design");
    }
}

} // namespace

std::string_view to_string(SchemeId scheme) noexcept {
    switch (scheme) {
    case SchemeId::srs_stratified: return "srs_stratified";
    case SchemeId::srs_systematic: return "srs_systematic";
    case SchemeId::pps_one_per_draw: return "pps_one_per_draw";
    case SchemeId::srs_persons: return "srs_persons";
    }
    return "unknown";
}

SchemeId parse_scheme(std::string_view name) {
    for (auto s : {SchemeId::srs_stratified, SchemeId::srs_systematic, SchemeId::pps_one_per_draw,
                   SchemeId::srs_persons}) {
        if (to_string(s) == name) {
            return s;
        }
    }
    throw InputError("unknown sampling scheme: " + std::string{name});
}

std::optional<StageIScheme> stage_i_scheme_of(SchemeId scheme) noexcept {
    switch (scheme) {
    case SchemeId::srs_stratified:
    case SchemeId::srs_systematic: return StageIScheme::srs_wor;
    case SchemeId::pps_one_per_draw: return StageIScheme::pps_wr;
    case SchemeId::srs_persons: return std::nullopt;
    }
    return std::nullopt;
}

void validate(const SamplingPlan &plan) {
    if (plan.module.n_target <= 0) {
        throw InputError("module " + plan.module.module_name + ": n_target must be positive");
    }
    if (plan.stage_i != stage_i_scheme_of(plan.scheme)) {
        throw InputError(std::string{"scheme "} + std::string{to_string(plan.scheme)} +
                         " is paired with the wrong stage-I design");
    }
    if (plan.stage_i && plan.stage_i_draws == 0) {
        throw InputError("stage-I draw count must be positive");
    }
    if (plan.scheme == SchemeId::srs_persons && plan.module.level == OutcomeLevel::household) {
        throw InputError("srs_persons does not apply to household-level modules");
    }
}

SamplingPlan make_plan(SchemeId scheme, SurveyModuleSpec module, std::size_t stage_i_draws, std::uint64_t seed) {
    SamplingPlan plan{scheme, std::move(module), stage_i_scheme_of(scheme), stage_i_draws, seed};
    validate(plan);
    return plan;
}

std::vector<double> under50_size_measure(const PopulationFrame &frame) {
    std::vector<double> x;
    x.reserve(frame.household_count());
    for (const auto &hh : frame.households()) {
        x.push_back(hh.n_total_under50);
    }
    return x;
}

StageISample srs_households(const PopulationFrame &frame, std::size_t n_I, Rng &rng) {
    if (frame.household_count() == 0) {
        throw InputError("srs_households: empty frame");
    }
    if (n_I == 0) {
        throw InputError("srs_households: n_I must be at least 1");
    }
    StageISample out;
    out.scheme = StageIScheme::srs_wor;
    out.draws = n_I;
    const auto take = std::min(n_I, frame.household_count());
    out.whole_frame = take == frame.household_count();

    std::vector<std::size_t> order(frame.household_count());
    std::iota(order.begin(), order.end(), std::size_t{0});
    partial_shuffle(order, take, rng);
    out.households.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take));
    std::sort(out.households.begin(), out.households.end());
    out.draw_counts.assign(take, 1);
    return out;
}

StageISample ppswr_households(const PopulationFrame &frame, std::size_t m_I, std::span<const double> size_measure,
                              Rng &rng, std::string size_measure_name) {
    if (size_measure.size() != frame.household_count()) {
        throw InputError("ppswr_households: size measure length differs from household count");
    }
    if (m_I == 0) {
        throw InputError("ppswr_households: m_I must be at least 1");
    }
    double total = 0.0;
    for (double x : size_measure) {
        if (!(x >= 0.0) || !std::isfinite(x)) {
            throw InputError("ppswr_households: size measures must be finite and non-negative");
        }
        total += x;
    }
    if (!(total > 0.0)) {
        throw InputError("ppswr_households: all size measures are zero");
    }

    std::discrete_distribution<std::size_t> pick(size_measure.begin(), size_measure.end());
    std::map<std::size_t, int> counts;
    for (std::size_t d = 0; d < m_I; ++d) {
        ++counts[pick(rng)];
    }
    StageISample out;
    out.scheme = StageIScheme::pps_wr;
    out.draws = m_I;
    out.size_measure_name = std::move(size_measure_name);
    for (const auto &[h, k] : counts) {
        out.households.push_back(h);
        out.draw_counts.push_back(k);
    }
    return out;
}

long round_half_away(double value) noexcept { return std::lround(value); }

StageIISample stratified_within(const GroupIndex &index, const StageISample &stage_i, int n_target, Rng &rng) {
    require_scheme(stage_i, StageIScheme::srs_wor, "stratified_within");
    const auto total = eligible_in(index, stage_i);
    if (total <= static_cast<std::size_t>(n_target)) {
        return census_of(index, stage_i);
    }
    StageIISample out;
    const double ratio = static_cast<double>(n_target) / static_cast<double>(total);
    for (auto h : stage_i.households) {
        const auto members = index.eligible(h);
        const auto n_big = static_cast<long>(members.size());
        const auto n_h = std::clamp(round_half_away(static_cast<double>(n_big) * ratio), 0L, n_big);
        std::vector<std::size_t> pool(members.begin(), members.end());
        partial_shuffle(pool, static_cast<std::size_t>(n_h), rng);
        out.persons.insert(out.persons.end(), pool.begin(), pool.begin() + n_h);
        out.allocation.push_back({h, static_cast<int>(n_h), 0});
    }
    std::sort(out.persons.begin(), out.persons.end());
    return out;
}

std::vector<std::size_t> fractional_interval_positions(std::size_t population, std::size_t n_target, double offset) {
    if (n_target == 0 || n_target > population) {
        throw InputError("fractional_interval_positions: need 1 <= n_target <= population");
    }
    const double a = static_cast<double>(population) / static_cast<double>(n_target);
    std::vector<std::size_t> positions;
    positions.reserve(n_target);
    for (std::size_t j = 0; j < n_target; ++j) {
        const double x = offset + static_cast<double>(j) * a;
        auto k = static_cast<std::size_t>(std::max(1.0, std::ceil(x)));
        k = std::min(k, population);
        positions.push_back(k);
    }
    return positions;
}

StageIISample systematic_within(const GroupIndex &index, const StageISample &stage_i, int n_target, Rng &rng) {
    require_scheme(stage_i, StageIScheme::srs_wor, "systematic_within");
    const auto total = eligible_in(index, stage_i);
    if (total <= static_cast<std::size_t>(n_target)) {
        auto out = census_of(index, stage_i);
        if (total == 0) {
            out.warnings.emplace_back("no eligible persons in the stage-I households");
        }
        return out;
    }

    const std::uint64_t ordering_seed = rng();
    Rng ordering(ordering_seed);
    std::vector<std::size_t> household_order(stage_i.households);
    full_shuffle(household_order, ordering);
    std::vector<std::size_t> listing;
    std::vector<std::size_t> owner;
    listing.reserve(total);
    owner.reserve(total);
    for (auto h : household_order) {
        const auto members = index.eligible(h);
        std::vector<std::size_t> shuffled(members.begin(), members.end());
        full_shuffle(shuffled, ordering);
        listing.insert(listing.end(), shuffled.begin(), shuffled.end());
        owner.insert(owner.end(), shuffled.size(), h);
    }

    const double a = static_cast<double>(total) / static_cast<double>(n_target);
    const double xi = a * uniform_open01(rng);
    StageIISample out;
    out.systematic = SystematicDraw{a, xi, ordering_seed};

    std::map<std::size_t, int> per_household;
    for (auto h : stage_i.households) {
        per_household[h] = 0;
    }
    for (auto k : fractional_interval_positions(total, static_cast<std::size_t>(n_target), xi)) {
        out.persons.push_back(listing[k - 1]);
        ++per_household[owner[k - 1]];
    }
    std::sort(out.persons.begin(), out.persons.end());
    out.persons.erase(std::unique(out.persons.begin(), out.persons.end()), out.persons.end());
    for (const auto &[h, n] : per_household) {
        out.allocation.push_back({h, n, 0});
    }
    return out;
}

StageIISample pps_within(const GroupIndex &index, const StageISample &stage_i, int n_target, Rng &rng) {
    require_scheme(stage_i, StageIScheme::pps_wr, "pps_within");
    std::vector<std::size_t> instances;
    instances.reserve(stage_i.draws);
    for (std::size_t i = 0; i < stage_i.households.size(); ++i) {
        instances.insert(instances.end(), static_cast<std::size_t>(stage_i.draw_counts[i]), stage_i.households[i]);
    }
    if (static_cast<std::size_t>(n_target) < instances.size()) {
        partial_shuffle(instances, static_cast<std::size_t>(n_target), rng);
        instances.resize(static_cast<std::size_t>(n_target));
        std::sort(instances.begin(), instances.end());
    }

    StageIISample out;
    out.retained_draws = instances.size();
    std::map<std::size_t, std::pair<int, std::vector<std::size_t>>> picks;
    for (auto h : instances) {
        auto &[k, chosen] = picks[h];
        ++k;
        const auto members = index.eligible(h);
        if (!members.empty()) {
            chosen.push_back(members[uniform_index(rng, members.size())]);
        }
    }
    for (auto &[h, entry] : picks) {
        auto &[k, chosen] = entry;
        std::sort(chosen.begin(), chosen.end());
        chosen.erase(std::unique(chosen.begin(), chosen.end()), chosen.end());
        out.persons.insert(out.persons.end(), chosen.begin(), chosen.end());
        out.allocation.push_back({h, static_cast<int>(chosen.size()), k});
    }
    std::sort(out.persons.begin(), out.persons.end());
    return out;
}

StageIISample select_household_heads(const PopulationFrame &frame, const StageISample &stage_i) {
    StageIISample out;
    for (std::size_t i = 0; i < stage_i.households.size(); ++i) {
        const auto h = stage_i.households[i];
        int found = 0;
        for (auto p : frame.members(h)) {
            if (frame.persons()[p].is_head) {
                out.persons.push_back(p);
                found = 1;
                break;
            }
        }
        const int k = stage_i.scheme == StageIScheme::pps_wr ? stage_i.draw_counts[i] : 0;
        out.allocation.push_back({h, found, k});
    }
    out.retained_draws = stage_i.scheme == StageIScheme::pps_wr ? stage_i.draws : 0;
    std::sort(out.persons.begin(), out.persons.end());
    return out;
}

StageIISample srs_persons_within(const GroupIndex &index, int n_target, Rng &rng) {
    std::vector<std::size_t> pool;
    std::vector<std::size_t> owner;
    pool.reserve(index.total());
    for (std::size_t h = 0; h < index.household_count(); ++h) {
        for (auto p : index.eligible(h)) {
            pool.push_back(p);
            owner.push_back(h);
        }
    }
    std::vector<std::size_t> order(pool.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto take = std::min(static_cast<std::size_t>(n_target), pool.size());
    partial_shuffle(order, take, rng);
    order.resize(take);
    std::sort(order.begin(), order.end());

    StageIISample out;
    out.census = take == pool.size();
    std::map<std::size_t, int> per_household;
    for (auto o : order) {
        out.persons.push_back(pool[o]);
        ++per_household[owner[o]];
    }
    std::sort(out.persons.begin(), out.persons.end());
    for (const auto &[h, n] : per_household) {
        out.allocation.push_back({h, n, 0});
    }
    return out;
}

std::pair<StageISample, StageISample> pair_household_designs(const PopulationFrame &frame, std::size_t m_I,
                                                             std::span<const double> size_measure, Rng &rng) {
    auto pps = ppswr_households(frame, m_I, size_measure, rng);
    auto srs = srs_households(frame, pps.unique_count(), rng);
    return {std::move(pps), std::move(srs)};
}

StageIISample draw_stage_ii(SchemeId scheme, const GroupIndex &index, const StageISample &stage_i, int n_target,
                            Rng &rng) {
    switch (scheme) {
    case SchemeId::srs_stratified: return stratified_within(index, stage_i, n_target, rng);
    case SchemeId::srs_systematic: return systematic_within(index, stage_i, n_target, rng);
    case SchemeId::pps_one_per_draw: return pps_within(index, stage_i, n_target, rng);
    case SchemeId::srs_persons: return srs_persons_within(index, n_target, rng);
    }
    throw InputError("unknown scheme");
}

PlannedSample draw_plan(const PopulationFrame &frame, const GroupIndex &index, const SamplingPlan &plan) {
    validate(plan);
    Rng rng(plan.seed);
    PlannedSample out;
    if (!plan.stage_i) {
        out.stage_ii = srs_persons_within(index, plan.module.n_target, rng);
        return out;
    }
    if (*plan.stage_i == StageIScheme::srs_wor) {
        out.stage_i = srs_households(frame, plan.stage_i_draws, rng);
    } else {
        const auto x = under50_size_measure(frame);
        out.stage_i = ppswr_households(frame, plan.stage_i_draws, x, rng);
    }
    if (plan.module.level == OutcomeLevel::household) {
        out.stage_ii = select_household_heads(frame, *out.stage_i);
    } else {
        out.stage_ii = draw_stage_ii(plan.scheme, index, *out.stage_i, plan.module.n_target, rng);
    }
    return out;
}

void write_manifest_header(std::ostream &out) { out << "scheme,module,household_id,person_id,k_h,n_h\n"; }

void write_manifest_rows(std::ostream &out, const PopulationFrame &frame, std::string_view scheme,
                         std::string_view module, const StageIISample &sample) {
    const bool pps = sample.retained_draws > 0;
    std::size_t next = 0;
    for (const auto &alloc : sample.allocation) {
        const auto hid = to_int(frame.households()[alloc.household].id);
        out << scheme << ',' << module << ',' << hid << ",," << (pps ? std::to_string(alloc.k_h) : std::string{})
            << ',' << alloc.n_h << '\n';
        for (auto p : frame.members(alloc.household)) {
            if (std::binary_search(sample.persons.begin(), sample.persons.end(), p)) {
                out << scheme << ',' << module << ',' << hid << ',' << to_int(frame.persons()[p].id) << ",,\n";
                ++next;
            }
        }
    }
    if (next != sample.persons.size()) {
        throw ConsistencyError("manifest: selected persons outside the allocated households");
    }
}

} // namespace frame_sampler
