#include "frame_sampler/errors.hpp"
#include "frame_sampler/sampler.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <set>

using namespace frame_sampler;
using frame_sampler::fixtures::child_frame;

namespace {

StageISample whole_frame(const PopulationFrame &f) {
    Rng rng(0);
    return srs_households(f, f.household_count(), rng);
}

StageISample pps_instances(std::vector<std::size_t> households, std::vector<int> counts) {
    StageISample s;
    s.scheme = StageIScheme::pps_wr;
    s.households = std::move(households);
    s.draw_counts = std::move(counts);
    s.draws = static_cast<std::size_t>(std::accumulate(s.draw_counts.begin(), s.draw_counts.end(), 0));
    return s;
}

int allocated(const StageIISample &s, std::size_t h) {
    for (const auto &a : s.allocation) {
        if (a.household == h) {
            return a.n_h;
        }
    }
    return 0;
}

std::vector<int> random_counts(Rng &rng, std::size_t households, int max_size) {
    std::vector<int> counts(households);
    for (auto &c : counts) {
        c = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(max_size) + 1));
    }
    return counts;
}

} // namespace

TEST(SrsHouseholds, WholeFrame) {
    const auto f = child_frame({1, 1, 1, 1, 1});
    Rng rng(1);
    const auto s = srs_households(f, 5, rng);
    EXPECT_EQ(s.households, (std::vector<std::size_t>{0, 1, 2, 3, 4}));
    EXPECT_TRUE(s.whole_frame);
    const auto over = srs_households(f, 9, rng);
    EXPECT_EQ(over.unique_count(), 5U);
    EXPECT_TRUE(over.whole_frame);
}

TEST(SrsHouseholds, SingleDrawIsUniform) {
    const auto f = child_frame({1, 1, 1, 1});
    Rng rng(2);
    std::vector<int> hits(4, 0);
    const int reps = 8000;
    for (int r = 0; r < reps; ++r) {
        const auto s = srs_households(f, 1, rng);
        ASSERT_EQ(s.unique_count(), 1U);
        ++hits[s.households[0]];
    }
    const double se = std::sqrt(reps * 0.25 * 0.75);
    for (int h : hits) {
        EXPECT_NEAR(h, reps * 0.25, 3 * se);
    }
}

TEST(SrsHouseholds, HalfInclusionFrequency) {
    const auto f = child_frame({1, 1, 1, 1});
    Rng rng(3);
    const int reps = 10000;
    std::vector<int> hits(4, 0);
    for (int r = 0; r < reps; ++r) {
        const auto s = srs_households(f, 2, rng);
        ASSERT_EQ(s.unique_count(), 2U);
        ASSERT_LT(s.households[0], s.households[1]);
        for (auto h : s.households) {
            ++hits[h];
        }
    }
    const double se = std::sqrt(reps * 0.5 * 0.5);
    for (int h : hits) {
        EXPECT_NEAR(h, reps * 0.5, 3 * se);
    }
}

TEST(PpsHouseholds, DrawFrequencyProportionalToSize) {
    const auto f = child_frame({2, 1, 1});
    const std::vector<double> x{2, 1, 1};
    Rng rng(4);
    const std::size_t m = 10000;
    const auto s = ppswr_households(f, m, x, rng);
    EXPECT_EQ(std::accumulate(s.draw_counts.begin(), s.draw_counts.end(), 0), static_cast<int>(m));
    ASSERT_EQ(s.households.front(), 0U);
    EXPECT_NEAR(s.draw_counts.front(), 5000, 3 * std::sqrt(m * 0.25));
}

TEST(PpsHouseholds, ZeroSizeNeverDrawn) {
    const auto f = child_frame({2, 0, 3});
    const auto x = under50_size_measure(f);
    EXPECT_EQ(x, (std::vector<double>{2, 0, 3}));
    Rng rng(5);
    const auto s = ppswr_households(f, 5000, x, rng);
    for (std::size_t i = 0; i < s.households.size(); ++i) {
        EXPECT_NE(s.households[i], 1U);
        EXPECT_GE(s.draw_counts[i], 1);
    }
}

TEST(Stratified, SymmetricShares) {
    const auto f = child_frame({2, 2});
    const GroupIndex idx(f, TargetGroup::children_6_59m);
    Rng rng(6);
    const auto s = stratified_within(idx, whole_frame(f), 2, rng);
    EXPECT_EQ(allocated(s, 0), 1);
    EXPECT_EQ(allocated(s, 1), 1);
}

TEST(Stratified, RoundingDrift) {
    const auto f = child_frame({3, 1});
    const GroupIndex idx(f, TargetGroup::children_6_59m);
    Rng rng(7);
    const auto s = stratified_within(idx, whole_frame(f), 2, rng);
    EXPECT_EQ(allocated(s, 0), 2);
    EXPECT_EQ(allocated(s, 1), 1);
    EXPECT_EQ(s.persons.size(), 3U);
}

TEST(Stratified, CensusWhenTargetExceedsEligible) {
    std::vector<int> counts(10, 3);
    const auto f = child_frame(std::span<const int>(counts));
    const GroupIndex idx(f, TargetGroup::children_6_59m);
    Rng rng(8);
    const auto s = stratified_within(idx, whole_frame(f), 100, rng);
    EXPECT_TRUE(s.census);
    EXPECT_EQ(s.persons.size(), 30U);
}

TEST(Stratified, AllocationStaysWithinHalfOfShare) {
    Rng rng(9);
    for (int trial = 0; trial < 300; ++trial) {
        const auto counts = random_counts(rng, 2 + uniform_index(rng, 20), 7);
        const auto f = child_frame(std::span<const int>(counts));
        const GroupIndex idx(f, TargetGroup::children_6_59m);
        const auto stage_i = srs_households(f, 1 + uniform_index(rng, f.household_count()), rng);
        std::size_t total = 0;
        for (auto h : stage_i.households) {
            total += idx.count(h);
        }
        const int n_target = 1 + static_cast<int>(uniform_index(rng, 30));
        const auto s = stratified_within(idx, stage_i, n_target, rng);
        if (total <= static_cast<std::size_t>(n_target)) {
            EXPECT_TRUE(s.census);
            continue;
        }
        for (const auto &a : s.allocation) {
            const double share = static_cast<double>(idx.count(a.household)) * n_target / static_cast<double>(total);
            EXPECT_LE(a.n_h, static_cast<int>(idx.count(a.household)));
            EXPECT_LE(std::abs(a.n_h - share), 0.5 + 1e-12);
        }
    }
}

TEST(FractionalInterval, HandExample) {
    EXPECT_EQ(fractional_interval_positions(6, 3, 0.5), (std::vector<std::size_t>{1, 3, 5}));
    EXPECT_EQ(fractional_interval_positions(5, 5, 0.3), (std::vector<std::size_t>{1, 2, 3, 4, 5}));
    EXPECT_THROW(fractional_interval_positions(3, 4, 0.5), InputError);
}

TEST(FractionalInterval, PrefixCountsFollowOffsetRule) {
    Rng rng(10);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t population = 1 + uniform_index(rng, 200);
        const std::size_t n = 1 + uniform_index(rng, population);
        const double a = static_cast<double>(population) / static_cast<double>(n);
        const double xi = a * uniform_open01(rng);
        const auto positions = fractional_interval_positions(population, n, xi);
        for (std::size_t x = 0; x <= population; ++x) {
            std::size_t brute = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (std::ceil(xi + static_cast<double>(j - 1) * a) <= static_cast<double>(x)) {
                    ++brute;
                }
            }
            const auto counted = static_cast<std::size_t>(
                std::count_if(positions.begin(), positions.end(), [&](std::size_t k) { return k <= x; }));
            ASSERT_EQ(counted, brute);
            const double ratio = static_cast<double>(x) / a;
            const double q = std::floor(ratio);
            const double d = ratio - q;
            const double expected = xi <= d * a ? q + 1 : q;
            ASSERT_EQ(static_cast<double>(counted), std::min(expected, static_cast<double>(n)))
                << "population " << population << " n " << n << " xi " << xi << " x " << x;
        }
    }
}

TEST(Systematic, OnePerHouseholdForEqualPairs) {
    const auto f = child_frame({2, 2, 2});
    const GroupIndex idx(f, TargetGroup::children_6_59m);
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        Rng rng(seed);
        const auto s = systematic_within(idx, whole_frame(f), 3, rng);
        ASSERT_TRUE(s.systematic);
        EXPECT_DOUBLE_EQ(s.systematic->interval, 2.0);
        for (std::size_t h = 0; h < 3; ++h) {
            EXPECT_EQ(allocated(s, h), 1);
        }
    }
}

TEST(Systematic, FullTargetTakesEveryone) {
    const auto f = child_frame({3, 1, 2});
    const GroupIndex idx(f, TargetGroup::children_6_59m);
    Rng rng(11);
    const auto s = systematic_within(idx, whole_frame(f), 6, rng);
    EXPECT_EQ(s.persons.size(), 6U);
}

TEST(Systematic, ExactSizeAndFloorCeilingCounts) {
    Rng rng(12);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto counts = random_counts(rng, 2 + uniform_index(rng, 30), 8);
        const auto f = child_frame(std::span<const int>(counts));
        const GroupIndex idx(f, TargetGroup::children_6_59m);
        const auto stage_i = srs_households(f, 1 + uniform_index(rng, f.household_count()), rng);
        std::size_t total = 0;
        for (auto h : stage_i.households) {
            total += idx.count(h);
        }
        if (total < 2) {
            continue;
        }
        const int n_target = 1 + static_cast<int>(uniform_index(rng, total - 1));
        const auto s = systematic_within(idx, stage_i, n_target, rng);
        ASSERT_EQ(s.persons.size(), static_cast<std::size_t>(n_target));
        const double a = s.systematic->interval;
        for (const auto &alloc : s.allocation) {
            const double ratio = static_cast<double>(idx.count(alloc.household)) / a;
            EXPECT_TRUE(alloc.n_h == static_cast<int>(std::floor(ratio + 1e-9)) ||
                        alloc.n_h == static_cast<int>(std::ceil(ratio - 1e-9)))
                << "N_h " << idx.count(alloc.household) << " a " << a << " n_h " << alloc.n_h;
        }
    }
}

TEST(PpsWithin, ForcedSelectionCollapses) {
    const auto f = child_frame({1, 3});
    const GroupIndex idx(f, TargetGroup::children_6_59m);
    Rng rng(13);
    const auto s = pps_within(idx, pps_instances({0}, {2}), 10, rng);
    ASSERT_EQ(s.persons.size(), 1U);
    EXPECT_EQ(s.allocation.front().k_h, 2);
    EXPECT_EQ(s.allocation.front().n_h, 1);
}

TEST(PpsWithin, EmptyHouseholdContributesNoOne) {
    const auto f = child_frame({0, 2});
    const GroupIndex idx(f, TargetGroup::children_6_59m);
    Rng rng(14);
    const auto s = pps_within(idx, pps_instances({0, 1}, {3, 1}), 10, rng);
    EXPECT_EQ(s.persons.size(), 1U);
    EXPECT_EQ(allocated(s, 0), 0);
}

TEST(PpsWithin, ThinsToTargetDrawInstances) {
    std::vector<int> counts(500);
    Rng gen(15);
    for (auto &c : counts) {
        c = 1 + static_cast<int>(uniform_index(gen, 5));
    }
    const auto f = child_frame(std::span<const int>(counts));
    const GroupIndex idx(f, TargetGroup::children_6_59m);
    Rng rng(16);
    const auto stage_i = ppswr_households(f, 300, under50_size_measure(f), rng);
    const auto s = pps_within(idx, stage_i, 100, rng);
    EXPECT_EQ(s.retained_draws, 100U);
    int kept = 0;
    for (const auto &a : s.allocation) {
        kept += a.k_h;
    }
    EXPECT_EQ(kept, 100);
}

TEST(PpsWithin, SizeBounds) {
    Rng rng(17);
    for (int trial = 0; trial < 300; ++trial) {
        const auto counts = random_counts(rng, 2 + uniform_index(rng, 20), 4);
        const auto f = child_frame(std::span<const int>(counts));
        const auto x = under50_size_measure(f);
        if (std::accumulate(x.begin(), x.end(), 0.0) == 0.0) {
            continue;
        }
        const GroupIndex idx(f, TargetGroup::children_6_59m);
        const std::size_t m = 1 + uniform_index(rng, 40);
        const int n_target = 1 + static_cast<int>(uniform_index(rng, 40));
        const auto stage_i = ppswr_households(f, m, x, rng);
        const auto s = pps_within(idx, stage_i, n_target, rng);
        std::size_t cap = 0;
        for (const auto &a : s.allocation) {
            cap += std::min<std::size_t>(static_cast<std::size_t>(a.k_h), idx.count(a.household));
        }
        EXPECT_LE(s.persons.size(), std::min<std::size_t>(static_cast<std::size_t>(n_target), m));
        EXPECT_LE(s.persons.size(), cap);
    }
}

TEST(HouseholdHeads, OneHeadPerUniqueHousehold) {
    const auto f = child_frame({1, 2, 0, 4});
    Rng rng(18);
    const auto srs = srs_households(f, 3, rng);
    const auto heads = select_household_heads(f, srs);
    EXPECT_EQ(heads.persons.size(), 3U);
    for (auto p : heads.persons) {
        EXPECT_TRUE(f.persons()[p].is_head);
    }
    const auto pps = select_household_heads(f, pps_instances({1}, {5}));
    EXPECT_EQ(pps.persons.size(), 1U);
    EXPECT_TRUE(select_household_heads(f, StageISample{}).persons.empty());
}

TEST(PairedHouseholdDesigns, SrsSizeIsUniquePpsCount) {
    std::vector<int> counts(400);
    Rng gen(19);
    for (auto &c : counts) {
        c = 1 + static_cast<int>(uniform_index(gen, 6));
    }
    const auto f = child_frame(std::span<const int>(counts));
    const auto x = under50_size_measure(f);
    Rng rng(20);
    const auto [pps, srs] = pair_household_designs(f, 300, x, rng);
    EXPECT_EQ(pps.draws, 300U);
    EXPECT_LT(pps.unique_count(), 300U);
    EXPECT_EQ(srs.unique_count(), pps.unique_count());
    EXPECT_EQ(srs.scheme, StageIScheme::srs_wor);

    const auto [pps1, srs1] = pair_household_designs(f, 1, x, rng);
    EXPECT_EQ(srs1.unique_count(), 1U);

    std::vector<double> spike(f.household_count(), 0.0);
    spike[7] = 1.0;
    const auto [pps2, srs2] = pair_household_designs(f, 50, spike, rng);
    EXPECT_EQ(pps2.households, std::vector<std::size_t>{7});
    EXPECT_EQ(srs2.unique_count(), 1U);
}

TEST(SrsPersons, ExactSizeNoDuplicates) {
    const auto f = child_frame({3, 0, 5, 2});
    const GroupIndex idx(f, TargetGroup::children_6_59m);
    Rng rng(21);
    const auto s = srs_persons_within(idx, 6, rng);
    EXPECT_EQ(s.persons.size(), 6U);
    EXPECT_EQ(std::set<std::size_t>(s.persons.begin(), s.persons.end()).size(), 6U);
    EXPECT_TRUE(srs_persons_within(idx, 50, rng).census);
}

TEST(Samplers, SameSeedSameSample) {
    std::vector<int> counts(60);
    Rng gen(22);
    for (auto &c : counts) {
        c = static_cast<int>(uniform_index(gen, 6));
    }
    const auto f = child_frame(std::span<const int>(counts));
    const GroupIndex idx(f, TargetGroup::children_6_59m);
    for (auto scheme :
         {SchemeId::srs_stratified, SchemeId::srs_systematic, SchemeId::pps_one_per_draw, SchemeId::srs_persons}) {
        const auto plan = make_plan(scheme, fixtures::child_module(25), 20, 99);
        const auto a = draw_plan(f, idx, plan);
        const auto b = draw_plan(f, idx, plan);
        EXPECT_EQ(a.stage_ii.persons, b.stage_ii.persons) << to_string(scheme);
        EXPECT_EQ(a.stage_i.has_value(), scheme != SchemeId::srs_persons);
    }
}

TEST(Samplers, SelectedPersonsAreEligibleAndInStageI) {
    std::vector<int> counts(80);
    Rng gen(23);
    for (auto &c : counts) {
        c = static_cast<int>(uniform_index(gen, 5));
    }
    const auto f = child_frame(std::span<const int>(counts));
    const GroupIndex idx(f, TargetGroup::children_6_59m);
    for (auto scheme : {SchemeId::srs_stratified, SchemeId::srs_systematic, SchemeId::pps_one_per_draw}) {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            const auto drawn = draw_plan(f, idx, make_plan(scheme, fixtures::child_module(30), 25, seed));
            const std::set<std::size_t> stage_i(drawn.stage_i->households.begin(), drawn.stage_i->households.end());
            for (auto p : drawn.stage_ii.persons) {
                EXPECT_TRUE(in_target_group(TargetGroup::children_6_59m, f.persons()[p]));
                EXPECT_TRUE(stage_i.count(*f.household_of(p)));
            }
        }
    }
}

TEST(Plans, SchemeNamesRoundTrip) {
    for (auto s :
         {SchemeId::srs_stratified, SchemeId::srs_systematic, SchemeId::pps_one_per_draw, SchemeId::srs_persons}) {
        EXPECT_EQ(parse_scheme(to_string(s)), s);
    }
    EXPECT_THROW(parse_scheme("cluster"), InputError);
    auto plan = make_plan(SchemeId::srs_systematic, fixtures::child_module(5), 10, 1);
    plan.stage_i = StageIScheme::pps_wr;
    EXPECT_THROW(validate(plan), InputError);
}
