#pragma once

#include "frame_sampler/frame.hpp"

#include <cstdint>
#include <initializer_list>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace frame_sampler::fixtures {

/// Frame where household h has counts[h] children aged 30 months plus a head
/// aged 70 years. Child outcome `outcome` (if non-empty) is values[k] for the
/// k-th child in frame order; heads get NaN.
inline PopulationFrame child_frame(std::span<const int> counts, const std::string &outcome = {},
                                   std::span<const double> values = {}) {
    std::vector<Household> households;
    std::vector<Person> persons;
    std::int64_t next_person = 1;
    for (std::size_t h = 0; h < counts.size(); ++h) {
        Household hh;
        hh.id = HouseholdId{static_cast<std::int64_t>(h + 1)};
        Person head{PersonId{next_person++}, hh.id, 840, Sex::female, true};
        hh.member_ids.push_back(head.id);
        persons.push_back(head);
        for (int k = 0; k < counts[h]; ++k) {
            Person child{PersonId{next_person++}, hh.id, 30, k % 2 == 0 ? Sex::male : Sex::female, false};
            hh.member_ids.push_back(child.id);
            persons.push_back(child);
        }
        hh.n_total_under50 = counts[h];
        households.push_back(std::move(hh));
    }
    PopulationFrame frame{std::move(households), std::move(persons)};
    if (!outcome.empty()) {
        std::vector<double> column(frame.person_count(), std::numeric_limits<double>::quiet_NaN());
        std::size_t k = 0;
        for (std::size_t i = 0; i < frame.person_count(); ++i) {
            if (!frame.persons()[i].is_head) {
                column[i] = values.empty() ? static_cast<double>(k) : values[k];
                ++k;
            }
        }
        frame.set_person_outcome(outcome, std::move(column));
    }
    return frame;
}

inline PopulationFrame child_frame(std::initializer_list<int> counts, const std::string &outcome = {}) {
    const std::vector<int> v(counts);
    return child_frame(std::span<const int>(v), outcome);
}

inline SurveyModuleSpec child_module(int n_target, std::string outcome = "y") {
    return {"children", TargetGroup::children_6_59m, n_target, std::move(outcome), OutcomeLevel::person};
}

} // namespace frame_sampler::fixtures
