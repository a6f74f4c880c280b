#include "frame_sampler/frame.hpp"

#include "frame_sampler/errors.hpp"

#include <cmath>
#include <set>
#include <unordered_set>

namespace frame_sampler {

bool in_target_group(TargetGroup group, int age_months, Sex sex, bool is_head) noexcept {
    switch (group) {
    case TargetGroup::children_6_59m:
        return age_months >= 6 && age_months <= 59;
    case TargetGroup::children_5_14y:
        return age_months >= 60 && age_months <= 179;
    case TargetGroup::men_15_49y:
        return sex == Sex::male && age_months >= 180 && age_months <= 599;
    case TargetGroup::women_15_49y:
        return sex == Sex::female && age_months >= 180 && age_months <= 599;
    case TargetGroup::under_50_all:
        return age_months >= 0 && age_months < under50_months;
    case TargetGroup::household_heads:
        return is_head;
    }
    return false;
}

bool in_target_group(TargetGroup group, const Person &person) noexcept {
    return in_target_group(group, person.age_months, person.sex, person.is_head);
}

namespace {

struct GroupName {
    TargetGroup group;
    std::string_view name;
};

constexpr GroupName group_names[] = {
    {TargetGroup::children_6_59m, "children_6_59m"},
    {TargetGroup::children_5_14y, "children_5_14y"},
    {TargetGroup::men_15_49y, "men_15_49y"},
    {TargetGroup::women_15_49y, "women_15_49y"},
    {TargetGroup::under_50_all, "under_50_all"},
    {TargetGroup::household_heads, "household_heads"},
};

} // namespace

std::string_view to_string(TargetGroup group) noexcept {
    for (const auto &entry : group_names) {
        if (entry.group == group) {
            return entry.name;
        }
    }
    return "unknown";
}

TargetGroup parse_target_group(std::string_view name) {
    for (const auto &entry : group_names) {
        if (entry.name == name) {
            return entry.group;
        }
    }
    throw InputError("unknown target group: " + std::string{name});
}

std::string_view to_string(OutcomeLevel level) noexcept {
    return level == OutcomeLevel::person ? "person" : "household";
}

OutcomeLevel parse_outcome_level(std::string_view name) {
    if (name == "person") {
        return OutcomeLevel::person;
    }
    if (name == "household") {
        return OutcomeLevel::household;
    }
    throw InputError("unknown outcome level: " + std::string{name});
}

std::vector<SurveyModuleSpec> default_modules() {
    using enum TargetGroup;
    return {
        {"adult_men", men_15_49y, 400, "days_to_treatment", OutcomeLevel::person},
        {"adult_women", women_15_49y, 400, "antenatal_visits", OutcomeLevel::person},
        {"blood_under5", children_6_59m, 300, "hemoglobin", OutcomeLevel::person},
        {"blood_school_age", children_5_14y, 100, "hemoglobin", OutcomeLevel::person},
        {"blood_men", men_15_49y, 100, "hemoglobin", OutcomeLevel::person},
        {"blood_women", women_15_49y, 100, "hemoglobin", OutcomeLevel::person},
        {"anthropometry", children_6_59m, 300, "weight_for_age_z", OutcomeLevel::person},
        {"household_consumption", household_heads, 300, "consumption", OutcomeLevel::household},
    };
}

PopulationFrame::PopulationFrame(std::vector<Household> households, std::vector<Person> persons)
    : households_{std::move(households)}, persons_{std::move(persons)} {
    household_index_.reserve(households_.size());
    for (std::size_t h = 0; h < households_.size(); ++h) {
        household_index_.try_emplace(to_int(households_[h].id), h);
    }
    person_index_.reserve(persons_.size());
    members_.resize(households_.size());
    person_household_.resize(persons_.size());
    for (std::size_t i = 0; i < persons_.size(); ++i) {
        person_index_.try_emplace(to_int(persons_[i].id), i);
        auto it = household_index_.find(to_int(persons_[i].household_id));
        if (it != household_index_.end()) {
            members_[it->second].push_back(i);
            person_household_[i] = it->second;
        }
    }
}

std::optional<std::size_t> PopulationFrame::find_household(HouseholdId id) const {
    auto it = household_index_.find(to_int(id));
    if (it == household_index_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::optional<std::size_t> PopulationFrame::find_person(PersonId id) const {
    auto it = person_index_.find(to_int(id));
    if (it == person_index_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::span<const std::size_t> PopulationFrame::members(std::size_t household_index) const {
    return members_.at(household_index);
}

std::optional<std::size_t> PopulationFrame::household_of(std::size_t person_index) const {
    return person_household_.at(person_index);
}

void PopulationFrame::set_person_outcome(const std::string &name, std::vector<double> values) {
    if (values.size() != persons_.size()) {
        throw InputError("person outcome '" + name + "' has " + std::to_string(values.size()) +
                         " values for " + std::to_string(persons_.size()) + " persons");
    }
    person_outcomes_.insert_or_assign(name, std::move(values));
}

void PopulationFrame::set_household_outcome(const std::string &name, std::vector<double> values) {
    if (values.size() != households_.size()) {
        throw InputError("household outcome '" + name + "' has " + std::to_string(values.size()) +
                         " values for " + std::to_string(households_.size()) + " households");
    }
    household_outcomes_.insert_or_assign(name, std::move(values));
}

bool PopulationFrame::has_person_outcome(std::string_view name) const {
    return person_outcomes_.find(name) != person_outcomes_.end();
}

bool PopulationFrame::has_household_outcome(std::string_view name) const {
    return household_outcomes_.find(name) != household_outcomes_.end();
}

const std::vector<double> &PopulationFrame::person_outcome(std::string_view name) const {
    auto it = person_outcomes_.find(name);
    if (it == person_outcomes_.end()) {
        throw InputError("frame has no person outcome '" + std::string{name} + "'");
    }
    return it->second;
}

const std::vector<double> &PopulationFrame::household_outcome(std::string_view name) const {
    auto it = household_outcomes_.find(name);
    if (it == household_outcomes_.end()) {
        throw InputError("frame has no household outcome '" + std::string{name} + "'");
    }
    return it->second;
}

std::size_t target_count(const PopulationFrame &frame, std::size_t household_index, TargetGroup group) {
    std::size_t n = 0;
    for (auto i : frame.members(household_index)) {
        if (in_target_group(group, frame.persons()[i])) {
            ++n;
        }
    }
    return n;
}

std::size_t frame_totals(const PopulationFrame &frame, TargetGroup group) {
    std::size_t total = 0;
    for (std::size_t h = 0; h < frame.household_count(); ++h) {
        total += target_count(frame, h, group);
    }
    return total;
}

int count_under50(const PopulationFrame &frame, std::size_t household_index) {
    return static_cast<int>(target_count(frame, household_index, TargetGroup::under_50_all));
}

GroupIndex::GroupIndex(const PopulationFrame &frame, TargetGroup group)
    : group_{group}, eligible_(frame.household_count()) {
    for (std::size_t h = 0; h < frame.household_count(); ++h) {
        for (auto i : frame.members(h)) {
            if (in_target_group(group, frame.persons()[i])) {
                eligible_[h].push_back(i);
            }
        }
        total_ += eligible_[h].size();
    }
}

std::string_view to_string(ValidationIssue::Kind kind) noexcept {
    using enum ValidationIssue::Kind;
    switch (kind) {
    case duplicate_household_id: return "duplicate_household_id";
    case duplicate_person_id: return "duplicate_person_id";
    case orphan_person: return "orphan_person";
    case member_list_mismatch: return "member_list_mismatch";
    case no_head: return "no_head";
    case multiple_heads: return "multiple_heads";
    case under50_count_mismatch: return "under50_count_mismatch";
    case negative_age: return "negative_age";
    case missing_outcome: return "missing_outcome";
    }
    return "unknown";
}

std::vector<ValidationIssue> validate_frame(const PopulationFrame &frame) {
    using enum ValidationIssue::Kind;
    std::vector<ValidationIssue> issues;

    std::unordered_set<std::int64_t> seen_households;
    for (const auto &hh : frame.households()) {
        if (!seen_households.insert(to_int(hh.id)).second) {
            issues.push_back({duplicate_household_id, hh.id, std::nullopt,
                              "household id " + std::to_string(to_int(hh.id)) + " appears more than once"});
        }
    }
    std::unordered_set<std::int64_t> seen_persons;
    for (std::size_t i = 0; i < frame.person_count(); ++i) {
        const auto &p = frame.persons()[i];
        if (!seen_persons.insert(to_int(p.id)).second) {
            issues.push_back({duplicate_person_id, p.household_id, p.id,
                              "person id " + std::to_string(to_int(p.id)) + " appears more than once"});
        }
        if (!frame.household_of(i)) {
            issues.push_back({orphan_person, p.household_id, p.id,
                              "person " + std::to_string(to_int(p.id)) + " references missing household " +
                                  std::to_string(to_int(p.household_id))});
        }
        if (p.age_months < 0) {
            issues.push_back({negative_age, p.household_id, p.id,
                              "person " + std::to_string(to_int(p.id)) + " has negative age"});
        }
    }

    for (std::size_t h = 0; h < frame.household_count(); ++h) {
        const auto &hh = frame.households()[h];
        const auto hid = std::to_string(to_int(hh.id));

        std::multiset<std::int64_t> listed;
        for (auto id : hh.member_ids) {
            listed.insert(to_int(id));
        }
        std::multiset<std::int64_t> actual;
        int heads = 0;
        for (auto i : frame.members(h)) {
            actual.insert(to_int(frame.persons()[i].id));
            heads += frame.persons()[i].is_head ? 1 : 0;
        }
        if (listed != actual) {
            issues.push_back({member_list_mismatch, hh.id, std::nullopt,
                              "household " + hid + " member list does not match persons referencing it"});
        }
        if (heads == 0) {
            issues.push_back({no_head, hh.id, std::nullopt, "household " + hid + " has no head"});
        } else if (heads > 1) {
            issues.push_back({multiple_heads, hh.id, std::nullopt,
                              "household " + hid + " has " + std::to_string(heads) + " heads"});
        }
        if (hh.n_total_under50 != count_under50(frame, h)) {
            issues.push_back({under50_count_mismatch, hh.id, std::nullopt,
                              "household " + hid + " stores n_total_under50 = " +
                                  std::to_string(hh.n_total_under50) + " but has " +
                                  std::to_string(count_under50(frame, h)) + " members under 50"});
        }
    }
    return issues;
}

std::vector<ValidationIssue> validate_frame(const PopulationFrame &frame,
                                            std::span<const SurveyModuleSpec> modules) {
    auto issues = validate_frame(frame);
    for (const auto &module : modules) {
        if (module.level == OutcomeLevel::household) {
            if (!frame.has_household_outcome(module.outcome_name)) {
                issues.push_back({ValidationIssue::Kind::missing_outcome, std::nullopt, std::nullopt,
                                  "household outcome '" + module.outcome_name + "' missing for module " +
                                      module.module_name});
                continue;
            }
            const auto &values = frame.household_outcome(module.outcome_name);
            for (std::size_t h = 0; h < frame.household_count(); ++h) {
                if (!std::isfinite(values[h])) {
                    issues.push_back({ValidationIssue::Kind::missing_outcome, frame.households()[h].id,
                                      std::nullopt,
                                      "household lacks '" + module.outcome_name + "'"});
                }
            }
            continue;
        }
        if (!frame.has_person_outcome(module.outcome_name)) {
            issues.push_back({ValidationIssue::Kind::missing_outcome, std::nullopt, std::nullopt,
                              "person outcome '" + module.outcome_name + "' missing for module " +
                                  module.module_name});
            continue;
        }
        const auto &values = frame.person_outcome(module.outcome_name);
        for (std::size_t i = 0; i < frame.person_count(); ++i) {
            const auto &p = frame.persons()[i];
            if (in_target_group(module.target_group, p) && !std::isfinite(values[i])) {
                issues.push_back({ValidationIssue::Kind::missing_outcome, p.household_id, p.id,
                                  "person " + std::to_string(to_int(p.id)) + " in module " +
                                      module.module_name + " lacks '" + module.outcome_name + "'"});
            }
        }
    }
    return issues;
}

} // namespace frame_sampler
