#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace frame_sampler {

enum class HouseholdId : std::int64_t {};
enum class PersonId : std::int64_t {};

constexpr std::int64_t to_int(HouseholdId id) noexcept { return static_cast<std::int64_t>(id); }
constexpr std::int64_t to_int(PersonId id) noexcept { return static_cast<std::int64_t>(id); }

enum class Sex { male, female };

/// Ages at or above this many months do not count towards N_{h,total}.
inline constexpr int under50_months = 600;

struct Person {
    PersonId id{};
    HouseholdId household_id{};
    int age_months = 0;
    Sex sex = Sex::female;
    bool is_head = false;
};

struct Household {
    HouseholdId id{};
    std::vector<PersonId> member_ids;
    /// Members younger than 50 years; the PPS size measure.
    int n_total_under50 = 0;
};

enum class TargetGroup {
    children_6_59m,
    children_5_14y,
    men_15_49y,
    women_15_49y,
    under_50_all,
    household_heads,
};

bool in_target_group(TargetGroup group, int age_months, Sex sex, bool is_head) noexcept;
bool in_target_group(TargetGroup group, const Person &person) noexcept;

std::string_view to_string(TargetGroup group) noexcept;
TargetGroup parse_target_group(std::string_view name);

enum class OutcomeLevel { person, household };

std::string_view to_string(OutcomeLevel level) noexcept;
OutcomeLevel parse_outcome_level(std::string_view name);

/// One survey module: a target group, its sample size budget and the outcome it measures.
struct SurveyModuleSpec {
    std::string module_name;
    TargetGroup target_group = TargetGroup::under_50_all;
    int n_target = 1;
    std::string outcome_name;
    OutcomeLevel level = OutcomeLevel::person;
};

/// The seven person-level modules plus the household consumption module.
std::vector<SurveyModuleSpec> default_modules();

/// A village: households, their members and the simulated outcomes.
///
/// Outcomes are stored column-wise, one value per person (or household) in
/// frame order; NaN marks a person outside every group that measures it.
/// The frame is built once and then shared read-only between replications.
class PopulationFrame {
public:
    PopulationFrame() = default;

    /// Builds the id indices. Does not validate; see validate_frame().
    PopulationFrame(std::vector<Household> households, std::vector<Person> persons);

    std::span<const Household> households() const noexcept { return households_; }
    std::span<const Person> persons() const noexcept { return persons_; }
    std::size_t household_count() const noexcept { return households_.size(); }
    std::size_t person_count() const noexcept { return persons_.size(); }

    std::optional<std::size_t> find_household(HouseholdId id) const;
    std::optional<std::size_t> find_person(PersonId id) const;

    /// Indices (into persons()) of the members of household `household_index`.
    std::span<const std::size_t> members(std::size_t household_index) const;

    /// Household index of a person, if the person's household exists.
    std::optional<std::size_t> household_of(std::size_t person_index) const;

    void set_person_outcome(const std::string &name, std::vector<double> values);
    void set_household_outcome(const std::string &name, std::vector<double> values);

    bool has_person_outcome(std::string_view name) const;
    bool has_household_outcome(std::string_view name) const;
    const std::vector<double> &person_outcome(std::string_view name) const;
    const std::vector<double> &household_outcome(std::string_view name) const;

    const std::map<std::string, std::vector<double>, std::less<>> &person_outcomes() const noexcept {
        return person_outcomes_;
    }
    const std::map<std::string, std::vector<double>, std::less<>> &household_outcomes() const noexcept {
        return household_outcomes_;
    }

private:
    std::vector<Household> households_;
    std::vector<Person> persons_;
    std::unordered_map<std::int64_t, std::size_t> household_index_;
    std::unordered_map<std::int64_t, std::size_t> person_index_;
    std::vector<std::vector<std::size_t>> members_;
    std::vector<std::optional<std::size_t>> person_household_;
    std::map<std::string, std::vector<double>, std::less<>> person_outcomes_;
    std::map<std::string, std::vector<double>, std::less<>> household_outcomes_;
};

/// N_h: members of household `household_index` in `group`.
std::size_t target_count(const PopulationFrame &frame, std::size_t household_index, TargetGroup group);

/// N = sum over households of N_h.
std::size_t frame_totals(const PopulationFrame &frame, TargetGroup group);

/// Recomputed count of members under 50 years.
int count_under50(const PopulationFrame &frame, std::size_t household_index);

/// Per-household lists of eligible members for one target group.
class GroupIndex {
public:
    GroupIndex(const PopulationFrame &frame, TargetGroup group);

    TargetGroup group() const noexcept { return group_; }
    std::size_t household_count() const noexcept { return eligible_.size(); }
    std::span<const std::size_t> eligible(std::size_t household_index) const { return eligible_.at(household_index); }
    std::size_t count(std::size_t household_index) const { return eligible_.at(household_index).size(); }
    std::size_t total() const noexcept { return total_; }

private:
    TargetGroup group_;
    std::vector<std::vector<std::size_t>> eligible_;
    std::size_t total_ = 0;
};

struct ValidationIssue {
    enum class Kind {
        duplicate_household_id,
        duplicate_person_id,
        orphan_person,
        member_list_mismatch,
        no_head,
        multiple_heads,
        under50_count_mismatch,
        negative_age,
        missing_outcome,
    };
    Kind kind;
    std::optional<HouseholdId> household;
    std::optional<PersonId> person;
    std::string message;
};

std::string_view to_string(ValidationIssue::Kind kind) noexcept;

/// All structural invariant violations; empty for a consistent frame.
std::vector<ValidationIssue> validate_frame(const PopulationFrame &frame);

/// Structural checks plus: every person in a module's group has that module's outcome.
std::vector<ValidationIssue> validate_frame(const PopulationFrame &frame,
                                            std::span<const SurveyModuleSpec> modules);

} // namespace frame_sampler
