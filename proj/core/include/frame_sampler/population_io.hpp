#pragma once

#include "frame_sampler/frame.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>

namespace frame_sampler {

/// Person file: `household_id,person_id,age_months,sex,is_head,<outcome columns...>`.
void write_person_csv(const PopulationFrame &frame, std::ostream &out);

/// Household file: `household_id,<household outcome columns...>`.
void write_household_csv(const PopulationFrame &frame, std::ostream &out);

/// Reads a frame from the person file and, optionally, the household file.
///
/// With a household file, its rows define the household list and persons
/// pointing elsewhere become orphans (reported by validate_frame). Without
/// one, households are taken from the person rows in order of first
/// appearance. n_total_under50 is recomputed from the members.
PopulationFrame read_population(std::istream &persons, std::istream *households = nullptr);

/// Writes `population.csv` and `households.csv` into `dir`.
void write_population_files(const PopulationFrame &frame, const std::filesystem::path &dir);

PopulationFrame read_population_files(const std::filesystem::path &person_file,
                                      const std::optional<std::filesystem::path> &household_file);

} // namespace frame_sampler
