#include "frame_sampler/population_io.hpp"

#include "frame_sampler/csv.hpp"
#include "frame_sampler/errors.hpp"

#include <fstream>
#include <limits>
#include <unordered_map>

namespace frame_sampler {

namespace {

constexpr std::size_t person_fixed_columns = 5;

std::ofstream open_out(const std::filesystem::path &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw InputError("cannot write " + path.string());
    }
    return out;
}

} // namespace

void write_person_csv(const PopulationFrame &frame, std::ostream &out) {
    std::vector<std::string> header{"household_id", "person_id", "age_months", "sex", "is_head"};
    for (const auto &[name, values] : frame.person_outcomes()) {
        header.push_back(name);
    }
    csv::write_row(out, header);

    std::vector<std::string> fields;
    for (std::size_t i = 0; i < frame.person_count(); ++i) {
        const auto &p = frame.persons()[i];
        fields.clear();
        fields.push_back(std::to_string(to_int(p.household_id)));
        fields.push_back(std::to_string(to_int(p.id)));
        fields.push_back(std::to_string(p.age_months));
        fields.emplace_back(p.sex == Sex::male ? "M" : "F");
        fields.emplace_back(p.is_head ? "1" : "0");
        for (const auto &[name, values] : frame.person_outcomes()) {
            fields.push_back(csv::format_double(values[i]));
        }
        csv::write_row(out, fields);
    }
}

void write_household_csv(const PopulationFrame &frame, std::ostream &out) {
    std::vector<std::string> header{"household_id"};
    for (const auto &[name, values] : frame.household_outcomes()) {
        header.push_back(name);
    }
    csv::write_row(out, header);

    std::vector<std::string> fields;
    for (std::size_t h = 0; h < frame.household_count(); ++h) {
        fields.clear();
        fields.push_back(std::to_string(to_int(frame.households()[h].id)));
        for (const auto &[name, values] : frame.household_outcomes()) {
            fields.push_back(csv::format_double(values[h]));
        }
        csv::write_row(out, fields);
    }
}

PopulationFrame read_population(std::istream &persons_in, std::istream *households_in) {
    const auto person_table = csv::read_table(persons_in, "population csv");
    const std::vector<std::string> expected{"household_id", "person_id", "age_months", "sex", "is_head"};
    if (person_table.header.size() < person_fixed_columns ||
        !std::equal(expected.begin(), expected.end(), person_table.header.begin())) {
        throw InputError("population csv: header must start with "
                         "household_id,person_id,age_months,sex,is_head");
    }

    std::vector<Person> persons;
    persons.reserve(person_table.rows.size());
    for (const auto &row : person_table.rows) {
        Person p;
        p.household_id = HouseholdId{csv::parse_integer(row[0])};
        p.id = PersonId{csv::parse_integer(row[1])};
        p.age_months = static_cast<int>(csv::parse_integer(row[2]));
        if (row[3] == "M") {
            p.sex = Sex::male;
        } else if (row[3] == "F") {
            p.sex = Sex::female;
        } else {
            throw InputError("population csv: sex must be M or F, got '" + row[3] + "'");
        }
        if (row[4] != "0" && row[4] != "1") {
            throw InputError("population csv: is_head must be 0 or 1, got '" + row[4] + "'");
        }
        p.is_head = row[4] == "1";
        persons.push_back(p);
    }

    std::vector<Household> households;
    std::unordered_map<std::int64_t, std::size_t> position;
    std::optional<csv::Table> household_table;
    if (households_in != nullptr) {
        household_table = csv::read_table(*households_in, "household csv");
        if (household_table->header.empty() || household_table->header.front() != "household_id") {
            throw InputError("household csv: first column must be household_id");
        }
        for (const auto &row : household_table->rows) {
            const auto id = csv::parse_integer(row[0]);
            position.try_emplace(id, households.size());
            households.push_back(Household{HouseholdId{id}, {}, 0});
        }
    }
    for (const auto &p : persons) {
        auto it = position.find(to_int(p.household_id));
        if (it == position.end()) {
            if (households_in != nullptr) {
                continue; // orphan
            }
            it = position.emplace(to_int(p.household_id), households.size()).first;
            households.push_back(Household{p.household_id, {}, 0});
        }
        auto &hh = households[it->second];
        hh.member_ids.push_back(p.id);
        if (p.age_months >= 0 && p.age_months < under50_months) {
            ++hh.n_total_under50;
        }
    }

    PopulationFrame frame(std::move(households), std::move(persons));
    for (std::size_t c = person_fixed_columns; c < person_table.header.size(); ++c) {
        std::vector<double> values;
        values.reserve(person_table.rows.size());
        for (const auto &row : person_table.rows) {
            values.push_back(csv::parse_double(row[c]));
        }
        frame.set_person_outcome(person_table.header[c], std::move(values));
    }
    if (household_table) {
        for (std::size_t c = 1; c < household_table->header.size(); ++c) {
            std::vector<double> values;
            values.reserve(household_table->rows.size());
            for (const auto &row : household_table->rows) {
                values.push_back(csv::parse_double(row[c]));
            }
            frame.set_household_outcome(household_table->header[c], std::move(values));
        }
    }
    return frame;
}

void write_population_files(const PopulationFrame &frame, const std::filesystem::path &dir) {
    std::filesystem::create_directories(dir);
    auto persons = open_out(dir / "population.csv");
    write_person_csv(frame, persons);
    auto households = open_out(dir / "households.csv");
    write_household_csv(frame, households);
}

PopulationFrame read_population_files(const std::filesystem::path &person_file,
                                      const std::optional<std::filesystem::path> &household_file) {
    std::ifstream persons(person_file, std::ios::binary);
    if (!persons) {
        throw InputError("cannot read population file " + person_file.string());
    }
    if (!household_file) {
        return read_population(persons);
    }
    std::ifstream households(*household_file, std::ios::binary);
    if (!households) {
        throw InputError("cannot read household file " + household_file->string());
    }
    return read_population(persons, &households);
}

} // namespace frame_sampler
