#include "frame_sampler/popgen.hpp"

#include "frame_sampler/errors.hpp"
#include "frame_sampler/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace frame_sampler {

namespace {

std::discrete_distribution<int> size_sampler(const SizeDistribution &dist, int &offset) {
    return std::visit(
        [&offset](const auto &d) -> std::discrete_distribution<int> {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, FixedSize>) {
                offset = d.k;
                return std::discrete_distribution<int>{1.0};
            } else if constexpr (std::is_same_v<T, TruncatedPoissonSize>) {
                offset = d.min;
                std::vector<double> pmf;
                for (int k = d.min; k <= d.max; ++k) {
                    pmf.push_back(std::exp(k * std::log(d.lambda) - d.lambda - std::lgamma(k + 1.0)));
                }
                return std::discrete_distribution<int>(pmf.begin(), pmf.end());
            } else {
                offset = 1;
                return std::discrete_distribution<int>(d.weights.begin(), d.weights.end());
            }
        },
        dist);
}

} // namespace

void validate(const DemographyParams &params) {
    if (params.n_households < 1) {
        throw ConfigError("n_households must be positive");
    }
    double sum = 0.0;
    for (double p : params.age_band_probabilities) {
        if (!(p >= 0.0)) {
            throw ConfigError("age band probabilities must be non-negative");
        }
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-12) {
        throw ConfigError("age band probabilities must sum to 1");
    }
    if (!(params.p_female >= 0.0 && params.p_female <= 1.0)) {
        throw ConfigError("p_female must lie in [0, 1]");
    }
    std::visit(
        [](const auto &d) {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, FixedSize>) {
                if (d.k < 1) {
                    throw ConfigError("fixed household size must be at least 1");
                }
            } else if constexpr (std::is_same_v<T, TruncatedPoissonSize>) {
                if (!(d.lambda > 0.0) || d.min < 1 || d.max < d.min) {
                    throw ConfigError("truncated Poisson needs lambda > 0 and 1 <= min <= max");
                }
            } else {
                const double total = std::accumulate(d.weights.begin(), d.weights.end(), 0.0);
                if (d.weights.empty() || !(total > 0.0) ||
                    std::any_of(d.weights.begin(), d.weights.end(), [](double w) { return !(w >= 0.0); })) {
                    throw ConfigError("empirical size histogram needs non-negative weights with positive sum");
                }
            }
        },
        params.household_size);
}

void validate(const OutcomeModelParams &params) {
    if (!(params.sigma_alpha >= 0.0) || !(params.sigma_y >= 0.0) || !(params.sigma_t >= 0.0)) {
        throw ConfigError("outcome standard deviations must be non-negative");
    }
    if (!std::isfinite(params.mu) || !std::isfinite(params.beta1) || !std::isfinite(params.beta2)) {
        throw ConfigError("outcome mean parameters must be finite");
    }
}

PopulationFrame generate_demography(const DemographyParams &params, Rng &rng) {
    validate(params);
    int size_offset = 0;
    auto size_dist = size_sampler(params.household_size, size_offset);
    std::discrete_distribution<std::size_t> band_dist(params.age_band_probabilities.begin(),
                                                      params.age_band_probabilities.end());
    std::bernoulli_distribution female(params.p_female);

    std::vector<Household> households;
    std::vector<Person> persons;
    households.reserve(static_cast<std::size_t>(params.n_households));
    std::int64_t next_person = 1;
    for (int h = 0; h < params.n_households; ++h) {
        const HouseholdId hid{h + 1};
        const int size = size_dist(rng) + size_offset;
        Household hh{hid, {}, 0};
        const auto first = persons.size();
        for (int m = 0; m < size; ++m) {
            const auto band = band_dist(rng);
            const auto [lo, hi] = age_band_months[band];
            Person p;
            p.id = PersonId{next_person++};
            p.household_id = hid;
            p.age_months = std::uniform_int_distribution<int>{lo, hi}(rng);
            p.sex = female(rng) ? Sex::female : Sex::male;
            hh.member_ids.push_back(p.id);
            if (p.age_months < under50_months) {
                ++hh.n_total_under50;
            }
            persons.push_back(p);
        }
        // Oldest member heads the household; ids increase so the first oldest wins ties.
        auto head = std::max_element(persons.begin() + static_cast<std::ptrdiff_t>(first), persons.end(),
                                     [](const Person &a, const Person &b) { return a.age_months < b.age_months; });
        head->is_head = true;
        households.push_back(std::move(hh));
    }
    return PopulationFrame(std::move(households), std::move(persons));
}

PopulationFrame generate_person_outcomes(PopulationFrame frame, const std::string &outcome_name,
                                         const OutcomeModelParams &params, std::span<const TargetGroup> groups,
                                         Rng &rng) {
    validate(params);
    std::vector<double> values(frame.person_count(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t h = 0; h < frame.household_count(); ++h) {
        const double n_total = frame.households()[h].n_total_under50;
        const double alpha = normal_draw(rng, params.mean_at(n_total), params.sigma_alpha);
        for (auto i : frame.members(h)) {
            const auto &p = frame.persons()[i];
            const bool eligible = groups.empty() || std::any_of(groups.begin(), groups.end(), [&p](TargetGroup g) {
                                      return in_target_group(g, p);
                                  });
            if (eligible) {
                values[i] = normal_draw(rng, alpha, params.sigma_y);
            }
        }
    }
    frame.set_person_outcome(outcome_name, std::move(values));
    return frame;
}

PopulationFrame generate_household_consumption(PopulationFrame frame, const std::string &outcome_name,
                                               const OutcomeModelParams &params, Rng &rng) {
    validate(params);
    std::vector<double> values(frame.household_count());
    for (std::size_t h = 0; h < frame.household_count(); ++h) {
        const double n_total = frame.households()[h].n_total_under50;
        const double mean = params.mean_at(n_total);
        if (params.log_scale) {
            values[h] = std::exp(normal_draw(rng, mean, params.sigma_t));
        } else {
            values[h] = normal_draw(rng, mean, n_total * params.sigma_t);
        }
    }
    frame.set_household_outcome(outcome_name, std::move(values));
    return frame;
}

std::map<std::string, double> zero_noisy_coefficients(const PosteriorSummary &posterior,
                                                      std::span<const std::string> coefficient_names) {
    if (posterior.draws.empty()) {
        throw InputError("posterior summary has no parameters");
    }
    const auto length = posterior.draws.begin()->second.size();
    for (const auto &[name, draws] : posterior.draws) {
        if (draws.empty()) {
            throw InputError("posterior draws for '" + name + "' are empty");
        }
        if (draws.size() != length) {
            throw InputError("posterior draw arrays differ in length");
        }
        if (draws.size() < min_posterior_draws) {
            throw InputError("posterior for '" + name + "' has fewer than " + std::to_string(min_posterior_draws) +
                             " draws");
        }
    }
    for (const auto &name : coefficient_names) {
        if (posterior.draws.find(name) == posterior.draws.end()) {
            throw InputError("no posterior draws for coefficient '" + name + "'");
        }
    }

    std::map<std::string, double> point;
    const double probs[] = {0.25, 0.5, 0.75};
    for (const auto &[name, draws] : posterior.draws) {
        const auto q = stats::quantiles(draws, probs);
        const bool zeroable =
            std::find(coefficient_names.begin(), coefficient_names.end(), name) != coefficient_names.end();
        point[name] = (zeroable && q[0] <= 0.0 && q[2] >= 0.0) ? 0.0 : q[1];
    }
    return point;
}

PopulationConfig parse_population_config(const ConfigFile &config) {
    PopulationConfig out;
    auto &demo = out.demography;
    const std::string section = config.has_section("demography") ? "demography" : "";
    if (section == "demography") {
        config.require_known_keys("demography", {"n_households", "size_dist", "size_lambda", "size_min",
                                                 "size_max", "size_k", "size_weights", "age_probs", "p_female"});
    }

    demo.n_households = static_cast<int>(config.get_int(section, "n_households", demo.n_households));
    const auto dist = config.get_string(section, "size_dist", "truncated_poisson");
    if (dist == "fixed") {
        demo.household_size = FixedSize{static_cast<int>(config.get_int(section, "size_k", 4))};
    } else if (dist == "truncated_poisson") {
        TruncatedPoissonSize tp;
        tp.lambda = config.get_double(section, "size_lambda", tp.lambda);
        tp.min = static_cast<int>(config.get_int(section, "size_min", tp.min));
        tp.max = static_cast<int>(config.get_int(section, "size_max", tp.max));
        demo.household_size = tp;
    } else if (dist == "empirical") {
        demo.household_size = EmpiricalSize{config.get_doubles(section, "size_weights", {})};
    } else {
        throw ConfigError(config.source() + ": size_dist must be fixed, truncated_poisson or empirical, got '" +
                          dist + "'");
    }
    const auto probs = config.get_doubles(section, "age_probs",
                                          {demo.age_band_probabilities.begin(), demo.age_band_probabilities.end()});
    if (probs.size() != age_band_count) {
        throw ConfigError(config.source() + ": age_probs needs 5 values (0-5m, 6-59m, 5-14y, 15-49y, 50y+)");
    }
    std::copy(probs.begin(), probs.end(), demo.age_band_probabilities.begin());
    demo.p_female = config.get_double(section, "p_female", demo.p_female);
    validate(demo);

    for (const auto &block : config.sections_with_prefix("outcome.")) {
        config.require_known_keys(block,
                                  {"mu", "beta1", "beta2", "sigma_alpha", "sigma_y", "sigma_t", "log_scale"});
        OutcomeModelParams p;
        p.mu = config.get_double(block, "mu", 0.0);
        p.beta1 = config.get_double(block, "beta1", 0.0);
        p.beta2 = config.get_double(block, "beta2", 0.0);
        const bool household = config.get(block, "sigma_t").has_value() || config.get(block, "log_scale").has_value();
        if (household) {
            if (config.get(block, "sigma_alpha") || config.get(block, "sigma_y")) {
                throw ConfigError(config.source() + ": [" + block +
                                  "] mixes household keys (sigma_t, log_scale) with person keys");
            }
            p.level = OutcomeLevel::household;
            p.sigma_t = config.get_double(block, "sigma_t", 0.0);
            p.log_scale = config.get_bool(block, "log_scale", false);
        } else {
            p.sigma_alpha = config.get_double(block, "sigma_alpha", 0.0);
            p.sigma_y = config.get_double(block, "sigma_y", 0.0);
        }
        validate(p);
        out.outcomes.emplace_back(block.substr(std::string_view{"outcome."}.size()), p);
    }
    return out;
}

PopulationFrame generate_population(const PopulationConfig &config, std::span<const SurveyModuleSpec> modules,
                                    std::uint64_t seed) {
    Rng demo_rng(derive_seed(seed, "demography"));
    auto frame = generate_demography(config.demography, demo_rng);
    for (const auto &[name, params] : config.outcomes) {
        Rng rng(derive_seed(seed, "outcome." + name));
        if (params.level == OutcomeLevel::household) {
            frame = generate_household_consumption(std::move(frame), name, params, rng);
            continue;
        }
        std::vector<TargetGroup> groups;
        for (const auto &m : modules) {
            if (m.outcome_name == name && m.level == OutcomeLevel::person &&
                std::find(groups.begin(), groups.end(), m.target_group) == groups.end()) {
                groups.push_back(m.target_group);
            }
        }
        frame = generate_person_outcomes(std::move(frame), name, params, groups, rng);
    }
    return frame;
}

} // namespace frame_sampler
