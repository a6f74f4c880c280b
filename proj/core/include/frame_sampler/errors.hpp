#pragma once

#include <stdexcept>
#include <string>

namespace frame_sampler {

/// Bad caller input: empty frames, out-of-range parameters, unknown ids.
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed or inconsistent configuration file.
class ConfigError : public InputError {
public:
    using InputError::InputError;
};

/// An estimator is undefined for the given sample (too few units, zero reference variance).
class EstimationError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Internal invariant broken, e.g. a selected person with zero inclusion probability.
class ConsistencyError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

} // namespace frame_sampler
