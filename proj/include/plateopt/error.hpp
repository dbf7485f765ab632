#pragma once

#include <stdexcept>
#include <string>

namespace plateopt {

// Invalid user input: malformed config, bad preconditions on arguments,
// schema mismatches. The CLI maps these to exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Numerical or model failure (singular system, no overlap, ...). Exit code 1.
class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A singular stiffness system. Carries the number of unconstrained modes
// detected during factorization.
class SingularSystemError : public ModelError {
public:
    SingularSystemError(const std::string& what, int modes)
        : ModelError(what), mode_count_(modes) {}
    int mode_count() const noexcept { return mode_count_; }

private:
    int mode_count_;
};

} // namespace plateopt
