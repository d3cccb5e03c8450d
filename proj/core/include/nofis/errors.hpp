#pragma once

#include <stdexcept>
#include <string>

namespace nofis {

/// Training produced a non-finite loss or gradient.
class TrainingDivergenceError : public std::runtime_error {
public:
    TrainingDivergenceError(const std::string& msg, long long step_index)
        : std::runtime_error(msg), step_index_(step_index) {}
    long long step_index() const { return step_index_; }

private:
    long long step_index_;
};

/// A transform produced non-finite values.
class NumericalOverflowError : public std::runtime_error {
public:
    NumericalOverflowError(const std::string& msg, int layer_index)
        : std::runtime_error(msg), layer_index_(layer_index) {}
    int layer_index() const { return layer_index_; }

private:
    int layer_index_;
};

/// Malformed checkpoint or cache file.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Checkpoint written by a newer format revision.
class UnsupportedVersionError : public FormatError {
public:
    using FormatError::FormatError;
};

/// Unknown benchmark problem name.
class CatalogError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Pilot sampling could not produce a usable threshold sequence.
class ScheduleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An iterative estimator failed to make progress.
class ConvergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Scaled-sampling extrapolation had too few usable points.
class ExtrapolationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A requested oracle mode does not apply to the problem.
class UnsupportedModeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A trial consumed more characteristic-function calls than it declared.
class BudgetExceededError : public std::runtime_error {
public:
    BudgetExceededError(const std::string& msg, long long declared, long long actual)
        : std::runtime_error(msg), declared_(declared), actual_(actual) {}
    long long declared() const { return declared_; }
    long long actual() const { return actual_; }
    long long overage() const { return actual_ - declared_; }

private:
    long long declared_;
    long long actual_;
};

/// Config schema violation; `path` names the offending field.
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& path, const std::string& msg)
        : std::runtime_error(path + ": " + msg), path_(path) {}
    const std::string& path() const { return path_; }

private:
    std::string path_;
};

}  // namespace nofis
