#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace scoreopt {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Precondition violated by the caller (shape mismatch, bad range, ...).
struct ContractViolation : Error {
    using Error::Error;
};

/// Bad user-supplied configuration (spec files, CLI arguments).
struct ConfigError : Error {
    using Error::Error;
};

/// A test oracle produced a non-finite or unusable value.
struct OracleFailure : Error {
    using Error::Error;
};

struct TrainingDiverged : Error {
    std::size_t iteration;
    TrainingDiverged(std::size_t it, const std::string& what)
        : Error("training diverged at iteration " + std::to_string(it) + ": " + what),
          iteration(it) {}
};

struct PurificationDiverged : Error {
    std::size_t step;
    explicit PurificationDiverged(std::size_t s)
        : Error("purification produced a non-finite iterate at step " + std::to_string(s)),
          step(s) {}
};

struct AttackAborted : Error {
    std::size_t iteration;
    AttackAborted(std::size_t it, const std::string& what)
        : Error("attack aborted at iteration " + std::to_string(it) + ": " + what),
          iteration(it) {}
};

struct IoError : Error {
    explicit IoError(const std::string& path, const std::string& what)
        : Error(what + ": " + path) {}
};

}  // namespace scoreopt
