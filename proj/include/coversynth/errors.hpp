#pragma once

#include <stdexcept>
#include <string>

namespace coversynth {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid parameters / unusable inputs; the CLI maps this to exit code 2.
struct ConfigError : Error {
    using Error::Error;
};

// A pipeline stage failed mid-run; the CLI maps this to exit code 3.
struct StageError : Error {
    StageError(const std::string& stage, const std::string& message)
        : Error(stage + ": " + message), stage_name(stage) {}
    std::string stage_name;
};

}  // namespace coversynth
