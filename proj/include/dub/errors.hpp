#pragma once

#include <stdexcept>
#include <string>

namespace dub {

// Bad dimensions, bad config keys, mismatched module wiring.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// A pipeline stage cannot proceed (missing artifact, degenerate input, diverged fit).
struct PipelineError : std::runtime_error {
    explicit PipelineError(const std::string& msg) : std::runtime_error(msg) {}
};

// File format / filesystem failures.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace dub
