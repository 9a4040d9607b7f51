#pragma once

#include "cmtdp/errors.hpp"
#include "cmtdp/simulator.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cmtdp {

/// Process exit codes of the command-line tool.
enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,
    kExitUsage = 2,
    kExitMissingFile = 3,
    kExitMalformedLine = 4,
    kExitUnknownKey = 5,
    kExitBadValue = 6,
    kExitIo = 7,
    kExitInvalidInput = 8,
};

class ConfigError : public Error {
public:
    ConfigError(ExitCode code, const std::string& message) : Error(message), code_(code) {}
    ExitCode code() const noexcept { return code_; }

private:
    ExitCode code_;
};

/// Parses a flat `key = value` document ('#' starts a comment), then applies
/// `overrides` ("key=value" each) and validates. Throws ConfigError.
ExperimentConfig parse_config_text(std::string_view text, const std::vector<std::string>& overrides,
                                   const std::string& source_name = "<config>");

/// As parse_config_text, reading `path` when given.
ExperimentConfig parse_config(const std::optional<std::filesystem::path>& path,
                              const std::vector<std::string>& overrides);

/// Applies one key/value pair. Throws ConfigError (unknown key or bad value).
void set_config_value(ExperimentConfig& config, std::string_view key, std::string_view value);

/// Every key with its current value, one `key = value` line each.
std::string config_to_text(const ExperimentConfig& config);

/// Key reference with defaults, for --help.
std::string config_reference();

}  // namespace cmtdp
