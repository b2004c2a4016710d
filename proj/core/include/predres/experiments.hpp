// SPDX-License-Identifier: Apache-2.0
//
// Command-line experiments: configuration, dispatch and file output.
//
// A configuration is a JSON object
//   {"experiment": "...", "output_dir": "...", "workers": 4,
//    "parameters": {"key": value, ...}}
// whose parameter values are kept as text and parsed per key. Lists are
// JSON arrays or comma-separated text; "lo:hi:step" expands to a range.
#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace predres {

struct ExperimentConfig
{
    std::string experiment;
    std::map<std::string, std::string> parameters;
    std::string output_dir = "predres-out";
    /// Falls back to PREDRES_WORKERS, then 1.
    std::optional<std::size_t> workers;
};

struct ExperimentInfo
{
    std::string name;
    std::string description;
    /// Valid parameter keys with their default values.
    std::vector<std::pair<std::string, std::string>> parameters;
};

const std::vector<ExperimentInfo>& list_experiments();

/// Throws std::invalid_argument on malformed JSON or unknown top-level keys.
ExperimentConfig parse_experiment_config(const std::string& json_text);

/// Applies `key=value`. The keys experiment, output_dir and workers set the
/// top-level fields; anything else is a parameter.
void apply_override(ExperimentConfig& config, const std::string& assignment);

/// Throws std::invalid_argument for an unknown experiment, or for unknown
/// parameter keys with the list of valid ones.
void validate(const ExperimentConfig& config);

/// Worker count from the config, PREDRES_WORKERS, or 1.
std::size_t resolve_workers(const ExperimentConfig& config);

struct RunReport
{
    std::string output_dir;
    /// File names written, relative to output_dir.
    std::vector<std::string> files;
};

/// Runs the experiment and writes its files. Output is staged next to
/// output_dir and only moved into place once every file is written, so a
/// failed run leaves nothing behind. Throws on invalid config or failure.
RunReport run_experiment(const ExperimentConfig& config);

} // namespace predres
