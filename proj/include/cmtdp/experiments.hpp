/**
 * @file experiments.hpp
 * @brief File-producing experiment drivers behind the command-line tool
 *
 * Every driver writes plain CSV curves (one per policy), a summary CSV and an
 * SVG per panel into an output directory. Inputs are fully described by the
 * ExperimentConfig, so repeated calls produce byte-identical files.
 */
#pragma once

#include "cmtdp/report.hpp"
#include "cmtdp/simulator.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace cmtdp {

struct DriverOptions {
    bool parallel = false;
    /// Write the final estimate of every replication under <out>/estimates.
    bool dump_estimates = false;
    /// Progress lines go here when non-null.
    std::ostream* progress = nullptr;
};

struct DriverOutput {
    std::vector<SummaryRow> rows;
    std::vector<std::filesystem::path> files;
    int panels = 0;
};

/// Candidate policy plus the single-market baseline under paired seeds.
DriverOutput run_experiment(const ExperimentConfig& config, const std::filesystem::path& out,
                            const DriverOptions& options = {});

const std::vector<std::string>& preset_names();

/// Sweeps of the named preset on top of `base` (horizon, replications, seed,
/// solver settings). Throws InvalidParameter for an unknown name.
DriverOutput run_preset(const std::string& name, const ExperimentConfig& base,
                        const std::filesystem::path& out, const DriverOptions& options = {});

/// Final estimate of one replication, written to <out>/estimate_rep<r>.txt.
std::filesystem::path dump_estimate(const ExperimentConfig& config, int replication,
                                    const std::filesystem::path& out);

/// Scenario label used in summary rows, e.g. "linear_sparse_diff".
std::string scenario_label(const ExperimentConfig& config);

}  // namespace cmtdp
