/**
 * @file simulator.hpp
 * @brief Seeded policy-versus-market runs and their aggregation
 *
 * Regret is accumulated in expected form: at each step the gap between the
 * oracle revenue and the revenue of the posted price under the true target
 * utility. Replication r draws everything from streams keyed by
 * (seed, r, stream id), so two policies run under the same seed face the
 * same markets, covariates and outcome uniforms.
 */
#pragma once

#include "cmtdp/environment.hpp"
#include "cmtdp/estimators.hpp"
#include "cmtdp/policies.hpp"

#include <cstdint>
#include <vector>

namespace cmtdp {

struct ExperimentConfig {
    Family family = Family::linear;
    int d = 10;
    int K = 5;
    ScenarioKind kind = ScenarioKind::identical;
    double W = 2.0;
    double R = 1.0;
    double gamma = 0.5;
    double diff_fraction = 0.3;
    double perturb_magnitude = 0.5;
    int n_centers = 50;

    double noise_scale = 0.25;
    double noise_support = 1.0;
    std::size_t h_lookup_points = 0;

    int T = 2000;
    int replications = 10;

    PolicyKind policy = PolicyKind::cm_tdp_on;
    double switch_threshold = 1.0;
    bool accumulate = false;
    double l1_multiplier = 1.0;
    double ridge_multiplier = 1.0;
    double rkhs_alpha = 1.0;
    double rkhs_beta = 1.0;

    int n_K = 500;
    PriceRule offline_price_rule = PriceRule::oracle_noisy;
    PriceRule source_price_rule = PriceRule::oracle_noisy;

    int fit_max_iters = 3000;
    double fit_step_tolerance = 1e-9;
    double fit_objective_tolerance = 1e-13;

    std::uint64_t seed = 20250101;

    bool operator==(const ExperimentConfig&) const = default;

    /// Throws InvalidParameter describing the first violated constraint.
    void validate() const;
};

struct EpisodeError {
    int m;
    int t;  ///< first step priced with this estimate
    double error;
};

struct RunResult {
    std::vector<double> step_regret;
    std::vector<double> cumulative_regret;
    std::vector<double> prices;
    std::vector<EpisodeError> episode_errors;
    double price_cap = 0.0;
    int refit_count = 0;
    int skipped_refits = 0;
    int nonconverged_fits = 0;
    int phase_switches = 0;
    int switch_time = 0;  ///< 0 when no switch happened
    double wall_seconds = 0.0;
};

struct AggregateStats {
    std::vector<double> mean_cumulative;
    std::vector<double> se_cumulative;
    std::vector<double> final_regrets;
    double final_mean = 0.0;
    double final_se = 0.0;
    /// Replication-averaged estimation error per episode, aligned with `error_times`.
    std::vector<double> mean_episode_error;
    std::vector<int> error_times;
};

struct Comparison {
    double regret_reduction_pct = 0.0;
    double std_reduction_pct = 0.0;
    double speed_ratio = 1.0;
};

struct ReplicatedRun {
    AggregateStats candidate;
    AggregateStats baseline;
    Comparison comparison;
    std::vector<RunResult> candidate_runs;
    std::vector<RunResult> baseline_runs;
};

/// Builds the scenario of replication r (identical across policy kinds).
MarketSystem build_system(const ExperimentConfig& config, int replication);

/// Price map for a system: utility bound W (linear) or R + diff budget (kernel).
PriceMap make_price_map(const ExperimentConfig& config);

double expected_step_regret(const MarketSystem& system, const PriceMap& pm, const Vector& x,
                            double posted_price);

/// L2 distance (linear) or exact RKHS distance via Gram forms (kernel).
double estimation_error(const Estimate& est, const MarketSystem& system);

/// Monte-Carlo root mean squared prediction error over `probe_count` fresh covariates.
double l2_prediction_error(const Estimate& est, const MarketSystem& system, int probe_count,
                           Rng& rng);

RunResult run_single(const ExperimentConfig& config, int replication);

/// Run with the final policy exposed (for estimate dumps).
RunResult run_single(const ExperimentConfig& config, int replication, Estimate* final_estimate);

std::vector<RunResult> run_replications(const ExperimentConfig& config, bool parallel = false);

AggregateStats aggregate(const std::vector<RunResult>& runs);

Comparison compare(const AggregateStats& candidate, const AggregateStats& baseline, int horizon);

/// Candidate config plus the same config with `baseline_kind`, under paired seeds.
ReplicatedRun run_replicated(const ExperimentConfig& config,
                             PolicyKind baseline_kind = PolicyKind::single_market,
                             bool parallel = false);

}  // namespace cmtdp
