/**
 * @file policies.hpp
 * @brief Doubling-episode pricing policies
 *
 * Time t = 1, 2, ... is split into episodes m = 1, 2, ... covering
 * [2^{m-1}, 2^m - 1]. Estimates change only at episode boundaries and are
 * fitted on the preceding episode's observations:
 *
 *   cm_tdp_on      aggregate over all sources, then L1 / RKHS-penalized
 *                  correction on the target
 *   cm_tdp_off     correction around a fixed aggregate of an offline source
 *                  log, until target samples reach switch_threshold * |log|;
 *                  target-only fits afterwards
 *   single_market  target-only fits throughout
 *   oracle         prices with the true target utility
 */
#pragma once

#include "cmtdp/environment.hpp"
#include "cmtdp/estimators.hpp"
#include "cmtdp/noise_link.hpp"

#include <optional>
#include <string>
#include <vector>

namespace cmtdp {

enum class PolicyKind { cm_tdp_on, cm_tdp_off, single_market, oracle };
enum class Phase { transfer, solo };

PolicyKind parse_policy_kind(const std::string& text);
std::string to_string(PolicyKind kind);

struct EpisodePosition {
    int m;
    bool is_boundary;
    bool operator==(const EpisodePosition&) const = default;
};

/// m = floor(log2 t) + 1; boundary iff t = 2^{m-1}. Requires t >= 1.
EpisodePosition episode_of(int t);

/// First time step of episode m.
int episode_start(int m);

/// Number of episodes touched by the horizon [1, T].
int episode_count(int T);

struct PolicyOptions {
    FitConfig fit;
    double l1_multiplier = 1.0;
    double switch_threshold = 1.0;
    /// Refit on all past episodes instead of the preceding one only.
    bool accumulate = false;
};

class Policy {
public:
    /// `offline_log` is used by cm_tdp_off only; the oracle reads the true
    /// target utility from `system`.
    Policy(PolicyKind kind, const MarketSystem& system, const PriceMap& pm,
           PolicyOptions options, std::vector<Observation> offline_log = {});

    PolicyKind kind() const noexcept { return kind_; }

    double post_price(const Vector& x) const;

    /// Buffers `obs` for its episode. Throws SequencingError if time runs backwards.
    void observe(const Observation& obs);

    /// Refit at the start of episode m >= 2.
    void refit_on_boundary(int m);

    const Estimate& current_estimate() const noexcept { return estimate_; }
    Phase phase() const noexcept { return phase_; }
    /// Episode whose boundary flipped cm_tdp_off to solo learning.
    std::optional<int> switch_episode() const noexcept { return switch_episode_; }
    int phase_switches() const noexcept { return phase_switches_; }
    int refit_count() const noexcept { return refit_count_; }
    int skipped_refits() const noexcept { return skipped_refits_; }
    int nonconverged_fits() const noexcept { return nonconverged_fits_; }
    /// Number of refits that read source-market buffers.
    int source_buffer_reads() const noexcept { return source_reads_; }
    double l1_penalty_scale() const noexcept { return u_F_; }

    /// Observations held for (episode, market).
    std::size_t buffer_size(int episode, int market) const;

private:
    std::vector<Observation> collect(int market, int m) const;
    std::vector<Observation> collect_sources(int m);
    Estimate fit_solo(const std::vector<Observation>& target) const;
    Estimate fit_debias(const std::vector<Observation>& target, const Estimate& aggregate) const;
    Estimate fit_aggregate(const std::vector<Observation>& pooled) const;
    void track(const Estimate& est);

    PolicyKind kind_;
    Family family_;
    int dim_;
    int num_sources_;
    Market truth_;
    NoiseModel noise_;
    PriceMap pm_;
    PolicyOptions options_;
    double W_;
    double gamma_;
    double u_F_ = 0.0;

    Estimate estimate_;
    std::optional<Estimate> offline_aggregate_;
    std::size_t offline_size_ = 0;
    Phase phase_ = Phase::transfer;
    std::optional<int> switch_episode_;
    int phase_switches_ = 0;

    /// buffers_[m][market]
    std::vector<std::vector<std::vector<Observation>>> buffers_;
    int clock_ = 0;
    int refit_count_ = 0;
    int skipped_refits_ = 0;
    int nonconverged_fits_ = 0;
    int source_reads_ = 0;
};

}  // namespace cmtdp
