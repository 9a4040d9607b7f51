#include "cmtdp/policies.hpp"

#include "cmtdp/errors.hpp"

#include <bit>
#include <memory>

namespace cmtdp {

PolicyKind parse_policy_kind(const std::string& text) {
    if (text == "cm_tdp_on") {
        return PolicyKind::cm_tdp_on;
    }
    if (text == "cm_tdp_off") {
        return PolicyKind::cm_tdp_off;
    }
    if (text == "single_market") {
        return PolicyKind::single_market;
    }
    if (text == "oracle") {
        return PolicyKind::oracle;
    }
    throw InvalidParameter("unknown policy kind: " + text);
}

std::string to_string(PolicyKind kind) {
    switch (kind) {
    case PolicyKind::cm_tdp_on:
        return "cm_tdp_on";
    case PolicyKind::cm_tdp_off:
        return "cm_tdp_off";
    case PolicyKind::single_market:
        return "single_market";
    case PolicyKind::oracle:
        return "oracle";
    }
    return "unknown";
}

EpisodePosition episode_of(int t) {
    if (t < 1) {
        throw InvalidParameter("time index must be >= 1");
    }
    const auto ut = static_cast<unsigned>(t);
    const int m = std::bit_width(ut);
    return {m, std::has_single_bit(ut)};
}

int episode_start(int m) { return 1 << (m - 1); }

int episode_count(int T) { return T < 1 ? 0 : episode_of(T).m; }

Policy::Policy(PolicyKind kind, const MarketSystem& system, const PriceMap& pm,
               PolicyOptions options, std::vector<Observation> offline_log)
    : kind_(kind),
      family_(system.family()),
      dim_(system.covariate_dim),
      num_sources_(system.num_sources()),
      truth_(system.target),
      noise_(system.noise),
      pm_(pm),
      options_(std::move(options)),
      W_(pm.utility_bound()),
      gamma_(0.5) {
    options_.fit.validate();
    if (options_.switch_threshold <= 0.0) {
        throw InvalidParameter("switch threshold must be positive");
    }
    if (const auto* lin = std::get_if<LinearMarket>(&system.target)) {
        W_ = lin->W;
        estimate_ = LinearEstimate::zero(dim_);
    } else {
        gamma_ = std::get<KernelMarket>(system.target).gamma;
        estimate_ = KernelEstimate::zero(dim_, gamma_);
    }
    u_F_ = regularity_constants(noise_, pm_.price_cap(), pm_.utility_bound()).u_F;

    if (kind_ == PolicyKind::cm_tdp_off) {
        if (offline_log.empty()) {
            throw InvalidInput("cm_tdp_off requires a nonempty offline source log");
        }
        offline_size_ = offline_log.size();
        offline_aggregate_ = fit_aggregate(offline_log);
        // Cached for the boundary refits; episode 1 still prices at h(0).
        track(*offline_aggregate_);
    }
}

double Policy::post_price(const Vector& x) const {
    if (kind_ == PolicyKind::oracle) {
        return pm_.price_of(mean_utility(truth_, x));
    }
    return pm_.price_of(predict(estimate_, x));
}

void Policy::observe(const Observation& obs) {
    if (obs.time < 1 || obs.time < clock_) {
        throw SequencingError("observation at t=" + std::to_string(obs.time) +
                              " arrived after t=" + std::to_string(clock_));
    }
    if (obs.market_index < 0 || obs.market_index > num_sources_) {
        throw InvalidInput("market index out of range");
    }
    if (obs.x.size() != dim_) {
        throw InvalidInput("covariate dimension mismatch");
    }
    clock_ = obs.time;
    if (kind_ == PolicyKind::oracle) {
        return;
    }
    if (obs.market_index != 0 && kind_ != PolicyKind::cm_tdp_on) {
        return;
    }
    const auto m = static_cast<std::size_t>(episode_of(obs.time).m);
    if (buffers_.size() <= m) {
        buffers_.resize(m + 1, std::vector<std::vector<Observation>>(
                                   static_cast<std::size_t>(num_sources_ + 1)));
    }
    buffers_[m][static_cast<std::size_t>(obs.market_index)].push_back(obs);
}

std::size_t Policy::buffer_size(int episode, int market) const {
    const auto m = static_cast<std::size_t>(episode);
    if (episode < 0 || market < 0 || market > num_sources_ || m >= buffers_.size()) {
        return 0;
    }
    return buffers_[m][static_cast<std::size_t>(market)].size();
}

std::vector<Observation> Policy::collect(int market, int m) const {
    std::vector<Observation> out;
    const int first = options_.accumulate ? 1 : m - 1;
    for (int e = first; e <= m - 1; ++e) {
        const auto idx = static_cast<std::size_t>(e);
        if (idx < buffers_.size()) {
            const auto& buf = buffers_[idx][static_cast<std::size_t>(market)];
            out.insert(out.end(), buf.begin(), buf.end());
        }
    }
    return out;
}

std::vector<Observation> Policy::collect_sources(int m) {
    ++source_reads_;
    std::vector<Observation> pooled;
    for (int k = 1; k <= num_sources_; ++k) {
        auto part = collect(k, m);
        pooled.insert(pooled.end(), part.begin(), part.end());
    }
    return pooled;
}

Estimate Policy::fit_aggregate(const std::vector<Observation>& pooled) const {
    FitConfig cfg = options_.fit;
    if (family_ == Family::linear) {
        cfg.l1_ball_W = W_;
        return fit_mle_aggregate(pooled, noise_, cfg);
    }
    return fit_krr_aggregate(pooled, noise_, gamma_, cfg);
}

Estimate Policy::fit_solo(const std::vector<Observation>& target) const {
    return fit_aggregate(target);
}

Estimate Policy::fit_debias(const std::vector<Observation>& target,
                            const Estimate& aggregate) const {
    FitConfig cfg = options_.fit;
    const int n0 = static_cast<int>(target.size());
    if (family_ == Family::linear) {
        cfg.l1_penalty = default_l1_penalty(n0, dim_, u_F_, options_.l1_multiplier);
        return fit_mle_debias(target, std::get<LinearEstimate>(aggregate), noise_, cfg);
    }
    auto base = std::make_shared<const KernelEstimate>(std::get<KernelEstimate>(aggregate));
    return fit_krr_debias(target, std::move(base), noise_, gamma_, cfg);
}

void Policy::track(const Estimate& est) {
    const bool converged =
        std::visit([](const auto& e) { return e.diagnostics.converged; }, est);
    if (!converged) {
        ++nonconverged_fits_;
    }
}

void Policy::refit_on_boundary(int m) {
    if (m < 2) {
        throw InvalidParameter("refits happen at boundaries of episodes m >= 2");
    }
    if (kind_ == PolicyKind::oracle) {
        return;
    }
    const std::vector<Observation> target = collect(0, m);

    if (kind_ == PolicyKind::cm_tdp_on) {
        const std::vector<Observation> pooled = collect_sources(m);
        if (target.empty() || pooled.empty()) {
            ++skipped_refits_;
            return;
        }
        const Estimate aggregate = fit_aggregate(pooled);
        track(aggregate);
        estimate_ = fit_debias(target, aggregate);
        track(estimate_);
        ++refit_count_;
        return;
    }

    if (target.empty()) {
        ++skipped_refits_;
        return;
    }

    if (kind_ == PolicyKind::cm_tdp_off && phase_ == Phase::transfer) {
        std::size_t cumulative = 0;
        for (int e = 1; e < m; ++e) {
            cumulative += buffer_size(e, 0);
        }
        if (static_cast<double>(cumulative) >=
            options_.switch_threshold * static_cast<double>(offline_size_)) {
            phase_ = Phase::solo;
            switch_episode_ = m;
            ++phase_switches_;
        } else {
            estimate_ = fit_debias(target, *offline_aggregate_);
            track(estimate_);
            ++refit_count_;
            return;
        }
    }

    estimate_ = fit_solo(target);
    track(estimate_);
    ++refit_count_;
}

}  // namespace cmtdp
