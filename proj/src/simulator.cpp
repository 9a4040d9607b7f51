#include "cmtdp/simulator.hpp"

#include "cmtdp/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <thread>

namespace cmtdp {

namespace {

enum Stream : std::uint64_t {
    kScenario = 0,
    kTargetCovariates = 1,
    kTargetOutcomes = 2,
    kSources = 3,
    kOfflineLog = 4,
};

/// Kernel expansion flattened into (points, coefficients) layers.
struct Expansion {
    std::vector<const Matrix*> points;
    std::vector<Vector> coefficients;
    double gamma = 0.5;

    void add(const KernelEstimate& est, double sign) {
        if (est.alpha.size() > 0) {
            points.push_back(&est.anchors);
            coefficients.push_back(sign * est.alpha);
        }
        if (est.base) {
            add(*est.base, sign);
        }
    }

    double squared_norm() const {
        Eigen::Index total = 0;
        for (const Matrix* p : points) {
            total += p->rows();
        }
        if (total == 0) {
            return 0.0;
        }
        const auto dim = points.front()->cols();
        Matrix all(total, dim);
        Vector coef(total);
        Eigen::Index offset = 0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            const auto rows = points[i]->rows();
            all.middleRows(offset, rows) = *points[i];
            coef.segment(offset, rows) = coefficients[i];
            offset += rows;
        }
        constexpr Eigen::Index block = 512;
        double acc = 0.0;
        for (Eigen::Index start = 0; start < total; start += block) {
            const Eigen::Index rows = std::min(block, total - start);
            const Matrix gram = rbf_gram(all.middleRows(start, rows), all, gamma);
            acc += coef.segment(start, rows).dot(gram * coef);
        }
        return std::max(0.0, acc);
    }
};

FitConfig fit_config_from(const ExperimentConfig& config) {
    FitConfig fit;
    fit.max_iters = config.fit_max_iters;
    fit.step_tolerance = config.fit_step_tolerance;
    fit.objective_tolerance = config.fit_objective_tolerance;
    fit.rkhs_alpha = config.rkhs_alpha;
    fit.rkhs_beta = config.rkhs_beta;
    fit.ridge_multiplier = config.ridge_multiplier;
    fit.similarity_H = config.kind == ScenarioKind::sparse_diff ? config.diff_fraction : 0.0;
    return fit;
}

}  // namespace

void ExperimentConfig::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) {
            throw InvalidParameter(what);
        }
    };
    require(d >= 1, "scenario.d must be >= 1");
    require(K >= 1, "scenario.K must be >= 1");
    require(W > 0.0, "scenario.W must be positive");
    require(R > 0.0, "scenario.R must be positive");
    require(gamma > 0.0, "scenario.gamma must be positive");
    require(diff_fraction >= 0.0 && diff_fraction <= 1.0, "scenario.diff_fraction must lie in [0, 1]");
    require(perturb_magnitude >= 0.0, "scenario.perturb_magnitude must be nonnegative");
    require(n_centers >= 1, "scenario.n_centers must be >= 1");
    require(noise_scale > 0.0, "noise.scale must be positive");
    require(noise_support > 0.0, "noise.support_bound must be positive");
    require(h_lookup_points == 0 || h_lookup_points >= 2, "noise.h_lookup_points must be 0 or >= 2");
    require(T >= 1, "run.T must be >= 1");
    require(replications >= 1, "run.replications must be >= 1");
    require(switch_threshold > 0.0, "policy.switch_threshold must be positive");
    require(l1_multiplier >= 0.0, "policy.l1_multiplier must be nonnegative");
    require(ridge_multiplier >= 0.0, "policy.ridge_multiplier must be nonnegative");
    require(rkhs_alpha > 0.5, "fit.rkhs_alpha must exceed 1/2");
    require(rkhs_beta > 0.0 && rkhs_beta <= 1.0, "fit.rkhs_beta must lie in (0, 1]");
    require(n_K >= K, "offline.n_K must be >= scenario.K");
    require(fit_max_iters >= 1, "fit.max_iters must be >= 1");
    require(fit_step_tolerance > 0.0, "fit.step_tolerance must be positive");
    require(fit_objective_tolerance > 0.0, "fit.objective_tolerance must be positive");
}

MarketSystem build_system(const ExperimentConfig& config, int replication) {
    Rng rng = make_stream(config.seed, static_cast<std::uint64_t>(replication), kScenario);
    const NoiseModel noise = make_logistic(config.noise_scale, config.noise_support);
    if (config.family == Family::linear) {
        return build_linear_scenario(config.d, config.K, config.kind, config.W,
                                     config.diff_fraction, config.perturb_magnitude, noise, rng);
    }
    return build_rkhs_scenario(config.d, config.K, config.kind, config.R, config.diff_fraction,
                               config.gamma, config.n_centers, noise, rng);
}

PriceMap make_price_map(const ExperimentConfig& config) {
    const NoiseModel noise = make_logistic(config.noise_scale, config.noise_support);
    double bound = config.W;
    if (config.family == Family::kernel) {
        // |g(x)| <= ||g||_H for the unit-diagonal RBF kernel.
        bound = config.R + (config.kind == ScenarioKind::sparse_diff ? config.diff_fraction : 0.0);
    }
    PriceMapOptions options;
    options.lookup_points = config.h_lookup_points;
    return PriceMap(noise, bound, options);
}

double expected_step_regret(const MarketSystem& system, const PriceMap& pm, const Vector& x,
                            double posted_price) {
    if (posted_price < 0.0) {
        throw InvalidParameter("posted price must be nonnegative");
    }
    const double g = mean_utility(system.target, x);
    const double best = pm.price_of(g);
    const double gap = system.noise.expected_revenue(g, best) -
                       system.noise.expected_revenue(g, posted_price);
    return std::max(0.0, gap);
}

double estimation_error(const Estimate& est, const MarketSystem& system) {
    if (const auto* lin = std::get_if<LinearEstimate>(&est)) {
        const auto* truth = std::get_if<LinearMarket>(&system.target);
        if (truth == nullptr) {
            throw InvalidInput("linear estimate against a kernel market");
        }
        return (lin->effective() - truth->beta).norm();
    }
    const auto* truth = std::get_if<KernelMarket>(&system.target);
    if (truth == nullptr) {
        throw InvalidInput("kernel estimate against a linear market");
    }
    const auto& kest = std::get<KernelEstimate>(est);
    Expansion diff;
    diff.gamma = truth->gamma;
    diff.points.push_back(&truth->centers);
    diff.coefficients.push_back(-truth->weights);
    diff.add(kest, 1.0);
    return std::sqrt(diff.squared_norm());
}

double l2_prediction_error(const Estimate& est, const MarketSystem& system, int probe_count,
                           Rng& rng) {
    if (probe_count < 1) {
        throw InvalidParameter("probe_count must be >= 1");
    }
    double acc = 0.0;
    for (int i = 0; i < probe_count; ++i) {
        const Vector x = sample_covariate(system.covariate_dim, rng);
        const double diff = predict(est, x) - mean_utility(system.target, x);
        acc += diff * diff;
    }
    return std::sqrt(acc / probe_count);
}

RunResult run_single(const ExperimentConfig& config, int replication) {
    return run_single(config, replication, nullptr);
}

RunResult run_single(const ExperimentConfig& config, int replication, Estimate* final_estimate) {
    config.validate();
    const auto started = std::chrono::steady_clock::now();
    const auto rep = static_cast<std::uint64_t>(replication);
    const MarketSystem system = build_system(config, replication);
    const PriceMap pm = make_price_map(config);

    PolicyOptions options;
    options.fit = fit_config_from(config);
    options.l1_multiplier = config.l1_multiplier;
    options.switch_threshold = config.switch_threshold;
    options.accumulate = config.accumulate;

    std::vector<Observation> offline;
    if (config.policy == PolicyKind::cm_tdp_off) {
        Rng log_rng = make_stream(config.seed, rep, kOfflineLog);
        offline = generate_offline_log(system, pm, config.n_K, config.offline_price_rule, log_rng);
    }
    Policy policy(config.policy, system, pm, options, std::move(offline));

    Rng covariates = make_stream(config.seed, rep, kTargetCovariates);
    Rng outcomes = make_stream(config.seed, rep, kTargetOutcomes);
    Rng sources = make_stream(config.seed, rep, kSources);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const bool stream_sources = config.policy == PolicyKind::cm_tdp_on;

    RunResult result;
    result.price_cap = pm.price_cap();
    const auto horizon = static_cast<std::size_t>(config.T);
    result.step_regret.reserve(horizon);
    result.cumulative_regret.reserve(horizon);
    result.prices.reserve(horizon);
    double cumulative = 0.0;

    for (int t = 1; t <= config.T; ++t) {
        const EpisodePosition pos = episode_of(t);
        if (pos.is_boundary) {
            if (pos.m >= 2) {
                policy.refit_on_boundary(pos.m);
            }
            const double err = config.policy == PolicyKind::oracle
                                   ? 0.0
                                   : estimation_error(policy.current_estimate(), system);
            result.episode_errors.push_back({pos.m, t, err});
        }

        Observation obs;
        obs.market_index = 0;
        obs.time = t;
        obs.x = sample_covariate(config.d, covariates);
        obs.price = policy.post_price(obs.x);
        const double regret = expected_step_regret(system, pm, obs.x, obs.price);
        const double g = mean_utility(system.target, obs.x);
        obs.sale = outcome_from_uniform(g, system.noise, obs.price, unit(outcomes));
        result.prices.push_back(obs.price);
        result.step_regret.push_back(regret);
        cumulative += regret;
        result.cumulative_regret.push_back(cumulative);
        policy.observe(obs);

        if (stream_sources) {
            for (int k = 1; k <= system.num_sources(); ++k) {
                const Market& market = system.market(k);
                Observation src;
                src.market_index = k;
                src.time = t;
                src.x = sample_covariate(config.d, sources);
                src.price = source_price(market, pm, src.x, config.source_price_rule, sources);
                src.sale = outcome_from_uniform(mean_utility(market, src.x), system.noise,
                                                src.price, unit(sources));
                policy.observe(src);
            }
        }
    }

    result.refit_count = policy.refit_count();
    result.skipped_refits = policy.skipped_refits();
    result.nonconverged_fits = policy.nonconverged_fits();
    result.phase_switches = policy.phase_switches();
    if (policy.switch_episode()) {
        result.switch_time = episode_start(*policy.switch_episode());
    }
    if (final_estimate != nullptr) {
        *final_estimate = policy.current_estimate();
    }
    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
}

std::vector<RunResult> run_replications(const ExperimentConfig& config, bool parallel) {
    config.validate();
    std::vector<RunResult> runs(static_cast<std::size_t>(config.replications));
    if (!parallel) {
        for (int r = 0; r < config.replications; ++r) {
            runs[static_cast<std::size_t>(r)] = run_single(config, r);
        }
        return runs;
    }
    const int workers = std::max(1U, std::thread::hardware_concurrency());
    for (int start = 0; start < config.replications; start += workers) {
        const int stop = std::min(config.replications, start + workers);
        std::vector<std::future<RunResult>> batch;
        for (int r = start; r < stop; ++r) {
            batch.push_back(std::async(std::launch::async, [&config, r] {
                return run_single(config, r);
            }));
        }
        for (int r = start; r < stop; ++r) {
            runs[static_cast<std::size_t>(r)] = batch[static_cast<std::size_t>(r - start)].get();
        }
    }
    return runs;
}

AggregateStats aggregate(const std::vector<RunResult>& runs) {
    if (runs.empty()) {
        throw InvalidInput("cannot aggregate zero runs");
    }
    AggregateStats stats;
    const std::size_t horizon = runs.front().cumulative_regret.size();
    const double n = static_cast<double>(runs.size());
    stats.mean_cumulative.assign(horizon, 0.0);
    stats.se_cumulative.assign(horizon, 0.0);
    for (const auto& run : runs) {
        if (run.cumulative_regret.size() != horizon) {
            throw InvalidInput("runs have different horizons");
        }
        for (std::size_t t = 0; t < horizon; ++t) {
            stats.mean_cumulative[t] += run.cumulative_regret[t] / n;
        }
    }
    if (runs.size() > 1) {
        for (std::size_t t = 0; t < horizon; ++t) {
            double ss = 0.0;
            for (const auto& run : runs) {
                const double dev = run.cumulative_regret[t] - stats.mean_cumulative[t];
                ss += dev * dev;
            }
            stats.se_cumulative[t] = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
        }
    }
    for (const auto& run : runs) {
        stats.final_regrets.push_back(horizon ? run.cumulative_regret.back() : 0.0);
    }
    stats.final_mean = horizon ? stats.mean_cumulative.back() : 0.0;
    stats.final_se = horizon ? stats.se_cumulative.back() : 0.0;

    const std::size_t episodes = runs.front().episode_errors.size();
    stats.mean_episode_error.assign(episodes, 0.0);
    for (std::size_t e = 0; e < episodes; ++e) {
        stats.error_times.push_back(runs.front().episode_errors[e].t);
        for (const auto& run : runs) {
            stats.mean_episode_error[e] += run.episode_errors[e].error / n;
        }
    }
    return stats;
}

Comparison compare(const AggregateStats& candidate, const AggregateStats& baseline, int horizon) {
    Comparison cmp;
    if (baseline.final_mean > 0.0) {
        cmp.regret_reduction_pct = 100.0 * (1.0 - candidate.final_mean / baseline.final_mean);
    }
    if (baseline.final_se > 0.0) {
        cmp.std_reduction_pct = 100.0 * (1.0 - candidate.final_se / baseline.final_se);
    }
    if (baseline.mean_episode_error.empty()) {
        return cmp;
    }
    const double target = baseline.mean_episode_error.back();
    auto first_reach = [target, horizon](const AggregateStats& stats) {
        for (std::size_t e = 0; e < stats.mean_episode_error.size(); ++e) {
            if (stats.mean_episode_error[e] <= target) {
                return stats.error_times[e];
            }
        }
        return horizon + 1;
    };
    cmp.speed_ratio = static_cast<double>(first_reach(baseline)) /
                      static_cast<double>(first_reach(candidate));
    return cmp;
}

ReplicatedRun run_replicated(const ExperimentConfig& config, PolicyKind baseline_kind,
                             bool parallel) {
    ReplicatedRun out;
    out.candidate_runs = run_replications(config, parallel);
    ExperimentConfig base = config;
    base.policy = baseline_kind;
    out.baseline_runs = run_replications(base, parallel);
    out.candidate = aggregate(out.candidate_runs);
    out.baseline = aggregate(out.baseline_runs);
    out.comparison = compare(out.candidate, out.baseline, config.T);
    return out;
}

}  // namespace cmtdp
