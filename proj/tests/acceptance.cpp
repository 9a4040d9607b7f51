// Acceptance harness: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include "cmtdp/estimators.hpp"
#include "cmtdp/experiments.hpp"
#include "cmtdp/simulator.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace cmtdp;

namespace {

struct Verdict {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail += (detail.empty() ? "" : "; ") + ("violated: " + what);
        }
    }
    void note(const std::string& text) { detail += (detail.empty() ? "" : "; ") + text; }
};

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

int failures = 0;

void criterion(int id, const std::string& name, double budget_seconds,
               const std::function<void(Verdict&)>& body) {
    Verdict v;
    const auto start = std::chrono::steady_clock::now();
    try {
        body(v);
    } catch (const std::exception& e) {
        v.pass = false;
        v.note(std::string("exception: ") + e.what());
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    v.require(secs < budget_seconds, "runtime " + fmt(secs) + " s over " + fmt(budget_seconds) + " s");
    failures += v.pass ? 0 : 1;
    std::printf("%s %d %s (%.2f s): %s\n", v.pass ? "PASS" : "FAIL", id, name.c_str(), secs,
                v.detail.c_str());
    std::fflush(stdout);
}

std::vector<Observation> uniform_price_data(const Market& market, const NoiseModel& noise, int d,
                                            int n, double hi, Rng& rng) {
    std::uniform_real_distribution<double> price(0.0, hi);
    std::vector<Observation> data;
    data.reserve(static_cast<std::size_t>(n));
    for (int t = 1; t <= n; ++t) {
        Observation o;
        o.time = t;
        o.x = sample_covariate(d, rng);
        o.price = price(rng);
        o.sale = sample_outcome(market, noise, o.x, o.price, rng);
        data.push_back(std::move(o));
    }
    return data;
}

double relative_gap(const Vector& analytic, const Vector& numeric) {
    return (analytic - numeric).norm() / std::max(numeric.norm(), 1e-300);
}

double kendall_tau(const std::vector<double>& y) {
    int concordant = 0;
    int discordant = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        for (std::size_t j = i + 1; j < y.size(); ++j) {
            concordant += y[j] > y[i];
            discordant += y[j] < y[i];
        }
    }
    const double pairs = static_cast<double>(y.size() * (y.size() - 1) / 2);
    return (concordant - discordant) / pairs;
}

double regret_at(const AggregateStats& s, int t) { return s.mean_cumulative.at(t - 1); }

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

int main() {
    // Shared by criteria 4 and 8.
    ReplicatedRun identical_linear;

    criterion(1, "pricing map", 5.0, [](Verdict& v) {
        const PriceMap pm(make_logistic(1, 1), 2.0);
        const auto& m = pm.model();
        double best_p = 0.0;
        double best = -1.0;
        for (int i = 0; i <= 60000; ++i) {
            const double p = i * 1e-4;
            const double r = p * m.survival(p);
            if (r > best) {
                best = r;
                best_p = p;
            }
        }
        const double gap = std::abs(pm.price_of(0.0) - best_p);
        v.require(gap <= 1e-3, "argmax gap " + fmt(gap));

        double worst_round_trip = 0.0;
        for (int i = 0; i <= 200; ++i) {
            const double y = -10.0 + 0.1 * i;
            worst_round_trip =
                std::max(worst_round_trip, std::abs(m.virtual_valuation(pm.inverse_phi(y)) - y));
        }
        v.require(worst_round_trip <= 1e-8, "round trip " + fmt(worst_round_trip));

        double lo = 1.0;
        double hi = 0.0;
        const double step = 1e-4;
        for (int i = 0; i <= 1000; ++i) {
            const double u = -5.0 + 0.01 * i;
            const double slope =
                (pm.unclipped_price(u + step) - pm.unclipped_price(u - step)) / (2 * step);
            lo = std::min(lo, slope);
            hi = std::max(hi, slope);
        }
        v.require(lo > 0.0 && hi < 1.0 - 1e-9, "h' range");
        v.note("argmax gap " + fmt(gap) + ", round trip " + fmt(worst_round_trip) + ", h' in [" +
               fmt(lo) + ", " + fmt(hi) + "]");
    });

    criterion(2, "gradient suite", 10.0, [](Verdict& v) {
        const NoiseModel noise = make_logistic(0.25, 1);
        Rng rng = make_stream(2, 0, 0);
        std::uniform_real_distribution<double> u(-1, 1);
        const double h = 1e-6;
        double worst_linear = 0.0;
        for (int instance = 0; instance < 100; ++instance) {
            const int d = 1 + instance % 10;
            Vector beta(d);
            Vector coef(d);
            Vector base(d);
            for (int j = 0; j < d; ++j) {
                beta[j] = u(rng);
                coef[j] = u(rng);
                base[j] = 0.5 * u(rng);
            }
            const auto data = uniform_price_data(LinearMarket{beta, 10.0}, noise, d, 40, 2.0, rng);
            const Vector* b = instance % 2 ? &base : nullptr;
            const Vector analytic = nll_and_gradient(coef, b, data, noise).gradient;
            Vector numeric(d);
            for (int j = 0; j < d; ++j) {
                Vector e = Vector::Zero(d);
                e[j] = h;
                numeric[j] = (nll_and_gradient(coef + e, b, data, noise).loss -
                              nll_and_gradient(coef - e, b, data, noise).loss) /
                             (2 * h);
            }
            worst_linear = std::max(worst_linear, relative_gap(analytic, numeric));
        }
        double worst_kernel = 0.0;
        for (int instance = 0; instance < 100; ++instance) {
            const int d = 1 + instance % 5;
            const auto data = uniform_price_data(LinearMarket{Vector::Constant(d, 0.2), 10.0},
                                                 noise, d, 20, 1.5, rng);
            std::shared_ptr<KernelEstimate> base;
            if (instance % 2) {
                base = std::make_shared<KernelEstimate>(KernelEstimate::zero(d, 0.5));
                base->anchors = data.front().x.transpose();
                base->alpha = Vector::Constant(1, u(rng));
            }
            const KernelObjective obj(data, base.get(), noise, 0.5, 0.01);
            Vector alpha(obj.size());
            for (int i = 0; i < obj.size(); ++i) alpha[i] = 0.5 * u(rng);
            const Vector analytic = obj.gradient(alpha);
            Vector numeric(obj.size());
            for (int i = 0; i < obj.size(); ++i) {
                Vector e = Vector::Zero(obj.size());
                e[i] = h;
                numeric[i] = (obj.value(alpha + e) - obj.value(alpha - e)) / (2 * h);
            }
            worst_kernel = std::max(worst_kernel, relative_gap(analytic, numeric));
        }
        v.require(worst_linear <= 1e-5, "linear relative error " + fmt(worst_linear));
        v.require(worst_kernel <= 1e-5, "kernel relative error " + fmt(worst_kernel));
        v.note("worst relative error linear " + fmt(worst_linear) + ", kernel " +
               fmt(worst_kernel));
    });

    criterion(3, "estimator consistency", 60.0, [](Verdict& v) {
        const NoiseModel noise = make_logistic(0.25, 1);
        Rng market_rng = make_stream(3, 0, 0);
        const auto sys = build_linear_scenario(10, 1, ScenarioKind::identical, 2.0, 0.3, 0.5,
                                               noise, market_rng);
        const auto& beta = std::get<LinearMarket>(sys.target).beta;
        FitConfig cfg;
        cfg.l1_ball_W = 2.0;
        const std::vector<int> sizes = {500, 2000, 8000};
        std::vector<double> err2(sizes.size(), 0.0);
        for (int seed = 0; seed < 10; ++seed) {
            for (std::size_t i = 0; i < sizes.size(); ++i) {
                Rng rng = make_stream(3, static_cast<std::uint64_t>(seed), 1 + i);
                const auto data = uniform_price_data(sys.target, noise, 10, sizes[i], 2.0, rng);
                const auto est = fit_mle_aggregate(data, noise, cfg);
                err2[i] += (est.coef - beta).squaredNorm() / 10.0;
            }
        }
        const double ratio = err2[2] / err2[1];
        v.require(err2[0] > err2[1] && err2[1] > err2[2], "strict decrease");
        v.require(ratio >= 0.15 && ratio <= 0.6, "ratio " + fmt(ratio));
        v.note("err2 " + fmt(err2[0]) + " > " + fmt(err2[1]) + " > " + fmt(err2[2]) +
               ", ratio " + fmt(ratio));
    });

    criterion(4, "linear online transfer benefit", 120.0, [&](Verdict& v) {
        ExperimentConfig c;  // linear, identical, d = 10, K = 5, T = 2000, 10 replications
        identical_linear = run_replicated(c, PolicyKind::single_market);
        const double cand = identical_linear.candidate.final_mean;
        const double base = identical_linear.baseline.final_mean;
        v.require(cand <= 0.7 * base, "ratio " + fmt(cand / base));
        v.note("transfer " + fmt(cand) + " vs baseline " + fmt(base) + ", reduction " +
               fmt(identical_linear.comparison.regret_reduction_pct) + "%");
    });

    criterion(5, "more sources help", 180.0, [](Verdict& v) {
        ExperimentConfig c;
        c.kind = ScenarioKind::sparse_diff;
        c.K = 10;
        const double k10 = aggregate(run_replications(c)).final_mean;
        c.K = 1;
        const double k1 = aggregate(run_replications(c)).final_mean;
        v.require(k10 < k1, "K=10 not below K=1");
        v.note("K=10 " + fmt(k10) + " vs K=1 " + fmt(k1));
    });

    criterion(6, "kernel online transfer benefit", 300.0, [](Verdict& v) {
        ExperimentConfig c;
        c.family = Family::kernel;
        c.gamma = 0.5;
        c.R = 1.0;
        const auto rr = run_replicated(c, PolicyKind::single_market);
        v.require(rr.candidate.final_mean <= 0.8 * rr.baseline.final_mean,
                  "ratio " + fmt(rr.candidate.final_mean / rr.baseline.final_mean));
        v.note("transfer " + fmt(rr.candidate.final_mean) + " vs baseline " +
               fmt(rr.baseline.final_mean) + ", reduction " +
               fmt(rr.comparison.regret_reduction_pct) + "%");
    });

    criterion(7, "offline jump start", 120.0, [](Verdict& v) {
        ExperimentConfig c;
        c.kind = ScenarioKind::sparse_diff;
        c.policy = PolicyKind::cm_tdp_off;
        c.n_K = 500;
        const auto rr = run_replicated(c, PolicyKind::single_market);
        const double at200 = regret_at(rr.candidate, 200);
        const double base200 = regret_at(rr.baseline, 200);
        v.require(at200 <= 0.8 * base200, "t=200 ratio " + fmt(at200 / base200));
        v.require(rr.candidate.final_mean < rr.baseline.final_mean, "final not below baseline");
        v.note("t=200 " + fmt(at200) + " vs " + fmt(base200) + ", final " +
               fmt(rr.candidate.final_mean) + " vs " + fmt(rr.baseline.final_mean));
    });

    criterion(8, "logarithmic growth signature", 5.0, [&](Verdict& v) {
        const auto& runs = identical_linear.candidate_runs;
        if (runs.empty()) {
            throw std::runtime_error("criterion 4 run unavailable");
        }
        std::vector<double> sums;
        for (int m = 6; m <= 11; ++m) {
            const int first = episode_start(m);
            const int last = std::min(2 * first - 1, static_cast<int>(runs.front().step_regret.size()));
            double total = 0.0;
            for (const auto& run : runs) {
                for (int t = first; t <= last; ++t) {
                    total += run.step_regret[static_cast<std::size_t>(t - 1)];
                }
            }
            sums.push_back(total / static_cast<double>(runs.size()));
        }
        const double tau = kendall_tau(sums);
        v.require(tau <= 0.0, "tau " + fmt(tau));
        std::string listing;
        for (const double s : sums) listing += (listing.empty() ? "" : " ") + fmt(s);
        v.note("episode sums [" + listing + "], tau " + fmt(tau));
    });

    criterion(9, "structural invariants", 30.0, [](Verdict& v) {
        int checked = 0;
        for (const Family family : {Family::linear, Family::kernel}) {
            for (const PolicyKind policy : {PolicyKind::oracle, PolicyKind::cm_tdp_on,
                                            PolicyKind::cm_tdp_off, PolicyKind::single_market}) {
                ExperimentConfig c;
                c.family = family;
                c.policy = policy;
                c.kind = ScenarioKind::sparse_diff;
                c.d = 5;
                c.T = 600;
                c.n_K = 100;
                c.n_centers = 20;
                for (int r = 0; r < 2; ++r) {
                    const auto run = run_single(c, r);
                    ++checked;
                    if (policy == PolicyKind::oracle) {
                        for (const double s : run.step_regret) {
                            v.require(s == 0.0, "oracle regret is zero");
                        }
                    }
                    for (const double p : run.prices) {
                        v.require(p >= 0.0 && p <= run.price_cap, "price within [0, cap]");
                    }
                    v.require(run.refit_count <= static_cast<int>(std::ceil(std::log2(c.T))) + 1,
                              "refit count bound");
                    v.require(run.phase_switches <= 1, "at most one switch");
                    if (policy == PolicyKind::cm_tdp_off) {
                        v.require(run.phase_switches == 1, "offline policy switched");
                    }
                }
            }
        }
        const fs::path root = fs::temp_directory_path() / "cmtdp_acceptance";
        fs::remove_all(root);
        ExperimentConfig c;
        c.T = 256;
        c.replications = 3;
        c.kind = ScenarioKind::sparse_diff;
        const auto first = run_experiment(c, root / "a");
        run_experiment(c, root / "b");
        for (const auto& f : first.files) {
            v.require(slurp(f) == slurp(root / "b" / f.filename()),
                      "identical " + f.filename().string());
        }
        fs::remove_all(root);
        v.note(std::to_string(checked) + " runs checked, " + std::to_string(first.files.size()) +
               " files byte-identical");
    });

    criterion(10, "small-instance oracle equivalence", 10.0, [](Verdict& v) {
        const NoiseModel noise = make_logistic(0.25, 1);
        Rng rng = make_stream(10, 0, 0);
        std::uniform_real_distribution<double> u(-1, 1);
        std::uniform_int_distribution<int> size(5, 50);
        double worst = 0.0;
        for (int problem = 0; problem < 20; ++problem) {
            const double W = 2.0;
            const Vector beta = Vector::Constant(1, 1.5 * u(rng));
            const auto data = uniform_price_data(LinearMarket{beta, W}, noise, 1, size(rng), 2.0, rng);
            FitConfig cfg;
            cfg.l1_ball_W = W;
            const double fitted = fit_mle_aggregate(data, noise, cfg).coef[0];
            double grid_best = 0.0;
            double best_loss = INFINITY;
            const int steps = static_cast<int>(std::lround(2 * W / 1e-4));
            Vector b(1);
            for (int i = 0; i <= steps; ++i) {
                b[0] = -W + i * 1e-4;
                const double loss = nll_and_gradient(b, nullptr, data, noise).loss;
                if (loss < best_loss) {
                    best_loss = loss;
                    grid_best = b[0];
                }
            }
            worst = std::max(worst, std::abs(fitted - grid_best));
        }
        v.require(worst <= 1e-2, "worst gap " + fmt(worst));
        v.note("worst argmin gap " + fmt(worst));
    });

    std::printf("%s: %d of 10 criteria failed\n", failures ? "FAIL" : "PASS", failures);
    return failures ? 1 : 0;
}
