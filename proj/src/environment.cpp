#include "cmtdp/environment.hpp"

#include "cmtdp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>

namespace cmtdp {

namespace {

constexpr double kSourceJitter = 0.25;

double uniform(Rng& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Matrix sample_points(int count, int dim, Rng& rng) {
    Matrix points(count, dim);
    for (int i = 0; i < count; ++i) {
        points.row(i) = sample_covariate(dim, rng).transpose();
    }
    return points;
}

}  // namespace

Rng make_stream(std::uint64_t master_seed, std::uint64_t replication, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(master_seed),
                      static_cast<std::uint32_t>(master_seed >> 32),
                      static_cast<std::uint32_t>(replication),
                      static_cast<std::uint32_t>(replication >> 32),
                      static_cast<std::uint32_t>(stream)};
    return Rng(seq);
}

Family MarketSystem::family() const {
    return std::holds_alternative<LinearMarket>(target) ? Family::linear : Family::kernel;
}

const Market& MarketSystem::market(int index) const {
    if (index == 0) {
        return target;
    }
    if (index < 0 || index > num_sources()) {
        throw InvalidInput("market index out of range: " + std::to_string(index));
    }
    return sources[static_cast<std::size_t>(index - 1)];
}

double rbf(const Vector& a, const Vector& b, double gamma) {
    return std::exp(-gamma * (a - b).squaredNorm());
}

Matrix rbf_gram(const Matrix& a, const Matrix& b, double gamma) {
    const Vector a_sq = a.rowwise().squaredNorm();
    const Vector b_sq = b.rowwise().squaredNorm();
    Matrix dist = -2.0 * a * b.transpose();
    dist.colwise() += a_sq;
    dist.rowwise() += b_sq.transpose();
    return (-gamma * dist.array().max(0.0)).exp().matrix();
}

double rkhs_norm(const KernelMarket& market) {
    const Matrix gram = rbf_gram(market.centers, market.centers, market.gamma);
    return std::sqrt(std::max(0.0, market.weights.dot(gram * market.weights)));
}

Vector sample_covariate(int dim, Rng& rng) {
    if (dim < 1) {
        throw InvalidParameter("covariate dimension must be >= 1");
    }
    std::uniform_real_distribution<double> coord(-1.0, 1.0);
    Vector x(dim);
    for (int j = 0; j < dim; ++j) {
        x[j] = coord(rng);
    }
    return x;
}

double mean_utility(const Market& market, const Vector& x) {
    return std::visit(
        [&x](const auto& m) -> double {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, LinearMarket>) {
                if (x.size() != m.beta.size()) {
                    throw InvalidInput("covariate dimension mismatch");
                }
                return x.dot(m.beta);
            } else {
                if (x.size() != m.centers.cols()) {
                    throw InvalidInput("covariate dimension mismatch");
                }
                const Vector sq = (m.centers.rowwise() - x.transpose()).rowwise().squaredNorm();
                return m.weights.dot((-m.gamma * sq.array()).exp().matrix());
            }
        },
        market);
}

bool outcome_from_uniform(double mean_utility, const NoiseModel& noise, double price,
                          double uniform) {
    if (price < 0.0) {
        throw InvalidParameter("price must be nonnegative");
    }
    return uniform < noise.survival(price - mean_utility);
}

bool sample_outcome(const Market& market, const NoiseModel& noise, const Vector& x,
                    double price, Rng& rng) {
    if (price < 0.0) {
        throw InvalidParameter("price must be nonnegative");
    }
    const double g = mean_utility(market, x);
    return outcome_from_uniform(g, noise, price, uniform(rng, 0.0, 1.0));
}

MarketSystem build_linear_scenario(int d, int K, ScenarioKind kind, double W,
                                   double sparsity_fraction, double perturb_magnitude,
                                   const NoiseModel& noise, Rng& rng) {
    if (d < 1 || K < 1) {
        throw InvalidParameter("need d >= 1 and K >= 1");
    }
    if (!(W > 0.0)) {
        throw InvalidParameter("L1 budget W must be positive");
    }
    if (sparsity_fraction < 0.0 || sparsity_fraction > 1.0) {
        throw InvalidParameter("sparsity fraction must lie in [0, 1]");
    }
    if (perturb_magnitude < 0.0) {
        throw InvalidParameter("perturbation magnitude must be nonnegative");
    }

    Vector beta0(d);
    for (int j = 0; j < d; ++j) {
        beta0[j] = uniform(rng, -1.0, 1.0);
    }
    const double l1 = beta0.lpNorm<1>();
    beta0 *= (l1 > 0.0) ? 0.9 * W / l1 : 0.0;

    MarketSystem system{LinearMarket{beta0, W}, {}, noise, d, 0};
    const int s0 = static_cast<int>(std::floor(sparsity_fraction * d + 1e-9));
    std::vector<int> coords(static_cast<std::size_t>(d));
    for (int k = 0; k < K; ++k) {
        if (kind == ScenarioKind::identical || s0 == 0) {
            system.sources.emplace_back(LinearMarket{beta0, W});
            continue;
        }
        std::iota(coords.begin(), coords.end(), 0);
        std::shuffle(coords.begin(), coords.end(), rng);
        Vector delta = Vector::Zero(d);
        for (int i = 0; i < s0; ++i) {
            delta[coords[static_cast<std::size_t>(i)]] =
                uniform(rng, -perturb_magnitude, perturb_magnitude);
        }
        // Shrink only the perturbation so the difference stays s0-sparse.
        if ((beta0 + delta).lpNorm<1>() > W) {
            ++system.rescale_warnings;
            double lo = 0.0;
            double hi = 1.0;
            for (int iter = 0; iter < 60; ++iter) {
                const double mid = 0.5 * (lo + hi);
                ((beta0 + mid * delta).lpNorm<1>() > W ? hi : lo) = mid;
            }
            delta *= lo;
        }
        system.sources.emplace_back(LinearMarket{beta0 + delta, W});
    }
    return system;
}

namespace {

KernelMarket random_expansion(int d, int n_centers, double gamma, double target_norm,
                              Rng& rng) {
    KernelMarket m;
    m.gamma = gamma;
    m.centers = sample_points(n_centers, d, rng);
    std::normal_distribution<double> normal(0.0, 1.0);
    m.weights.resize(n_centers);
    for (int i = 0; i < n_centers; ++i) {
        m.weights[i] = normal(rng);
    }
    const double norm = rkhs_norm(m);
    m.weights *= (norm > 0.0) ? target_norm / norm : 0.0;
    m.hnorm_budget = target_norm;
    return m;
}

}  // namespace

MarketSystem build_rkhs_scenario(int d, int K, ScenarioKind kind, double R, double diff_budget,
                                 double gamma, int n_centers, const NoiseModel& noise, Rng& rng) {
    if (d < 1 || K < 1) {
        throw InvalidParameter("need d >= 1 and K >= 1");
    }
    if (!(R > 0.0) || diff_budget < 0.0 || !(gamma > 0.0) || n_centers < 1) {
        throw InvalidParameter("invalid RKHS scenario parameters");
    }
    KernelMarket target = random_expansion(d, n_centers, gamma, R, rng);
    MarketSystem system{target, {}, noise, d, 0};
    for (int k = 0; k < K; ++k) {
        if (kind == ScenarioKind::identical || diff_budget == 0.0) {
            system.sources.emplace_back(target);
            continue;
        }
        const double delta_norm = uniform(rng, 0.5, 1.0) * diff_budget;
        const KernelMarket delta = random_expansion(d, n_centers, gamma, delta_norm, rng);
        KernelMarket source;
        source.gamma = gamma;
        source.hnorm_budget = R + diff_budget;
        source.centers.resize(2 * n_centers, d);
        source.centers << target.centers, delta.centers;
        source.weights.resize(2 * n_centers);
        source.weights << target.weights, delta.weights;
        system.sources.emplace_back(std::move(source));
    }
    return system;
}

double source_price(const Market& market, const PriceMap& pm, const Vector& x, PriceRule rule,
                    Rng& rng) {
    switch (rule) {
    case PriceRule::uniform_random:
        return uniform(rng, 0.0, pm.price_cap());
    case PriceRule::oracle_noisy:
        break;
    }
    const double jitter = uniform(rng, -kSourceJitter, kSourceJitter);
    return std::max(0.0, pm.price_of(mean_utility(market, x)) + jitter);
}

std::vector<Observation> generate_offline_log(const MarketSystem& system, const PriceMap& pm,
                                              int n_per_source_total, PriceRule rule, Rng& rng) {
    const int K = system.num_sources();
    if (n_per_source_total < K) {
        throw InvalidParameter("offline log needs at least one observation per source");
    }
    std::vector<Observation> log;
    log.reserve(static_cast<std::size_t>(n_per_source_total));
    for (int k = 1; k <= K; ++k) {
        const int count = n_per_source_total / K + (k <= n_per_source_total % K ? 1 : 0);
        const Market& market = system.market(k);
        for (int t = 1; t <= count; ++t) {
            Observation obs;
            obs.market_index = k;
            obs.time = t;
            obs.x = sample_covariate(system.covariate_dim, rng);
            obs.price = source_price(market, pm, obs.x, rule, rng);
            obs.sale = sample_outcome(market, system.noise, obs.x, obs.price, rng);
            log.push_back(std::move(obs));
        }
    }
    return log;
}

void write_observations_csv(std::ostream& out, const std::vector<Observation>& log, int dim) {
    out << "market_index,time";
    for (int j = 0; j < dim; ++j) {
        out << ",x_" << j;
    }
    out << ",price,sale\n";
    out << std::setprecision(12);
    for (const auto& obs : log) {
        out << obs.market_index << ',' << obs.time;
        for (int j = 0; j < dim; ++j) {
            out << ',' << obs.x[j];
        }
        out << ',' << obs.price << ',' << (obs.sale ? 1 : 0) << '\n';
    }
}

ScenarioKind parse_scenario_kind(const std::string& text) {
    if (text == "identical") {
        return ScenarioKind::identical;
    }
    if (text == "sparse_diff" || text == "sparse") {
        return ScenarioKind::sparse_diff;
    }
    throw InvalidParameter("unknown scenario kind: " + text);
}

std::string to_string(ScenarioKind kind) {
    return kind == ScenarioKind::identical ? "identical" : "sparse_diff";
}

Family parse_family(const std::string& text) {
    if (text == "linear") {
        return Family::linear;
    }
    if (text == "kernel" || text == "rkhs") {
        return Family::kernel;
    }
    throw InvalidParameter("unknown family: " + text);
}

std::string to_string(Family family) { return family == Family::linear ? "linear" : "kernel"; }

PriceRule parse_price_rule(const std::string& text) {
    if (text == "uniform_random") {
        return PriceRule::uniform_random;
    }
    if (text == "oracle_noisy") {
        return PriceRule::oracle_noisy;
    }
    throw InvalidParameter("unknown price rule: " + text);
}

std::string to_string(PriceRule rule) {
    return rule == PriceRule::uniform_random ? "uniform_random" : "oracle_noisy";
}

}  // namespace cmtdp
