/**
 * @file environment.hpp
 * @brief Simulated target and source markets
 *
 * Markets are either linear (g(x) = x . beta) or finite RBF kernel
 * expansions. Covariates are uniform on [-1, 1]^d for every market.
 */
#pragma once

#include "cmtdp/noise_link.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <variant>
#include <vector>

namespace cmtdp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Rng = std::mt19937_64;

/// Independent generator for (master_seed, replication, stream).
Rng make_stream(std::uint64_t master_seed, std::uint64_t replication, std::uint64_t stream);

struct LinearMarket {
    Vector beta;
    double W = 1.0;
};

struct KernelMarket {
    Matrix centers;  ///< one center per row
    Vector weights;
    double gamma = 0.5;
    double hnorm_budget = 1.0;
};

using Market = std::variant<LinearMarket, KernelMarket>;

enum class Family { linear, kernel };
enum class ScenarioKind { identical, sparse_diff };
enum class PriceRule { uniform_random, oracle_noisy };

struct MarketSystem {
    Market target;
    std::vector<Market> sources;
    NoiseModel noise;
    int covariate_dim = 0;
    /// Sources whose coefficients had to be rescaled back into the W ball.
    int rescale_warnings = 0;

    Family family() const;
    int num_sources() const { return static_cast<int>(sources.size()); }
    /// Market 0 is the target, 1..K the sources.
    const Market& market(int index) const;
};

struct Observation {
    int market_index = 0;
    int time = 1;
    Vector x;
    double price = 0.0;
    bool sale = false;
};

/// RBF kernel exp(-gamma ||a - b||^2).
double rbf(const Vector& a, const Vector& b, double gamma);

/// Gram matrix between the rows of `a` and the rows of `b`.
Matrix rbf_gram(const Matrix& a, const Matrix& b, double gamma);

/// sqrt(w' G w) for a kernel market.
double rkhs_norm(const KernelMarket& market);

Vector sample_covariate(int dim, Rng& rng);

double mean_utility(const Market& market, const Vector& x);

bool sample_outcome(const Market& market, const NoiseModel& noise, const Vector& x,
                    double price, Rng& rng);

/// Sale indicator for a given uniform variate: sale iff uniform < 1 - F(price - g).
bool outcome_from_uniform(double mean_utility, const NoiseModel& noise, double price,
                          double uniform);

MarketSystem build_linear_scenario(int d, int K, ScenarioKind kind, double W,
                                   double sparsity_fraction, double perturb_magnitude,
                                   const NoiseModel& noise, Rng& rng);

MarketSystem build_rkhs_scenario(int d, int K, ScenarioKind kind, double R, double diff_budget,
                                 double gamma, int n_centers, const NoiseModel& noise, Rng& rng);

/// Price a source posts for covariate x under `rule`.
double source_price(const Market& market, const PriceMap& pm, const Vector& x, PriceRule rule,
                    Rng& rng);

std::vector<Observation> generate_offline_log(const MarketSystem& system, const PriceMap& pm,
                                              int n_per_source_total, PriceRule rule, Rng& rng);

/// Writes market_index,time,x_0..x_{d-1},price,sale with a header row.
void write_observations_csv(std::ostream& out, const std::vector<Observation>& log, int dim);

ScenarioKind parse_scenario_kind(const std::string& text);
std::string to_string(ScenarioKind kind);
Family parse_family(const std::string& text);
std::string to_string(Family family);
PriceRule parse_price_rule(const std::string& text);
std::string to_string(PriceRule rule);

}  // namespace cmtdp
