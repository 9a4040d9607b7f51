#include "cmtdp/environment.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <sstream>

using namespace cmtdp;

namespace {

const NoiseModel kUnit = make_logistic(1, 1);

double rkhs_distance(const KernelMarket& a, const KernelMarket& b) {
    KernelMarket diff;
    diff.gamma = a.gamma;
    diff.centers.resize(a.centers.rows() + b.centers.rows(), a.centers.cols());
    diff.centers << a.centers, b.centers;
    diff.weights.resize(a.weights.size() + b.weights.size());
    diff.weights << a.weights, -b.weights;
    return rkhs_norm(diff);
}

}  // namespace

TEST_CASE("covariates are uniform on the unit cube") {
    Rng rng = make_stream(1, 0, 0);
    const Vector x = sample_covariate(3, rng);
    CHECK(x.size() == 3);
    CHECK(x.lpNorm<Eigen::Infinity>() <= 1.0);

    Vector sum = Vector::Zero(4);
    for (int i = 0; i < 100000; ++i) {
        const Vector v = sample_covariate(4, rng);
        CHECK_UNARY(v.lpNorm<Eigen::Infinity>() <= 1.0);
        sum += v;
    }
    for (int j = 0; j < 4; ++j) {
        CHECK(std::abs(sum[j] / 100000) < 0.02);
    }

    Rng a = make_stream(9, 2, 1);
    Rng b = make_stream(9, 2, 1);
    CHECK(sample_covariate(5, a) == sample_covariate(5, b));
    CHECK_THROWS_AS(sample_covariate(0, a), InvalidParameter);
}

TEST_CASE("streams differ by replication and stream id") {
    Rng a = make_stream(9, 0, 1);
    Rng b = make_stream(9, 1, 1);
    Rng c = make_stream(9, 0, 2);
    const auto va = a();
    CHECK(va != b());
    CHECK(va != c());
}

TEST_CASE("mean utility") {
    Vector x(3);
    x << 0.5, -0.2, 0.9;
    CHECK(mean_utility(LinearMarket{Vector::Zero(3), 1.0}, x) == 0.0);
    Vector e1 = Vector::Zero(3);
    e1[0] = 1.0;
    CHECK(mean_utility(LinearMarket{e1, 1.0}, x) == doctest::Approx(0.5));
    CHECK_THROWS_AS(mean_utility(LinearMarket{e1, 1.0}, Vector::Zero(2)), InvalidInput);

    KernelMarket k;
    k.gamma = 0.5;
    k.centers = Matrix::Zero(1, 2);
    k.weights = Vector::Ones(1);
    CHECK(mean_utility(k, Vector::Zero(2)) == doctest::Approx(1.0));
    Vector far(2);
    far << 1.0, 1.0;  // distance sqrt(2)
    CHECK(mean_utility(k, far) == doctest::Approx(0.36787944117144233).epsilon(1e-14));
    CHECK_THROWS_AS(mean_utility(k, Vector::Zero(3)), InvalidInput);
}

TEST_CASE("rbf gram matches pointwise kernel") {
    Rng rng = make_stream(3, 0, 0);
    Matrix a(4, 3);
    Matrix b(5, 3);
    for (int i = 0; i < 4; ++i) a.row(i) = sample_covariate(3, rng).transpose();
    for (int i = 0; i < 5; ++i) b.row(i) = sample_covariate(3, rng).transpose();
    const Matrix g = rbf_gram(a, b, 0.7);
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 5; ++j) {
            CHECK(g(i, j) == doctest::Approx(rbf(a.row(i).transpose(), b.row(j).transpose(), 0.7))
                                 .epsilon(1e-12));
        }
    }
}

TEST_CASE("sale outcomes") {
    const Market market = LinearMarket{Vector::Zero(2), 1.0};
    const Vector x = Vector::Zero(2);
    Rng rng = make_stream(5, 0, 2);

    SUBCASE("far tail never sells") {
        int sales = 0;
        for (int i = 0; i < 1000000; ++i) {
            sales += sample_outcome(market, kUnit, x, 25.0, rng);
        }
        CHECK(sales == 0);
    }
    SUBCASE("zero price sells at least half the time") {
        CHECK(kUnit.survival(0.0 - 0.0) >= 0.5);
    }
    SUBCASE("calibrated sale rate") {
        const int n = 100000;
        int sales = 0;
        for (int i = 0; i < n; ++i) {
            sales += sample_outcome(market, kUnit, x, 1.0, rng);
        }
        const double q = 0.2689414213699951;
        CHECK(std::abs(static_cast<double>(sales) / n - q) <= 3 * std::sqrt(q * (1 - q) / n));
    }
    SUBCASE("negative price") {
        CHECK_THROWS_AS(sample_outcome(market, kUnit, x, -1.0, rng), InvalidParameter);
    }
    SUBCASE("uniform threshold form") {
        CHECK(outcome_from_uniform(0.0, kUnit, 1.0, 0.26));
        CHECK_FALSE(outcome_from_uniform(0.0, kUnit, 1.0, 0.27));
    }
}

TEST_CASE("linear scenarios respect their budgets") {
    const auto noise = make_logistic(0.25, 1);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng = make_stream(seed, 0, 0);
        const auto sys =
            build_linear_scenario(10, 5, ScenarioKind::sparse_diff, 2.0, 0.3, 0.5, noise, rng);
        const auto& beta0 = std::get<LinearMarket>(sys.target).beta;
        CHECK(beta0.lpNorm<1>() == doctest::Approx(1.8).epsilon(1e-12));
        CHECK(sys.num_sources() == 5);
        for (const auto& src : sys.sources) {
            const auto& beta = std::get<LinearMarket>(src).beta;
            CHECK(beta.lpNorm<1>() <= 2.0 + 1e-12);
            int changed = 0;
            for (int j = 0; j < 10; ++j) {
                changed += beta[j] != beta0[j];
            }
            CHECK(changed <= 3);
        }
    }
    Rng rng = make_stream(1, 0, 0);
    const auto same =
        build_linear_scenario(6, 3, ScenarioKind::identical, 2.0, 0.3, 0.5, noise, rng);
    for (const auto& src : same.sources) {
        CHECK(std::get<LinearMarket>(src).beta == std::get<LinearMarket>(same.target).beta);
    }
    CHECK_THROWS_AS(build_linear_scenario(6, 3, ScenarioKind::identical, 0.0, 0.3, 0.5, noise, rng),
                    InvalidParameter);
    CHECK_THROWS_AS(build_linear_scenario(6, 3, ScenarioKind::identical, 1.0, 1.5, 0.5, noise, rng),
                    InvalidParameter);
}

TEST_CASE("over-budget perturbations are shrunk but stay sparse") {
    const auto noise = make_logistic(0.25, 1);
    Rng rng = make_stream(11, 0, 0);
    const auto sys =
        build_linear_scenario(10, 20, ScenarioKind::sparse_diff, 1.0, 0.3, 5.0, noise, rng);
    CHECK(sys.rescale_warnings > 0);
    const auto& beta0 = std::get<LinearMarket>(sys.target).beta;
    for (const auto& src : sys.sources) {
        const auto& beta = std::get<LinearMarket>(src).beta;
        CHECK(beta.lpNorm<1>() <= 1.0 + 1e-9);
        int changed = 0;
        for (int j = 0; j < 10; ++j) {
            changed += beta[j] != beta0[j];
        }
        CHECK(changed <= 3);
    }
}

TEST_CASE("rkhs scenarios") {
    const auto noise = make_logistic(0.25, 1);
    Rng rng = make_stream(4, 0, 0);
    const auto sys = build_rkhs_scenario(5, 4, ScenarioKind::sparse_diff, 1.0, 0.3, 0.5, 50, noise, rng);
    const auto& target = std::get<KernelMarket>(sys.target);
    CHECK(rkhs_norm(target) == doctest::Approx(1.0).epsilon(1e-9));
    for (const auto& src : sys.sources) {
        const auto& k = std::get<KernelMarket>(src);
        const double gap = rkhs_distance(k, target);
        CHECK(gap <= 0.3 + 1e-9);
        CHECK(gap >= 0.15 - 1e-9);
    }
    const Matrix gram = rbf_gram(target.centers, target.centers, target.gamma);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-8);

    Rng rng2 = make_stream(4, 0, 0);
    const auto same = build_rkhs_scenario(5, 2, ScenarioKind::identical, 1.0, 0.3, 0.5, 20, noise, rng2);
    for (const auto& src : same.sources) {
        CHECK(rkhs_distance(std::get<KernelMarket>(src), std::get<KernelMarket>(same.target)) <
              1e-7);
    }
}

TEST_CASE("scenario construction is deterministic") {
    const auto noise = make_logistic(0.25, 1);
    Rng a = make_stream(8, 3, 0);
    Rng b = make_stream(8, 3, 0);
    const auto s1 = build_linear_scenario(10, 3, ScenarioKind::sparse_diff, 2.0, 0.3, 0.5, noise, a);
    const auto s2 = build_linear_scenario(10, 3, ScenarioKind::sparse_diff, 2.0, 0.3, 0.5, noise, b);
    for (int k = 0; k <= 3; ++k) {
        CHECK(std::get<LinearMarket>(s1.market(k)).beta == std::get<LinearMarket>(s2.market(k)).beta);
    }
    CHECK_THROWS_AS(s1.market(4), InvalidInput);
}

TEST_CASE("offline logs") {
    const auto noise = make_logistic(0.25, 1);
    Rng rng = make_stream(2, 0, 0);
    const auto sys = build_linear_scenario(4, 5, ScenarioKind::sparse_diff, 2.0, 0.3, 0.5, noise, rng);
    const PriceMap pm(noise, 2.0);

    const auto log = generate_offline_log(sys, pm, 100, PriceRule::oracle_noisy, rng);
    REQUIRE(log.size() == 100);
    std::vector<int> per(6, 0);
    for (const auto& obs : log) {
        ++per[static_cast<std::size_t>(obs.market_index)];
        CHECK(obs.price >= 0.0);
        CHECK(obs.price <= pm.price_cap() + 0.25);
    }
    CHECK(per[0] == 0);
    for (int k = 1; k <= 5; ++k) {
        CHECK(per[static_cast<std::size_t>(k)] == 20);
    }
    CHECK_THROWS_AS(generate_offline_log(sys, pm, 3, PriceRule::oracle_noisy, rng), InvalidParameter);

    SUBCASE("cheap prices almost always sell") {
        // Utility 2 at x = 1; every price sits below 2 - 5s = 0.75.
        MarketSystem flat{LinearMarket{Vector::Zero(1), 3.0}, {}, noise, 1, 0};
        Vector two(1);
        two << 2.0;
        flat.sources.emplace_back(LinearMarket{two, 3.0});
        int sold = 0;
        int seen = 0;
        for (int i = 0; i < 20000; ++i) {
            Vector x(1);
            x << 1.0;
            const double p = 0.75 * (i % 100) / 100.0;
            sold += sample_outcome(flat.sources[0], noise, x, p, rng);
            ++seen;
        }
        CHECK(static_cast<double>(sold) / seen >= 0.99);
        const auto uni = generate_offline_log(flat, PriceMap(noise, 2.0), 50,
                                              PriceRule::uniform_random, rng);
        for (const auto& obs : uni) {
            CHECK(obs.price <= PriceMap(noise, 2.0).price_cap());
        }
    }
}

TEST_CASE("offline log csv") {
    std::vector<Observation> log(2);
    log[0] = {1, 1, Vector::Constant(2, 0.125), 1.5, true};
    log[1] = {2, 1, Vector::Constant(2, -0.5), 0.25, false};
    std::ostringstream out;
    write_observations_csv(out, log, 2);
    CHECK(out.str() ==
          "market_index,time,x_0,x_1,price,sale\n1,1,0.125,0.125,1.5,1\n2,1,-0.5,-0.5,0.25,0\n");
}

TEST_CASE("enum text round trips") {
    CHECK(parse_family(to_string(Family::kernel)) == Family::kernel);
    CHECK(parse_scenario_kind(to_string(ScenarioKind::sparse_diff)) == ScenarioKind::sparse_diff);
    CHECK(parse_price_rule(to_string(PriceRule::uniform_random)) == PriceRule::uniform_random);
    CHECK_THROWS_AS(parse_family("quadratic"), InvalidParameter);
}
