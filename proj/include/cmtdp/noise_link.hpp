/**
 * @file noise_link.hpp
 * @brief Known valuation-noise distribution and the revenue-optimal pricing map
 *
 * A buyer with covariates x values the product at g(x) + eps with eps ~ F.
 * Posting price p sells with probability 1 - F(p - g(x)). The revenue
 * maximizing price is h(g(x)) with
 *
 *     phi(u) = u - (1 - F(u)) / F'(u),     h(u) = u + phi^{-1}(-u).
 */
#pragma once

#include "cmtdp/errors.hpp"

#include <cstddef>
#include <vector>

namespace cmtdp {

enum class NoiseKind { logistic };

/// Immutable description of the noise law F.
class NoiseModel {
public:
    /// Logistic law with cdf 1/(1+exp(-u/scale)). `support_bound` is metadata
    /// only; the analytic logistic is unbounded.
    static NoiseModel logistic(double scale, double support_bound);

    NoiseKind kind() const noexcept { return kind_; }
    double scale() const noexcept { return scale_; }
    double support_bound() const noexcept { return support_bound_; }

    double cdf(double u) const noexcept;
    /// 1 - cdf(u), evaluated without cancellation.
    double survival(double u) const noexcept;
    double pdf(double u) const noexcept;
    double pdf_prime(double u) const noexcept;

    /// phi(u) = u - survival(u) / pdf(u). Throws UndefinedValuation when
    /// the density vanishes.
    double virtual_valuation(double u) const;

    /// price * (1 - F(price - mean_utility)). Throws on negative price.
    double expected_revenue(double mean_utility, double price) const;

    bool operator==(const NoiseModel&) const = default;

private:
    NoiseModel(NoiseKind kind, double scale, double support_bound)
        : kind_(kind), scale_(scale), support_bound_(support_bound) {}

    NoiseKind kind_;
    double scale_;
    double support_bound_;
};

inline NoiseModel make_logistic(double scale, double support_bound) {
    return NoiseModel::logistic(scale, support_bound);
}

struct RegularityConstants {
    double u_F;  ///< sup of max{(log F)', -(log(1-F))'}
    double l_F;  ///< inf of min{-(log F)'', -(log(1-F))''}
};

/// Grid evaluation of the log-derivative bounds over |x| <= price_bound + utility_bound.
RegularityConstants regularity_constants(const NoiseModel& model, double price_bound,
                                         double utility_bound);

struct PriceMapOptions {
    double solver_tolerance = 1e-9;
    /// When nonzero, h is tabulated on this many uniform points over
    /// [-utility_bound, utility_bound] and linearly interpolated.
    std::size_t lookup_points = 0;
};

/// The pricing map h derived from a NoiseModel, clipped to [0, price_cap]
/// with price_cap = h(utility_bound).
class PriceMap {
public:
    PriceMap(NoiseModel model, double utility_bound, PriceMapOptions options = {});

    const NoiseModel& model() const noexcept { return model_; }
    double utility_bound() const noexcept { return utility_bound_; }
    double solver_tolerance() const noexcept { return options_.solver_tolerance; }
    double price_cap() const noexcept { return price_cap_; }

    /// w with |phi(w) - v| <= solver_tolerance (bracketing bisection).
    double inverse_phi(double v) const;

    /// h(u) without clipping; always exact root finding.
    double unclipped_price(double mean_utility) const;

    /// h(u) clipped to [0, price_cap]; uses the lookup table when enabled.
    double price_of(double mean_utility) const;

private:
    NoiseModel model_;
    double utility_bound_;
    PriceMapOptions options_;
    double price_cap_ = 0.0;
    std::vector<double> table_;
};

}  // namespace cmtdp
