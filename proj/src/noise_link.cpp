#include "cmtdp/noise_link.hpp"

#include "cmtdp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace cmtdp {

namespace {

double logistic_cdf(double z) noexcept {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

}  // namespace

NoiseModel NoiseModel::logistic(double scale, double support_bound) {
    if (!(scale > 0.0) || !std::isfinite(scale)) {
        throw InvalidParameter("logistic scale must be positive, got " + std::to_string(scale));
    }
    if (!(support_bound > 0.0) || !std::isfinite(support_bound)) {
        throw InvalidParameter("support bound must be positive, got " +
                               std::to_string(support_bound));
    }
    return NoiseModel(NoiseKind::logistic, scale, support_bound);
}

double NoiseModel::cdf(double u) const noexcept { return logistic_cdf(u / scale_); }

double NoiseModel::survival(double u) const noexcept { return logistic_cdf(-u / scale_); }

double NoiseModel::pdf(double u) const noexcept {
    return cdf(u) * survival(u) / scale_;
}

double NoiseModel::pdf_prime(double u) const noexcept {
    // f' = f (1 - 2F) / s = f (S - F) / s
    return pdf(u) * (survival(u) - cdf(u)) / scale_;
}

double NoiseModel::virtual_valuation(double u) const {
    switch (kind_) {
    case NoiseKind::logistic:
        // (1 - F) / f reduces to s / F for the logistic law.
        return u - scale_ / cdf(u);
    }
    const double density = pdf(u);
    if (density <= 0.0) {
        throw UndefinedValuation("density vanishes at u = " + std::to_string(u));
    }
    return u - survival(u) / density;
}

double NoiseModel::expected_revenue(double mean_utility, double price) const {
    if (price < 0.0) {
        throw InvalidParameter("price must be nonnegative, got " + std::to_string(price));
    }
    return price * survival(price - mean_utility);
}

RegularityConstants regularity_constants(const NoiseModel& model, double price_bound,
                                         double utility_bound) {
    const double range = price_bound + utility_bound;
    constexpr int intervals = 4000;
    double sup_first = 0.0;
    double inf_second = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= intervals; ++i) {
        const double u = -range + 2.0 * range * i / intervals;
        const double f = model.pdf(u);
        const double fp = model.pdf_prime(u);
        const double big_f = model.cdf(u);
        const double s = model.survival(u);
        sup_first = std::max({sup_first, f / big_f, f / s});
        const double neg_second_log_cdf = (f * f - fp * big_f) / (big_f * big_f);
        const double neg_second_log_surv = (fp * s + f * f) / (s * s);
        inf_second = std::min({inf_second, neg_second_log_cdf, neg_second_log_surv});
    }
    return {sup_first, inf_second};
}

PriceMap::PriceMap(NoiseModel model, double utility_bound, PriceMapOptions options)
    : model_(model), utility_bound_(utility_bound), options_(options) {
    if (!(utility_bound > 0.0)) {
        throw InvalidParameter("utility bound must be positive");
    }
    if (!(options_.solver_tolerance > 0.0)) {
        throw InvalidParameter("solver tolerance must be positive");
    }
    price_cap_ = unclipped_price(utility_bound_);
    if (options_.lookup_points >= 2) {
        table_.resize(options_.lookup_points);
        const auto last = static_cast<double>(options_.lookup_points - 1);
        for (std::size_t i = 0; i < table_.size(); ++i) {
            const double u = -utility_bound_ + 2.0 * utility_bound_ * static_cast<double>(i) / last;
            table_[i] = unclipped_price(u);
        }
    }
}

double PriceMap::inverse_phi(double v) const {
    const double scale = model_.scale();
    const double width_cap = 1e6 * scale;
    double lo = v - 2.0 * scale;
    double hi = v + 2.0 * scale;
    double step = 4.0 * scale;
    while (model_.virtual_valuation(lo) > v) {
        lo -= step;
        step *= 2.0;
        if (hi - lo > width_cap) {
            throw NoRoot("phi inversion bracket exceeded cap below v = " + std::to_string(v));
        }
    }
    step = 4.0 * scale;
    while (model_.virtual_valuation(hi) < v) {
        hi += step;
        step *= 2.0;
        if (hi - lo > width_cap) {
            throw NoRoot("phi inversion bracket exceeded cap above v = " + std::to_string(v));
        }
    }
    const double tol = options_.solver_tolerance;
    double mid = 0.5 * (lo + hi);
    for (int iter = 0; iter < 400; ++iter) {
        mid = 0.5 * (lo + hi);
        const double residual = model_.virtual_valuation(mid) - v;
        if (std::abs(residual) <= tol || mid <= lo || mid >= hi) {
            break;
        }
        if (residual < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return mid;
}

double PriceMap::unclipped_price(double mean_utility) const {
    return mean_utility + inverse_phi(-mean_utility);
}

double PriceMap::price_of(double mean_utility) const {
    if (!std::isfinite(mean_utility)) {
        throw InvalidInput("mean utility must be finite");
    }
    double price;
    if (!table_.empty() && std::abs(mean_utility) <= utility_bound_) {
        const auto last = static_cast<double>(table_.size() - 1);
        const double pos = (mean_utility + utility_bound_) / (2.0 * utility_bound_) * last;
        const auto i = std::min(static_cast<std::size_t>(pos), table_.size() - 2);
        const double frac = pos - static_cast<double>(i);
        price = table_[i] + frac * (table_[i + 1] - table_[i]);
    } else {
        price = unclipped_price(mean_utility);
    }
    return std::clamp(price, 0.0, price_cap_);
}

}  // namespace cmtdp
