/**
 * @file estimators.hpp
 * @brief Pooled maximum likelihood fits and penalized debiasing refits
 *
 * Both utility families use the same two-step scheme: an aggregate fit on
 * pooled source data, then a penalized correction fitted on target data
 * around the aggregate (L1 for linear coefficients, RKHS-norm squared for
 * kernel expansions).
 *
 * Negative log-likelihood of one observation with u = p - g(x):
 *
 *     y = 1:  -log(1 - F(u))        y = 0:  -log F(u)
 *
 * with log arguments floored at 1e-12.
 */
#pragma once

#include "cmtdp/environment.hpp"
#include "cmtdp/noise_link.hpp"

#include <memory>
#include <optional>
#include <span>
#include <variant>
#include <vector>

namespace cmtdp {

struct FitConfig {
    int max_iters = 3000;
    double step_tolerance = 1e-9;
    double objective_tolerance = 1e-13;
    /// L1 penalty of the linear debias fit.
    double l1_penalty = 0.0;
    /// RKHS penalty; nullopt selects the rate-based default schedule.
    std::optional<double> ridge_penalty;
    /// Radius of the L1 ball for the aggregate linear fit; nullopt disables it.
    std::optional<double> l1_ball_W;
    double rkhs_alpha = 1.0;
    double rkhs_beta = 1.0;
    double similarity_H = 0.0;
    double ridge_multiplier = 1.0;

    void validate() const;
};

struct FitDiagnostics {
    bool converged = false;
    int iterations = 0;
    /// Objective after every accepted iterate (first entry is the start point).
    std::vector<double> objective_trace;
};

struct LinearEstimate {
    Vector coef;
    std::optional<Vector> base;
    double l1_penalty = 0.0;
    FitDiagnostics diagnostics;

    /// base + coef, or coef alone without a base.
    Vector effective() const { return base ? Vector(*base + coef) : coef; }
    static LinearEstimate zero(int dim);
};

struct KernelEstimate {
    Matrix anchors;  ///< one anchor per row
    Vector alpha;
    double gamma = 0.5;
    std::shared_ptr<const KernelEstimate> base;
    double ridge = 0.0;
    double rkhs_norm_sq = 0.0;  ///< alpha' G alpha of this layer only
    FitDiagnostics diagnostics;

    static KernelEstimate zero(int dim, double gamma);
};

using Estimate = std::variant<LinearEstimate, KernelEstimate>;

double predict(const LinearEstimate& est, const Vector& x);
double predict(const KernelEstimate& est, const Vector& x);
double predict(const Estimate& est, const Vector& x);

/// Loss and dl/du for one observation at u = p - g(x).
struct PointLoss {
    double loss;
    double du;
};
PointLoss point_loss(const NoiseModel& noise, double u, bool sale);

struct NllResult {
    double loss;
    Vector gradient;
};

/// Mean NLL of base + coef over `data` and its gradient with respect to coef.
NllResult nll_and_gradient(const Vector& coef, const Vector* base,
                           std::span<const Observation> data, const NoiseModel& noise);

/// Euclidean projection onto {b : ||b||_1 <= radius}.
Vector project_l1_ball(const Vector& v, double radius);

/// Unpenalized pooled MLE, projected onto the L1 ball when cfg.l1_ball_W is set.
LinearEstimate fit_mle_aggregate(std::span<const Observation> data, const NoiseModel& noise,
                                 const FitConfig& cfg);

/// L1-penalized correction around `base` (proximal gradient).
LinearEstimate fit_mle_debias(std::span<const Observation> data, const LinearEstimate& base,
                              const NoiseModel& noise, const FitConfig& cfg);

/// multiplier * 4 * u_F * sqrt(log d / n), with d floored at 2.
double default_l1_penalty(int n, int d, double u_F, double multiplier = 1.0);

/// n^(-2a / (2ab + 1)) scaled by cfg.ridge_multiplier.
double default_ridge_aggregate(int n, const FitConfig& cfg);
/// (n max(H, 0.01)^2)^(-2a / (2a + 1)) scaled by cfg.ridge_multiplier.
double default_ridge_debias(int n, const FitConfig& cfg);

/// Penalized kernel NLL in the expansion coefficients over fixed anchors:
///
///     J(alpha) = (1/n) sum_t l(p_t - (G alpha)_t - offset_t) + ridge * alpha' G alpha
class KernelObjective {
public:
    KernelObjective(std::span<const Observation> data, const KernelEstimate* base,
                    const NoiseModel& noise, double gamma, double ridge);

    double value(const Vector& alpha) const;
    /// Exact gradient G (r / n + 2 ridge alpha).
    Vector gradient(const Vector& alpha) const;

    const Matrix& anchors() const { return anchors_; }
    const Matrix& gram() const { return gram_; }
    int size() const { return static_cast<int>(prices_.size()); }

    /// Mean loss at fitted values `fitted` (= G alpha); fills dl/dg when asked.
    double mean_loss(const Vector& fitted, Vector* dloss_dg) const;

private:
    NoiseModel noise_;
    double ridge_;
    Matrix anchors_;
    Matrix gram_;
    Vector prices_;
    Vector offsets_;
    std::vector<bool> sales_;
};

KernelEstimate fit_krr_aggregate(std::span<const Observation> data, const NoiseModel& noise,
                                 double gamma, const FitConfig& cfg);

KernelEstimate fit_krr_debias(std::span<const Observation> data,
                              std::shared_ptr<const KernelEstimate> base,
                              const NoiseModel& noise, double gamma, const FitConfig& cfg);

}  // namespace cmtdp
