#include "cmtdp/estimators.hpp"

#include "cmtdp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace cmtdp {

namespace {

constexpr double kLogFloor = 1e-12;
constexpr double kGramJitter = 1e-10;

struct Design {
    Matrix x;
    Vector prices;
    std::vector<bool> sales;
};

Design make_design(std::span<const Observation> data) {
    if (data.empty()) {
        throw InvalidInput("cannot fit on an empty data set");
    }
    const auto dim = data.front().x.size();
    Design design{Matrix(static_cast<Eigen::Index>(data.size()), dim),
                  Vector(static_cast<Eigen::Index>(data.size())), {}};
    design.sales.reserve(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (data[i].x.size() != dim) {
            throw InvalidInput("inconsistent covariate dimensions in data");
        }
        const auto row = static_cast<Eigen::Index>(i);
        design.x.row(row) = data[i].x.transpose();
        design.prices[row] = data[i].price;
        design.sales.push_back(data[i].sale);
    }
    return design;
}

/// Mean loss of the linear model at utilities design.x * coef + offset.
double linear_loss(const Design& design, const Vector& total_coef, Vector* gradient,
                   const NoiseModel& noise) {
    const Vector utilities = design.x * total_coef;
    const auto n = design.prices.size();
    Vector du(n);
    double loss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const PointLoss pl = point_loss(noise, design.prices[i] - utilities[i],
                                        design.sales[static_cast<std::size_t>(i)]);
        loss += pl.loss;
        du[i] = pl.du;
    }
    if (gradient != nullptr) {
        // du/dcoef = -x
        *gradient = -(design.x.transpose() * du) / static_cast<double>(n);
    }
    return loss / static_cast<double>(n);
}

Vector soft_threshold(const Vector& v, double threshold) {
    return v.unaryExpr([threshold](double a) {
        return std::copysign(std::max(std::abs(a) - threshold, 0.0), a);
    });
}

/// Monotone proximal gradient with Barzilai-Borwein initial steps and
/// backtracking on the smooth part. `prox(v, t)` maps the gradient step to
/// the next iterate; `penalty(b)` is the nonsmooth term of the objective.
Vector proximal_descent(const std::function<double(const Vector&, Vector*)>& smooth,
                        const std::function<Vector(const Vector&, double)>& prox,
                        const std::function<double(const Vector&)>& penalty, Vector start,
                        const FitConfig& cfg, FitDiagnostics& diag) {
    Vector b = prox(start, 0.0);
    Vector grad;
    double f = smooth(b, &grad);
    double objective = f + penalty(b);
    diag.objective_trace.assign(1, objective);
    diag.converged = false;
    double step = 1.0;
    Vector grad_new;
    for (int iter = 1; iter <= cfg.max_iters; ++iter) {
        diag.iterations = iter;
        Vector candidate;
        Vector diff;
        double f_new = 0.0;
        bool accepted = false;
        for (int halving = 0; halving < 80; ++halving) {
            candidate = prox(b - step * grad, step);
            diff = candidate - b;
            f_new = smooth(candidate, nullptr);
            if (f_new <= f + grad.dot(diff) + diff.squaredNorm() / (2.0 * step) + 1e-15) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted || diff.norm() == 0.0) {
            diag.converged = true;
            break;
        }
        smooth(candidate, &grad_new);
        const double objective_new = f_new + penalty(candidate);
        const double decrease = objective - objective_new;
        if (decrease < 0.0) {
            // Line search guarantees descent up to rounding; keep the old iterate.
            diag.converged = true;
            break;
        }
        const Vector grad_change = grad_new - grad;
        const double curvature = diff.dot(grad_change);
        b = std::move(candidate);
        grad = grad_new;
        f = f_new;
        objective = objective_new;
        diag.objective_trace.push_back(objective);
        if (diff.norm() < cfg.step_tolerance || decrease < cfg.objective_tolerance) {
            diag.converged = true;
            break;
        }
        step = curvature > 0.0 ? std::clamp(diff.squaredNorm() / curvature, 1e-10, 1e10)
                               : std::min(step * 2.0, 1e10);
    }
    return b;
}

}  // namespace

void FitConfig::validate() const {
    if (max_iters < 1) {
        throw InvalidParameter("max_iters must be >= 1");
    }
    if (!(step_tolerance > 0.0) || !(objective_tolerance > 0.0)) {
        throw InvalidParameter("tolerances must be positive");
    }
    if (l1_penalty < 0.0 || (ridge_penalty && *ridge_penalty < 0.0)) {
        throw InvalidParameter("penalties must be nonnegative");
    }
    if (l1_ball_W && !(*l1_ball_W > 0.0)) {
        throw InvalidParameter("L1 ball radius must be positive");
    }
    if (!(rkhs_alpha > 0.5) || !(rkhs_beta > 0.0) || rkhs_beta > 1.0) {
        throw InvalidParameter("need rkhs_alpha > 1/2 and rkhs_beta in (0, 1]");
    }
    if (similarity_H < 0.0 || ridge_multiplier < 0.0) {
        throw InvalidParameter("similarity H and ridge multiplier must be nonnegative");
    }
}

LinearEstimate LinearEstimate::zero(int dim) {
    LinearEstimate est;
    est.coef = Vector::Zero(dim);
    est.diagnostics.converged = true;
    return est;
}

KernelEstimate KernelEstimate::zero(int dim, double gamma) {
    KernelEstimate est;
    est.anchors = Matrix(0, dim);
    est.alpha = Vector(0);
    est.gamma = gamma;
    est.diagnostics.converged = true;
    return est;
}

double predict(const LinearEstimate& est, const Vector& x) {
    if (x.size() != est.coef.size()) {
        throw InvalidInput("covariate dimension mismatch in predict");
    }
    double value = x.dot(est.coef);
    if (est.base) {
        value += x.dot(*est.base);
    }
    return value;
}

double predict(const KernelEstimate& est, const Vector& x) {
    if (x.size() != est.anchors.cols()) {
        throw InvalidInput("covariate dimension mismatch in predict");
    }
    double value = est.base ? predict(*est.base, x) : 0.0;
    if (est.alpha.size() > 0) {
        const Vector sq = (est.anchors.rowwise() - x.transpose()).rowwise().squaredNorm();
        value += est.alpha.dot((-est.gamma * sq.array()).exp().matrix());
    }
    return value;
}

double predict(const Estimate& est, const Vector& x) {
    return std::visit([&x](const auto& e) { return predict(e, x); }, est);
}

PointLoss point_loss(const NoiseModel& noise, double u, bool sale) {
    const double big_f = noise.cdf(u);
    const double surv = noise.survival(u);
    const double density = big_f * surv / noise.scale();
    if (sale) {
        if (surv < kLogFloor) {
            return {-std::log(kLogFloor), 0.0};
        }
        return {-std::log(surv), density / surv};
    }
    if (big_f < kLogFloor) {
        return {-std::log(kLogFloor), 0.0};
    }
    return {-std::log(big_f), -density / big_f};
}

NllResult nll_and_gradient(const Vector& coef, const Vector* base,
                           std::span<const Observation> data, const NoiseModel& noise) {
    const Design design = make_design(data);
    if (coef.size() != design.x.cols() || (base != nullptr && base->size() != coef.size())) {
        throw InvalidInput("coefficient dimension mismatch");
    }
    const Vector total = base != nullptr ? Vector(*base + coef) : coef;
    NllResult result;
    result.loss = linear_loss(design, total, &result.gradient, noise);
    return result;
}

Vector project_l1_ball(const Vector& v, double radius) {
    if (v.lpNorm<1>() <= radius) {
        return v;
    }
    std::vector<double> mags(static_cast<std::size_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        mags[static_cast<std::size_t>(i)] = std::abs(v[i]);
    }
    std::sort(mags.begin(), mags.end(), std::greater<>());
    double cumulative = 0.0;
    double theta = 0.0;
    for (std::size_t j = 0; j < mags.size(); ++j) {
        cumulative += mags[j];
        const double candidate = (cumulative - radius) / static_cast<double>(j + 1);
        if (mags[j] - candidate > 0.0) {
            theta = candidate;
        }
    }
    return soft_threshold(v, theta);
}

LinearEstimate fit_mle_aggregate(std::span<const Observation> data, const NoiseModel& noise,
                                 const FitConfig& cfg) {
    cfg.validate();
    const Design design = make_design(data);
    const auto dim = design.x.cols();
    const std::optional<double> radius = cfg.l1_ball_W;

    LinearEstimate est;
    est.coef = proximal_descent(
        [&](const Vector& b, Vector* g) { return linear_loss(design, b, g, noise); },
        [&](const Vector& v, double) { return radius ? project_l1_ball(v, *radius) : v; },
        [](const Vector&) { return 0.0; }, Vector::Zero(dim), cfg, est.diagnostics);
    return est;
}

LinearEstimate fit_mle_debias(std::span<const Observation> data, const LinearEstimate& base,
                              const NoiseModel& noise, const FitConfig& cfg) {
    cfg.validate();
    if (base.base) {
        throw InvalidInput("debias base must itself be an aggregate estimate");
    }
    const Design design = make_design(data);
    const auto dim = design.x.cols();
    if (base.coef.size() != dim) {
        throw InvalidInput("base dimension mismatch");
    }
    const double lambda = cfg.l1_penalty;
    const Vector& offset = base.coef;

    LinearEstimate est;
    est.base = base.coef;
    est.l1_penalty = lambda;
    est.coef = proximal_descent(
        [&](const Vector& b, Vector* g) { return linear_loss(design, b + offset, g, noise); },
        [lambda](const Vector& v, double step) { return soft_threshold(v, step * lambda); },
        [lambda](const Vector& b) { return lambda * b.lpNorm<1>(); }, Vector::Zero(dim), cfg,
        est.diagnostics);
    return est;
}

double default_l1_penalty(int n, int d, double u_F, double multiplier) {
    if (n < 1) {
        throw InvalidParameter("sample size must be >= 1");
    }
    const double log_d = std::log(static_cast<double>(std::max(d, 2)));
    return multiplier * 4.0 * u_F * std::sqrt(log_d / n);
}

double default_ridge_aggregate(int n, const FitConfig& cfg) {
    const double a = cfg.rkhs_alpha;
    const double b = cfg.rkhs_beta;
    return cfg.ridge_multiplier * std::pow(static_cast<double>(std::max(n, 1)),
                                           -2.0 * a / (2.0 * a * b + 1.0));
}

double default_ridge_debias(int n, const FitConfig& cfg) {
    const double a = cfg.rkhs_alpha;
    const double h = std::max(cfg.similarity_H, 0.01);
    return cfg.ridge_multiplier *
           std::pow(static_cast<double>(std::max(n, 1)) * h * h, -2.0 * a / (2.0 * a + 1.0));
}

KernelObjective::KernelObjective(std::span<const Observation> data, const KernelEstimate* base,
                                 const NoiseModel& noise, double gamma, double ridge)
    : noise_(noise), ridge_(ridge) {
    Design design = make_design(data);
    anchors_ = std::move(design.x);
    prices_ = std::move(design.prices);
    sales_ = std::move(design.sales);
    gram_ = rbf_gram(anchors_, anchors_, gamma);
    gram_.diagonal().array() += kGramJitter;
    offsets_ = Vector::Zero(prices_.size());
    if (base != nullptr) {
        for (Eigen::Index i = 0; i < prices_.size(); ++i) {
            offsets_[i] = predict(*base, Vector(anchors_.row(i).transpose()));
        }
    }
}

double KernelObjective::mean_loss(const Vector& fitted, Vector* dloss_dg) const {
    const auto n = prices_.size();
    if (dloss_dg != nullptr) {
        dloss_dg->resize(n);
    }
    double loss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const PointLoss pl = point_loss(noise_, prices_[i] - fitted[i] - offsets_[i],
                                        sales_[static_cast<std::size_t>(i)]);
        loss += pl.loss;
        if (dloss_dg != nullptr) {
            (*dloss_dg)[i] = -pl.du;
        }
    }
    return loss / static_cast<double>(n);
}

double KernelObjective::value(const Vector& alpha) const {
    const Vector fitted = gram_ * alpha;
    return mean_loss(fitted, nullptr) + ridge_ * alpha.dot(fitted);
}

Vector KernelObjective::gradient(const Vector& alpha) const {
    const Vector fitted = gram_ * alpha;
    Vector r;
    mean_loss(fitted, &r);
    return gram_ * (r / static_cast<double>(size()) + 2.0 * ridge_ * alpha);
}

namespace {

/// Gradient descent in the RKHS metric: the search direction is
/// d = r / n + 2 ridge alpha, i.e. G^{-1} times the Euclidean gradient, so each
/// iteration needs one Gram product. Steps are Barzilai-Borwein in the same
/// metric with Armijo backtracking, which keeps the objective nonincreasing.
Vector solve_kernel(const KernelObjective& objective, double ridge, const FitConfig& cfg,
                    FitDiagnostics& diag) {
    const Matrix& gram = objective.gram();
    const auto n = gram.rows();
    const double inv_n = 1.0 / static_cast<double>(n);
    Vector alpha = Vector::Zero(n);
    Vector fitted = Vector::Zero(n);
    Vector r;
    double objective_value = objective.mean_loss(fitted, &r);
    Vector direction = r * inv_n + 2.0 * ridge * alpha;
    diag.objective_trace.assign(1, objective_value);
    diag.converged = false;

    double step = 1.0;
    for (int iter = 1; iter <= cfg.max_iters; ++iter) {
        diag.iterations = iter;
        const Vector g_dir = gram * direction;
        const double slope = direction.dot(g_dir);
        if (slope <= 0.0) {
            diag.converged = true;
            break;
        }
        Vector alpha_new;
        Vector fitted_new;
        double value_new = 0.0;
        bool accepted = false;
        for (int halving = 0; halving < 80; ++halving) {
            alpha_new = alpha - step * direction;
            fitted_new = fitted - step * g_dir;
            value_new = objective.mean_loss(fitted_new, nullptr) + ridge * alpha_new.dot(fitted_new);
            if (value_new <= objective_value - 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            diag.converged = true;
            break;
        }
        objective.mean_loss(fitted_new, &r);
        const Vector direction_new = r * inv_n + 2.0 * ridge * alpha_new;
        // s = -step * direction, G s = -step * g_dir
        const double s_gs = step * step * slope;
        const double s_gy = -step * g_dir.dot(direction_new - direction);
        const double decrease = objective_value - value_new;
        const double fitted_change = step * g_dir.norm() * std::sqrt(inv_n);

        alpha = std::move(alpha_new);
        fitted = std::move(fitted_new);
        direction = direction_new;
        objective_value = value_new;
        diag.objective_trace.push_back(objective_value);
        if (fitted_change < cfg.step_tolerance || decrease < cfg.objective_tolerance) {
            diag.converged = true;
            break;
        }
        step = s_gy > 0.0 ? std::clamp(s_gs / s_gy, 1e-10, 1e10) : std::min(step * 2.0, 1e10);
    }
    return alpha;
}

KernelEstimate finish_kernel_fit(const KernelObjective& objective, Vector alpha, double gamma,
                                 double ridge, FitDiagnostics diag) {
    KernelEstimate est;
    est.anchors = objective.anchors();
    est.gamma = gamma;
    est.ridge = ridge;
    const Vector fitted = objective.gram() * alpha;
    est.rkhs_norm_sq = std::max(0.0, alpha.dot(fitted));
    est.alpha = std::move(alpha);
    est.diagnostics = std::move(diag);
    return est;
}

}  // namespace

KernelEstimate fit_krr_aggregate(std::span<const Observation> data, const NoiseModel& noise,
                                 double gamma, const FitConfig& cfg) {
    cfg.validate();
    if (!(gamma > 0.0)) {
        throw InvalidParameter("kernel gamma must be positive");
    }
    const int n = static_cast<int>(data.size());
    const double ridge = cfg.ridge_penalty.value_or(default_ridge_aggregate(n, cfg));
    const KernelObjective objective(data, nullptr, noise, gamma, ridge);
    FitDiagnostics diag;
    Vector alpha = solve_kernel(objective, ridge, cfg, diag);
    return finish_kernel_fit(objective, std::move(alpha), gamma, ridge, std::move(diag));
}

KernelEstimate fit_krr_debias(std::span<const Observation> data,
                              std::shared_ptr<const KernelEstimate> base,
                              const NoiseModel& noise, double gamma, const FitConfig& cfg) {
    cfg.validate();
    if (!base) {
        throw InvalidInput("kernel debias requires a base estimate");
    }
    if (!(gamma > 0.0)) {
        throw InvalidParameter("kernel gamma must be positive");
    }
    const int n = static_cast<int>(data.size());
    const double ridge = cfg.ridge_penalty.value_or(default_ridge_debias(n, cfg));
    const KernelObjective objective(data, base.get(), noise, gamma, ridge);
    FitDiagnostics diag;
    Vector alpha = solve_kernel(objective, ridge, cfg, diag);
    KernelEstimate est =
        finish_kernel_fit(objective, std::move(alpha), gamma, ridge, std::move(diag));
    est.base = std::move(base);
    return est;
}

}  // namespace cmtdp
