#ifndef COUNTERFACT_WANING_HPP
#define COUNTERFACT_WANING_HPP

#include "counterfact/common.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace counterfact
{

/// Observed vaccine efficacy against infection over a period [begin, end) in weeks since the dose.
struct EfficacyPeriod {
    double begin_weeks = 0.0;
    double end_weeks = 0.0;
    double efficacy = 0.0;

    double midpoint() const { return 0.5 * (begin_weeks + end_weeks); }
};

/// Two-dose BNT162b2 efficacy against infection by month since full vaccination.
/// Approximate digitisation of Tartof et al., Lancet 398 (2021) 1407-1416, Fig. 2
/// (88% in the first month falling to 47% after five months). Override via config
/// when better estimates are available.
inline const std::vector<EfficacyPeriod>& literature_second_dose_efficacy()
{
    constexpr double month = 365.25 / 12.0 / 7.0;
    static const std::vector<EfficacyPeriod> table = {
        {0 * month, 1 * month, 0.88}, {1 * month, 2 * month, 0.86}, {2 * month, 3 * month, 0.82},
        {3 * month, 4 * month, 0.73}, {4 * month, 5 * month, 0.59}, {5 * month, 6 * month, 0.47},
    };
    return table;
}

/// Efficacy directly after dose 1, 2, 3 as used by the severity factorisation.
inline constexpr std::array<double, kDoses> kSeverityFullEfficacy = {0.75, 0.90, 0.95};

/// Logistic decay of vaccine efficacy with time since the last dose.
///
/// VE^v(w) = VE^v(0) * shape(w / scale) where
/// shape(x) = (1 + exp(-w0/s)) / (1 + exp((x - w0)/s)), so shape(0) = 1 and shape -> 0.
/// All doses share the same shape; only the efficacy at full protection differs.
/// `half_life_scale` < 1 compresses the time axis (faster waning).
class WaningCurve
{
public:
    enum class Mode { Logistic, Constant };

    WaningCurve() = default;

    WaningCurve(double midpoint_weeks, double steepness_weeks, std::array<double, kDoses> full_efficacy,
                double half_life_scale = 1.0)
        : mode_(Mode::Logistic)
        , midpoint_(midpoint_weeks)
        , steepness_(steepness_weeks)
        , full_efficacy_(full_efficacy)
        , scale_(half_life_scale)
    {
        if (!(steepness_ > 0.0) || !(scale_ > 0.0)) {
            throw ConfigError("waning curve needs positive steepness and half-life scale");
        }
        for (double ve : full_efficacy_) {
            if (!(ve > 0.0 && ve < 1.0)) {
                throw ConfigError("full efficacy must lie in (0, 1)");
            }
        }
    }

    /// Efficacy stays at its maximum forever.
    static WaningCurve constant(std::array<double, kDoses> full_efficacy = kSeverityFullEfficacy)
    {
        WaningCurve c;
        c.mode_ = Mode::Constant;
        c.full_efficacy_ = full_efficacy;
        return c;
    }

    WaningCurve with_scale(double half_life_scale) const
    {
        if (mode_ == Mode::Constant) {
            return *this;
        }
        return WaningCurve(midpoint_, steepness_, full_efficacy_, half_life_scale);
    }

    Mode mode() const { return mode_; }
    double midpoint() const { return midpoint_; }
    double steepness() const { return steepness_; }
    double half_life_scale() const { return scale_; }
    const std::array<double, kDoses>& full_efficacy() const { return full_efficacy_; }

    /// VE(w)/VE(0), identical for every dose count.
    double normalized_efficacy(double weeks) const
    {
        if (mode_ == Mode::Constant || weeks <= 0.0) {
            return 1.0;
        }
        const double x = weeks / scale_;
        return (1.0 + std::exp(-midpoint_ / steepness_)) / (1.0 + std::exp((x - midpoint_) / steepness_));
    }

    /// VE^v(w) for v in 1..3.
    double efficacy(int doses, double weeks) const
    {
        return full_efficacy_.at(static_cast<std::size_t>(doses - 1)) * normalized_efficacy(weeks);
    }

    /// Relative infection risk h^v(w) = (1 - VE^v(w)) / (1 - VE^v(0)); 1 for the unvaccinated.
    double relative_risk(int doses, double weeks) const
    {
        if (doses == 0 || weeks <= 0.0 || mode_ == Mode::Constant) {
            return 1.0;
        }
        const double ve0 = full_efficacy_.at(static_cast<std::size_t>(doses - 1));
        return (1.0 - ve0 * normalized_efficacy(weeks)) / (1.0 - ve0);
    }

    /// Weeks until VE has dropped to half of its initial value. Infinite without waning.
    double half_life() const
    {
        if (mode_ == Mode::Constant) {
            return INFINITY;
        }
        const double x = midpoint_ + steepness_ * std::log(1.0 + 2.0 * std::exp(-midpoint_ / steepness_));
        return scale_ * x;
    }

private:
    Mode mode_ = Mode::Constant;
    double midpoint_ = 0.0;
    double steepness_ = 1.0;
    std::array<double, kDoses> full_efficacy_ = kSeverityFullEfficacy;
    double scale_ = 1.0;
};

namespace detail
{
inline void validate_efficacy_table(std::span<const EfficacyPeriod> table, double full_efficacy)
{
    if (table.size() < 2) {
        throw DataError("efficacy table needs at least two periods");
    }
    for (std::size_t i = 0; i < table.size(); ++i) {
        const auto& p = table[i];
        if (!(p.efficacy > 0.0 && p.efficacy < 1.0) || !(p.end_weeks > p.begin_weeks) || p.begin_weeks < 0.0) {
            throw DataError("efficacy table row " + std::to_string(i) + " out of range");
        }
        if (p.efficacy > full_efficacy) {
            throw DataError("efficacy table row " + std::to_string(i) + " exceeds full-protection efficacy");
        }
        if (i > 0 && (p.efficacy > table[i - 1].efficacy || p.begin_weeks < table[i - 1].begin_weeks)) {
            throw DataError("efficacy table is not monotonically decreasing at row " + std::to_string(i));
        }
    }
}
} // namespace detail

/// Least-squares logistic fit to second-dose efficacies evaluated at period midpoints.
/// Dose 1 and dose 3 reuse the fitted shape with their own full-protection efficacy.
inline WaningCurve fit_waning(std::span<const EfficacyPeriod> table,
                              std::array<double, kDoses> full_efficacy = kSeverityFullEfficacy,
                              double half_life_scale = 1.0)
{
    const double ve0 = full_efficacy[1];
    detail::validate_efficacy_table(table, ve0);

    const auto n = static_cast<Eigen::Index>(table.size());
    auto residuals = [&](const Eigen::Vector2d& p) {
        const double w0 = p(0);
        const double s = std::exp(p(1));
        Eigen::VectorXd r(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double x = table[static_cast<std::size_t>(i)].midpoint();
            const double shape = (1.0 + std::exp(-w0 / s)) / (1.0 + std::exp((x - w0) / s));
            r(i) = ve0 * shape - table[static_cast<std::size_t>(i)].efficacy;
        }
        return r;
    };

    // Start from the linearly interpolated half-efficacy crossing.
    double w_half = table.back().midpoint() * 1.5;
    for (std::size_t i = 1; i < table.size(); ++i) {
        if (table[i].efficacy <= 0.5 * ve0) {
            const double a = table[i - 1].efficacy, b = table[i].efficacy;
            const double xa = table[i - 1].midpoint(), xb = table[i].midpoint();
            w_half = xa + (a - 0.5 * ve0) / (a - b) * (xb - xa);
            break;
        }
    }
    Eigen::Vector2d p(w_half, std::log(4.0));

    // Levenberg-Marquardt with central-difference Jacobian.
    double lambda = 1e-3;
    Eigen::VectorXd r = residuals(p);
    double cost = r.squaredNorm();
    for (int iter = 0; iter < 500; ++iter) {
        Eigen::MatrixXd jac(n, 2);
        for (int k = 0; k < 2; ++k) {
            Eigen::Vector2d dp = Eigen::Vector2d::Zero();
            dp(k) = 1e-6 * std::max(1.0, std::abs(p(k)));
            jac.col(k) = (residuals(p + dp) - residuals(p - dp)) / (2.0 * dp(k));
        }
        const Eigen::Matrix2d jtj = jac.transpose() * jac;
        const Eigen::Vector2d grad = jac.transpose() * r;
        Eigen::Matrix2d damped = jtj;
        damped.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-12);
        const Eigen::Vector2d step = damped.ldlt().solve(-grad);
        const Eigen::Vector2d trial = p + step;
        const Eigen::VectorXd r_trial = residuals(trial);
        const double trial_cost = r_trial.squaredNorm();
        if (trial_cost < cost) {
            const bool converged = cost - trial_cost < 1e-16 * (1.0 + cost);
            p = trial;
            r = r_trial;
            cost = trial_cost;
            lambda = std::max(lambda * 0.3, 1e-12);
            if (converged || step.norm() < 1e-12) {
                break;
            }
        }
        else {
            lambda *= 10.0;
            if (lambda > 1e12) {
                break;
            }
        }
    }
    if (!std::isfinite(p(0)) || !std::isfinite(p(1))) {
        throw NumericalError("logistic waning fit diverged");
    }
    return WaningCurve(p(0), std::exp(p(1)), full_efficacy, half_life_scale);
}

/// Regular waning curve fitted to the embedded literature table.
inline WaningCurve default_waning(double half_life_scale = 1.0)
{
    return fit_waning(literature_second_dose_efficacy(), kSeverityFullEfficacy, half_life_scale);
}

} // namespace counterfact

#endif // COUNTERFACT_WANING_HPP
