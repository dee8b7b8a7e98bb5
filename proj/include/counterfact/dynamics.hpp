#ifndef COUNTERFACT_DYNAMICS_HPP
#define COUNTERFACT_DYNAMICS_HPP

#include "counterfact/common.hpp"
#include "counterfact/strategy.hpp"
#include "counterfact/waning.hpp"

#include <Eigen/Dense>
#include <boost/math/special_functions/gamma.hpp>

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

namespace counterfact
{

/// C = (1 - gamma) I + gamma rho 1^T with rho the population shares.
class ContactMatrix
{
public:
    ContactMatrix(double gamma, std::span<const double> population)
        : gamma_(gamma)
    {
        if (!(gamma >= 0.0 && gamma <= 1.0)) {
            throw ConfigError("contact mixing factor must lie in [0, 1], got " + format_double(gamma));
        }
        const auto n = static_cast<Eigen::Index>(population.size());
        rho_.resize(n);
        double total = 0.0;
        for (double p : population) {
            total += p;
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            rho_(i) = population[static_cast<std::size_t>(i)] / total;
        }
        matrix_ = (1.0 - gamma) * Eigen::MatrixXd::Identity(n, n) + gamma * rho_ * Eigen::RowVectorXd::Ones(n);
        verify();
    }

    double gamma() const { return gamma_; }
    const Eigen::VectorXd& shares() const { return rho_; }
    const Eigen::MatrixXd& matrix() const { return matrix_; }
    double operator()(Eigen::Index i, Eigen::Index j) const { return matrix_(i, j); }
    Eigen::Index size() const { return matrix_.rows(); }

    /// Eigenvalue of largest modulus and its eigenvector (normalised, non-negative).
    std::pair<double, Eigen::VectorXd> leading_eigenpair() const
    {
        Eigen::EigenSolver<Eigen::MatrixXd> solver(matrix_);
        const auto& values = solver.eigenvalues();
        Eigen::Index best = 0;
        for (Eigen::Index i = 1; i < values.size(); ++i) {
            if (std::abs(values(i)) > std::abs(values(best)) + 1e-13) {
                best = i;
            }
        }
        Eigen::VectorXd vec = solver.eigenvectors().col(best).real();
        if (vec.sum() < 0.0) {
            vec = -vec;
        }
        return {values(best).real(), vec / vec.norm()};
    }

private:
    void verify() const
    {
        const Eigen::VectorXd col_sums = matrix_.colwise().sum().transpose();
        if ((col_sums.array() - 1.0).abs().maxCoeff() > 1e-10) {
            throw NumericalError("contact matrix columns do not sum to one");
        }
        if ((matrix_ * rho_ - rho_).cwiseAbs().maxCoeff() > 1e-10) {
            throw NumericalError("population shares are not an eigenvector of the contact matrix");
        }
        Eigen::EigenSolver<Eigen::MatrixXd> solver(matrix_, false);
        const double spectral_radius = solver.eigenvalues().cwiseAbs().maxCoeff();
        if (std::abs(spectral_radius - 1.0) > 1e-10) {
            throw NumericalError("contact matrix spectral radius " + format_double(spectral_radius) + " != 1");
        }
    }

    double gamma_;
    Eigen::VectorXd rho_;
    Eigen::MatrixXd matrix_;
};

inline ContactMatrix build_contact_matrix(double gamma, std::span<const double> population)
{
    return ContactMatrix(gamma, population);
}

/// Generation-interval kernel g(tau), tau = 0..10, for a delay of tau + 1 days.
/// Gamma(mean, sd) mass on [tau + 0.5, tau + 1.5) via CDF differences, renormalised.
inline std::vector<double> generation_kernel(double mean_days = 4.0, double sd_days = 1.5, int length = 11)
{
    const double shape = (mean_days / sd_days) * (mean_days / sd_days);
    const double scale = sd_days * sd_days / mean_days;
    auto cdf = [&](double x) { return x <= 0.0 ? 0.0 : boost::math::gamma_p(shape, x / scale); };
    std::vector<double> g(static_cast<std::size_t>(length));
    double total = 0.0;
    for (int tau = 0; tau < length; ++tau) {
        g[static_cast<std::size_t>(tau)] = cdf(tau + 1.5) - cdf(tau + 0.5);
        total += g[static_cast<std::size_t>(tau)];
    }
    for (double& x : g) {
        x /= total;
    }
    return g;
}

/// Logistic change point of the log reproduction number. `day` counts from the window start.
struct ChangePoint {
    double effect = 0.0;
    double length = 4.0;
    double day = 0.0;

    double value(double t) const { return effect / (1.0 + std::exp(-4.0 / length * (t - day))); }
};

inline constexpr std::array<double, kDoses> kInfectionProtection = {0.70, 0.90, 0.95};

/// Latent parameters of the age-structured renewal process.
struct DynamicsParams {
    /// [age] reproduction number before the first change point.
    std::vector<double> r0;
    /// [age][n].
    std::vector<std::vector<ChangePoint>> change_points;
    /// [age][week-1] external influx h*_a(t) per week.
    std::vector<std::vector<double>> influx;
    std::array<double, kDoses> protection = kInfectionProtection;

    std::size_t groups() const { return r0.size(); }
};

struct DynamicsConfig {
    double mixing = 0.8;
    std::vector<double> kernel = generation_kernel();
    int reporting_delay = 6;
    /// Multiply transmission by S_a/D_a. Disabling gives the literal, depletion-free recursion.
    bool susceptible_depletion = true;

    /// First simulated day relative to the window start: the earliest exposure reported in week 1.
    int first_day() const { return -(reporting_delay + kDaysPerWeek); }
};

inline double base_reproduction(const DynamicsParams& p, std::size_t age, double day)
{
    double log_r = 0.0;
    for (const auto& cp : p.change_points[age]) {
        log_r += cp.value(day);
    }
    return p.r0[age] * std::exp(log_r);
}

/// [age][week-1] base reproduction number averaged over the days of each week.
inline std::vector<std::vector<double>> weekly_base_reproduction(const DynamicsParams& p, int weeks)
{
    std::vector<std::vector<double>> out(p.groups(), std::vector<double>(static_cast<std::size_t>(weeks), 0.0));
    for (std::size_t a = 0; a < p.groups(); ++a) {
        for (int t = 1; t <= weeks; ++t) {
            double s = 0.0;
            for (int d = kDaysPerWeek * (t - 1); d < kDaysPerWeek * t; ++d) {
                s += base_reproduction(p, a, double(d));
            }
            out[a][static_cast<std::size_t>(t - 1)] = s / kDaysPerWeek;
        }
    }
    return out;
}

/// Fraction of transmission left after vaccine-acquired immunity.
/// `fractions` = (Unv, Vacc^1, Vacc^2, Vacc^3); `waning` = W^v_eff for v = 1..3.
inline double infectability(const std::array<double, kStatuses>& fractions, const std::array<double, kDoses>& waning,
                            const std::array<double, kDoses>& protection = kInfectionProtection)
{
    const double closure = fractions[0] + fractions[1] + fractions[2] + fractions[3];
    if (std::abs(closure - 1.0) > 1e-9) {
        throw DataError("vaccination fractions sum to " + format_double(closure));
    }
    double out = fractions[0];
    for (std::size_t v = 0; v < kDoses; ++v) {
        out += fractions[v + 1] * (1.0 - protection[v] * waning[v]);
    }
    return out;
}

/// [age][week-1] infectability implied by an allocation strategy and waning curve.
/// W^v_eff averages VE_norm(t - tau) over everyone whose v-th dose, received in week tau,
/// is their latest by week t.
inline std::vector<std::vector<double>> infectability_table(const AllocationStrategy& s, const WaningCurve& waning,
                                                            const std::array<double, kDoses>& protection =
                                                                kInfectionProtection)
{
    const auto weeks = static_cast<std::size_t>(s.weeks());
    std::vector<double> ve(weeks + 1);
    for (std::size_t w = 0; w <= weeks; ++w) {
        ve[w] = waning.normalized_efficacy(double(w));
    }
    std::vector<std::vector<double>> out(s.groups(), std::vector<double>(weeks, 1.0));
    for (std::size_t a = 0; a < s.groups(); ++a) {
        for (int t = 1; t <= s.weeks(); ++t) {
            std::array<double, kStatuses> frac{};
            std::array<double, kDoses> weighted{};
            for (const auto& [times, mass] : s.joint(a)) {
                const int v = times.status(t);
                frac[static_cast<std::size_t>(v)] += mass;
                if (v > 0) {
                    weighted[static_cast<std::size_t>(v - 1)] +=
                        mass * ve[static_cast<std::size_t>(t - times.last_dose(t))];
                }
            }
            std::array<double, kDoses> w_eff{};
            for (std::size_t v = 0; v < kDoses; ++v) {
                w_eff[v] = frac[v + 1] > 0.0 ? weighted[v] / frac[v + 1] : 0.0;
            }
            const double total = frac[0] + frac[1] + frac[2] + frac[3];
            for (double& f : frac) {
                f /= total;
            }
            out[a][static_cast<std::size_t>(t - 1)] = infectability(frac, w_eff, protection);
        }
    }
    return out;
}

/// Newly exposed per age for the kernel-length days preceding the first simulated day.
struct Seeding {
    /// [age][k], k = 0 is the oldest day.
    std::vector<std::vector<double>> exposures;

    /// Spreads the first observed week's cases uniformly over each seeding day.
    static Seeding from_first_week(std::span<const double> first_week_cases, std::size_t kernel_length)
    {
        Seeding s;
        for (double c : first_week_cases) {
            s.exposures.emplace_back(kernel_length, c / kDaysPerWeek);
        }
        return s;
    }
};

/// Daily and weekly trajectories. Day index 0 corresponds to config.first_day().
struct EpidemicState {
    int first_day = 0;
    int weeks = 0;
    /// [age][day] newly exposed, including imported infections.
    std::vector<std::vector<double>> exposures;
    /// [age][day] susceptibles at the start of the day; one extra trailing entry.
    std::vector<std::vector<double>> susceptibles;
    /// [age][day] imported infections.
    std::vector<std::vector<double>> influx;
    /// [age][week-1] modelled reported cases: exposures 6..13 days before the week start.
    std::vector<std::vector<double>> weekly_cases;
    /// [age][week-1] weekly_cases divided by susceptibles at the start of that exposure span.
    std::vector<std::vector<double>> infection_probability;

    std::size_t index(int day) const { return static_cast<std::size_t>(day - first_day); }
    double susceptible_at(std::size_t age, int day) const { return susceptibles[age][index(day)]; }

    /// Exposures on the days of calendar week t.
    double weekly_exposures(std::size_t age, int week) const
    {
        double s = 0.0;
        for (int d = kDaysPerWeek * (week - 1); d < kDaysPerWeek * week; ++d) {
            s += exposures[age][index(d)];
        }
        return s;
    }
};

/// [age][day] base reproduction numbers from config.first_day() to the window end.
inline std::vector<std::vector<double>> base_reproduction_table(const DynamicsParams& p, const DynamicsConfig& cfg,
                                                                int weeks)
{
    const int first = cfg.first_day();
    const auto days = static_cast<std::size_t>(kDaysPerWeek * weeks - first);
    std::vector<std::vector<double>> out(p.groups(), std::vector<double>(days));
    for (std::size_t a = 0; a < p.groups(); ++a) {
        for (std::size_t i = 0; i < days; ++i) {
            out[a][i] = base_reproduction(p, a, double(first) + double(i));
        }
    }
    return out;
}

/// Runs the renewal recursion from precomputed base reproduction numbers.
///
/// E_a(t) = sum_a' sqrt(R_a) C_aa' sqrt(R_a') sum_tau E_a'(t-1-tau) g(tau) * S_a(t)/D_a + h_a(t)
/// with R = R_base * infectability. Imported infections do not deplete the local susceptibles.
/// With depletion on, daily transmission is capped at S_a(t).
inline EpidemicState simulate_with_base(const std::vector<std::vector<double>>& r_base, const DynamicsParams& p,
                                        const DynamicsConfig& cfg, const ContactMatrix& contacts,
                                        const std::vector<std::vector<double>>& infect, const Seeding& seed,
                                        std::span<const double> population, int weeks)
{
    const std::size_t groups = population.size();
    const auto klen = cfg.kernel.size();
    const int first = cfg.first_day();
    const auto days = static_cast<std::size_t>(kDaysPerWeek * weeks - first);
    if (seed.exposures.size() != groups || r_base.size() != groups || infect.size() != groups) {
        throw ConfigError("simulation inputs disagree on the number of age groups");
    }

    EpidemicState st;
    st.first_day = first;
    st.weeks = weeks;
    st.exposures.assign(groups, std::vector<double>(days, 0.0));
    st.susceptibles.assign(groups, std::vector<double>(days + 1, 0.0));
    st.influx.assign(groups, std::vector<double>(days, 0.0));

    // Exposure history including the seeding days, offset by klen.
    std::vector<std::vector<double>> hist(groups, std::vector<double>(days + klen, 0.0));
    for (std::size_t a = 0; a < groups; ++a) {
        if (seed.exposures[a].size() != klen) {
            throw ConfigError("seeding must cover exactly the kernel length");
        }
        std::copy(seed.exposures[a].begin(), seed.exposures[a].end(), hist[a].begin());
        st.susceptibles[a][0] = population[a];
    }

    std::vector<double> sqrt_r(groups), pressure(groups);
    const double gamma = contacts.gamma();
    const auto& rho = contacts.shares();
    for (std::size_t i = 0; i < days; ++i) {
        const int day = first + static_cast<int>(i);
        const int week = day < 0 ? 0 : day / kDaysPerWeek;
        for (std::size_t a = 0; a < groups; ++a) {
            const double inf = day < 0 ? 1.0 : infect[a][static_cast<std::size_t>(week)];
            sqrt_r[a] = std::sqrt(r_base[a][i] * inf);
            double k = 0.0;
            for (std::size_t tau = 0; tau < klen; ++tau) {
                k += hist[a][i + klen - 1 - tau] * cfg.kernel[tau];
            }
            pressure[a] = sqrt_r[a] * k;
        }
        // C p = (1 - gamma) p + gamma rho (1^T p)
        double total_pressure = 0.0;
        for (double x : pressure) {
            total_pressure += x;
        }
        for (std::size_t a = 0; a < groups; ++a) {
            const double mix = (1.0 - gamma) * pressure[a] + gamma * rho(static_cast<Eigen::Index>(a)) * total_pressure;
            double trans = sqrt_r[a] * mix;
            const double s = st.susceptibles[a][i];
            if (cfg.susceptible_depletion) {
                // a single day cannot infect more than are left
                trans = std::min(trans * s / population[a], std::max(s, 0.0));
            }
            const double h = p.influx[a][static_cast<std::size_t>(week)] / kDaysPerWeek;
            const double e = trans + h;
            const double s_next = s - trans;
            if (!std::isfinite(e) || e < 0.0 || !(s_next >= -1e-9 * population[a])) {
                throw NumericalError("negative or non-finite state in age group " + std::to_string(a) + " on day " +
                                     std::to_string(day) + " (exposures " + format_double(e) + ", susceptibles " +
                                     format_double(s_next) + ")");
            }
            st.exposures[a][i] = e;
            st.influx[a][i] = h;
            st.susceptibles[a][i + 1] = s_next;
            hist[a][i + klen] = e;
        }
    }

    st.weekly_cases.assign(groups, std::vector<double>(static_cast<std::size_t>(weeks), 0.0));
    st.infection_probability = st.weekly_cases;
    for (std::size_t a = 0; a < groups; ++a) {
        for (int t = 1; t <= weeks; ++t) {
            const int week_start = kDaysPerWeek * (t - 1);
            double c = 0.0;
            for (int lag = cfg.reporting_delay; lag <= cfg.reporting_delay + kDaysPerWeek; ++lag) {
                c += st.exposures[a][st.index(week_start - lag)];
            }
            const auto wi = static_cast<std::size_t>(t - 1);
            st.weekly_cases[a][wi] = c;
            const double s0 = st.susceptible_at(a, week_start - cfg.reporting_delay - kDaysPerWeek);
            st.infection_probability[a][wi] = s0 > 0.0 ? c / s0 : 0.0;
        }
    }
    return st;
}

inline EpidemicState simulate(const DynamicsParams& p, const DynamicsConfig& cfg, const ContactMatrix& contacts,
                              const std::vector<std::vector<double>>& infect, const Seeding& seed,
                              std::span<const double> population, int weeks)
{
    return simulate_with_base(base_reproduction_table(p, cfg, weeks), p, cfg, contacts, infect, seed, population,
                              weeks);
}

/// Convenience overload deriving infectability from a strategy.
inline EpidemicState simulate(const DynamicsParams& p, const DynamicsConfig& cfg, const AllocationStrategy& strategy,
                              const WaningCurve& waning, const Seeding& seed, std::span<const double> population)
{
    ContactMatrix contacts(cfg.mixing, population);
    return simulate(p, cfg, contacts, infectability_table(strategy, waning, p.protection), seed, population,
                    strategy.weeks());
}

/// Weekly rows: age_label, week, exposures, susceptibles (at the week start), weekly_cases, infection_probability.
inline void write_simulation_csv(const EpidemicState& st, std::span<const std::string> labels, Date start,
                                 const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out) {
        throw DataError("cannot write " + path.string());
    }
    out << "age_label,week,exposures,susceptibles,weekly_cases,infection_probability\n";
    for (std::size_t a = 0; a < labels.size(); ++a) {
        for (int t = 1; t <= st.weeks; ++t) {
            const auto ti = static_cast<std::size_t>(t - 1);
            out << labels[a] << ',' << format_date(start + std::chrono::days{kDaysPerWeek * (t - 1)}) << ','
                << format_double(st.weekly_exposures(a, t)) << ','
                << format_double(st.susceptible_at(a, kDaysPerWeek * (t - 1))) << ','
                << format_double(st.weekly_cases[a][ti]) << ',' << format_double(st.infection_probability[a][ti])
                << '\n';
        }
    }
}

struct CorrectionFactor {
    /// [age][week-1] f1.
    std::vector<std::vector<double>> values;
    /// Cells where the factual probability was zero and the factor was set to 1.
    std::size_t flagged = 0;
};

/// Ratio of counterfactual to factual weekly infection probability.
inline CorrectionFactor correction_factor(const EpidemicState& factual, const EpidemicState& counterfactual)
{
    CorrectionFactor f;
    f.values = factual.infection_probability;
    for (std::size_t a = 0; a < f.values.size(); ++a) {
        for (std::size_t t = 0; t < f.values[a].size(); ++t) {
            const double base = factual.infection_probability[a][t];
            const double alt = counterfactual.infection_probability[a][t];
            if (base > 0.0) {
                f.values[a][t] = alt / base;
            }
            else {
                f.values[a][t] = 1.0;
                if (alt > 0.0) {
                    ++f.flagged;
                }
            }
        }
    }
    return f;
}

} // namespace counterfact

#endif // COUNTERFACT_DYNAMICS_HPP
