#ifndef COUNTERFACT_SEVERITY_HPP
#define COUNTERFACT_SEVERITY_HPP

#include "counterfact/common.hpp"
#include "counterfact/data.hpp"
#include "counterfact/waning.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace counterfact
{

/// P(S=1 | V, A, T, W) = f0(T) g(V, A) h^V(W) f1(A, T).
struct SeverityFactorization {
    std::vector<std::string> labels;
    /// [week-1]
    std::vector<double> f0;
    /// [status][age]; NaN where the stratum carried no information.
    std::array<std::vector<double>, kStatuses> g;
    WaningCurve waning;
    /// [age][week-1]; ones for the factual strategy.
    std::vector<std::vector<double>> f1;

    int weeks() const { return static_cast<int>(f0.size()); }
    std::size_t groups() const { return labels.size(); }

    bool identified(int v, std::size_t a) const { return std::isfinite(g[static_cast<std::size_t>(v)][a]); }

    double h(int v, double w) const { return v == 0 ? 1.0 : waning.relative_risk(v, w); }

    void reset_correction()
    {
        f1.assign(groups(), std::vector<double>(f0.size(), 1.0));
    }
};

inline double severity_probability(const SeverityFactorization& f, int v, std::size_t a, int t, double w)
{
    const auto ti = static_cast<std::size_t>(t - 1);
    return f.f0[ti] * f.g[static_cast<std::size_t>(v)][a] * f.h(v, w) * f.f1[a][ti];
}

struct SeverityOptions {
    std::string reference_age{kReferenceAge};
    /// Weight weeks by the numerator stratum's population. Uniform week weights otherwise.
    bool person_weights = true;
};

namespace detail
{
/// E_{W|v,a,t}[h^v(W)] under the observed waning-time distribution.
inline double mean_relative_risk(const ObservedDataset& d, const WaningCurve& waning, int v, std::size_t a,
                                 std::size_t t)
{
    if (v == 0) {
        return 1.0;
    }
    const auto& dist = d.waning_distribution[static_cast<std::size_t>(v)][a][t];
    double m = 0.0;
    for (std::size_t w = 0; w < dist.size(); ++w) {
        if (dist[w] > 0.0) {
            m += dist[w] * waning.relative_risk(v, double(w));
        }
    }
    return m;
}

inline bool has_stratum(const ObservedDataset& d, int v, std::size_t a, std::size_t t)
{
    return d.severe[static_cast<std::size_t>(v)][a][t].population > 0.0;
}
} // namespace detail

/// Relative severe-case risk of the unvaccinated, anchored at the reference age.
inline std::vector<double> estimate_g0(const ObservedDataset& d, const SeverityOptions& opt = {})
{
    const auto labels = d.labels();
    const std::size_t ref = index_of_label(labels, opt.reference_age);
    const auto m = static_cast<std::size_t>(d.weeks);
    std::vector<double> g(d.groups.size());
    for (std::size_t a = 0; a < d.groups.size(); ++a) {
        if (a == ref) {
            g[a] = 1.0;
            continue;
        }
        double num = 0.0, den = 0.0;
        bool any = false;
        for (std::size_t t = 0; t < m; ++t) {
            if (!detail::has_stratum(d, 0, a, t) || !detail::has_stratum(d, 0, ref, t)) {
                continue;
            }
            const double wt = opt.person_weights ? d.severe[0][a][t].population : 1.0;
            num += wt * d.severe[0][a][t].probability();
            den += wt * d.severe[0][ref][t].probability();
            any = true;
        }
        if (!any) {
            throw DataError("no unvaccinated exposure for age group '" + labels[a] + "'");
        }
        if (!(den > 0.0)) {
            throw NumericalError("reference age group has no unvaccinated severe cases alongside '" + labels[a] + "'");
        }
        g[a] = num / den;
    }
    return g;
}

/// Risk factors under full immunity for v = 1..3, corrected for the waning observed in each stratum.
/// Entry [0] is a copy of g0. Strata without any informative week are NaN.
inline std::array<std::vector<double>, kStatuses> estimate_gv(const ObservedDataset& d, const WaningCurve& waning,
                                                              const std::vector<double>& g0,
                                                              const SeverityOptions& opt = {})
{
    std::array<std::vector<double>, kStatuses> g;
    g[0] = g0;
    const auto m = static_cast<std::size_t>(d.weeks);
    for (int v = 1; v < kStatuses; ++v) {
        auto& gv = g[static_cast<std::size_t>(v)];
        gv.assign(d.groups.size(), std::numeric_limits<double>::quiet_NaN());
        for (std::size_t a = 0; a < d.groups.size(); ++a) {
            double num = 0.0, den = 0.0;
            for (std::size_t t = 0; t < m; ++t) {
                if (!detail::has_stratum(d, v, a, t) || !detail::has_stratum(d, 0, a, t)) {
                    continue;
                }
                const double mh = detail::mean_relative_risk(d, waning, v, a, t);
                if (!(mh > 0.0)) {
                    continue;
                }
                const double wt = opt.person_weights ? d.severe[static_cast<std::size_t>(v)][a][t].population : 1.0;
                num += wt * d.severe[static_cast<std::size_t>(v)][a][t].probability() / mh;
                den += wt * d.severe[0][a][t].probability();
            }
            if (den > 0.0) {
                gv[a] = num / den * g0[a];
            }
        }
    }
    return g;
}

/// Overall time dependence after removing risk factors and waning; person-weighted over strata.
inline std::vector<double> estimate_f0(const ObservedDataset& d, const std::array<std::vector<double>, kStatuses>& g,
                                       const WaningCurve& waning)
{
    const auto m = static_cast<std::size_t>(d.weeks);
    std::vector<double> f0(m, 0.0);
    for (std::size_t t = 0; t < m; ++t) {
        double num = 0.0, weight = 0.0;
        for (int v = 0; v < kStatuses; ++v) {
            for (std::size_t a = 0; a < d.groups.size(); ++a) {
                const auto& cell = d.severe[static_cast<std::size_t>(v)][a][t];
                const double gva = g[static_cast<std::size_t>(v)][a];
                if (!(cell.population > 0.0) || !std::isfinite(gva) || !(gva > 0.0)) {
                    continue;
                }
                const double mh = detail::mean_relative_risk(d, waning, v, a, t);
                if (!(mh > 0.0)) {
                    continue;
                }
                num += cell.population * cell.probability() / (gva * mh);
                weight += cell.population;
            }
        }
        if (!(weight > 0.0)) {
            throw DataError("no exposed population in week " + std::to_string(t + 1));
        }
        f0[t] = num / weight;
    }
    return f0;
}

/// Full estimation pipeline g0 -> g(v, a) -> f0 with f1 = 1.
inline SeverityFactorization estimate_severity(const ObservedDataset& d, const WaningCurve& waning,
                                               const SeverityOptions& opt = {})
{
    SeverityFactorization f;
    f.labels = d.labels();
    f.waning = waning;
    f.g = estimate_gv(d, waning, estimate_g0(d, opt), opt);
    f.f0 = estimate_f0(d, f.g, waning);
    f.reset_correction();
    return f;
}

/// Replaces unidentified g(v, a) by g(0, a) times the population-weighted mean ratio g(v, .)/g(0, .)
/// over identified groups. Returns the number of filled entries.
inline std::size_t fill_unidentified(SeverityFactorization& f, std::span<const double> population)
{
    std::size_t filled = 0;
    for (int v = 1; v < kStatuses; ++v) {
        auto& gv = f.g[static_cast<std::size_t>(v)];
        double ratio = 0.0, weight = 0.0;
        for (std::size_t a = 0; a < gv.size(); ++a) {
            if (std::isfinite(gv[a])) {
                ratio += population[a] * gv[a] / f.g[0][a];
                weight += population[a];
            }
        }
        if (!(weight > 0.0)) {
            ratio = 1.0 - kSeverityFullEfficacy[static_cast<std::size_t>(v - 1)];
        }
        else {
            ratio /= weight;
        }
        for (std::size_t a = 0; a < gv.size(); ++a) {
            if (!std::isfinite(gv[a])) {
                gv[a] = f.g[0][a] * ratio;
                ++filled;
            }
        }
    }
    return filled;
}

} // namespace counterfact

#endif // COUNTERFACT_SEVERITY_HPP
