#ifndef COUNTERFACT_DATA_HPP
#define COUNTERFACT_DATA_HPP

#include "counterfact/common.hpp"
#include "counterfact/strategy.hpp"

#include <array>
#include <cmath>
#include <string>
#include <vector>

namespace counterfact
{

struct AgeGroup {
    std::string label;
    double population = 0.0;

    bool operator==(const AgeGroup&) const = default;
};

/// Severe cases in one (doses, age, week) stratum with the stratum's size. Kept as a pair
/// so that empty strata stay representable.
struct SevereCell {
    double count = 0.0;
    double population = 0.0;

    double probability() const { return population > 0.0 ? count / population : 0.0; }
    bool operator==(const SevereCell&) const = default;
};

template <class T>
using PerStatusAgeWeek = std::array<std::vector<std::vector<T>>, kStatuses>;

/// Weekly age-resolved observations over an analysis window of `weeks` weeks.
/// Week t (1-based) spans days 7(t-1) .. 7t-1 after `start`.
struct ObservedDataset {
    Date start{};
    int weeks = 0;
    std::vector<AgeGroup> groups;
    /// [age][week-1] reported cases C_a(t).
    std::vector<std::vector<double>> cases;
    /// [status][age][week-1].
    PerStatusAgeWeek<SevereCell> severe;
    /// [age][dose-1][week-1] persons newly receiving the dose.
    std::vector<std::array<std::vector<double>, kDoses>> dose_counts;

    // Derived from dose_counts by derive_vaccination_tables().
    AllocationStrategy factual;
    /// [age][week-1][status] Unv / Vacc^v fractions.
    std::vector<std::vector<std::array<double, kStatuses>>> status_fractions;
    /// [status][age][week-1] -> P(W = w | v, a, t), w = 0..M-1; empty where the stratum is empty.
    PerStatusAgeWeek<std::vector<double>> waning_distribution;

    std::size_t group_count() const { return groups.size(); }

    std::vector<double> populations() const
    {
        std::vector<double> p;
        for (const auto& g : groups) {
            p.push_back(g.population);
        }
        return p;
    }

    std::vector<std::string> labels() const
    {
        std::vector<std::string> l;
        for (const auto& g : groups) {
            l.push_back(g.label);
        }
        return l;
    }

    double total_population() const
    {
        double d = 0.0;
        for (const auto& g : groups) {
            d += g.population;
        }
        return d;
    }

    Date week_start(int week) const { return start + std::chrono::days{kDaysPerWeek * (week - 1)}; }

    DoseMarginals dose_marginals() const
    {
        auto m = DoseMarginals::zeros(groups.size(), weeks);
        for (std::size_t a = 0; a < groups.size(); ++a) {
            for (std::size_t d = 0; d < kDoses; ++d) {
                for (std::size_t t = 0; t < static_cast<std::size_t>(weeks); ++t) {
                    m.per_age[a][d][t] = dose_counts[a][d][t] / groups[a].population;
                }
            }
        }
        return m;
    }

    /// Only raw observations take part in equality; derived tables follow from them.
    bool same_observations(const ObservedDataset& o) const
    {
        return start == o.start && weeks == o.weeks && groups == o.groups && cases == o.cases &&
               severe == o.severe && dose_counts == o.dose_counts;
    }
};

/// Allocates empty tables sized for the given groups and window.
inline ObservedDataset make_empty_dataset(Date start, int weeks, std::vector<AgeGroup> groups)
{
    ObservedDataset d;
    d.start = start;
    d.weeks = weeks;
    d.groups = std::move(groups);
    const auto g = d.groups.size();
    const auto m = static_cast<std::size_t>(weeks);
    d.cases.assign(g, std::vector<double>(m, 0.0));
    for (auto& s : d.severe) {
        s.assign(g, std::vector<SevereCell>(m));
    }
    d.dose_counts.resize(g);
    for (auto& a : d.dose_counts) {
        for (auto& v : a) {
            v.assign(m, 0.0);
        }
    }
    return d;
}

/// Factual joint, vaccination-state fractions and waning-time distributions from dose counts.
inline void derive_vaccination_tables(ObservedDataset& d)
{
    d.factual = reconstruct_factual(d.dose_marginals(), "Factual");
    d.status_fractions = status_fractions(d.factual);
    const auto mass = waning_mass(d.factual);
    for (std::size_t v = 0; v < kStatuses; ++v) {
        d.waning_distribution[v].assign(d.groups.size(), std::vector<std::vector<double>>(static_cast<std::size_t>(d.weeks)));
        for (std::size_t a = 0; a < d.groups.size(); ++a) {
            for (std::size_t t = 0; t < static_cast<std::size_t>(d.weeks); ++t) {
                const auto& row = mass[v][a][t];
                double total = 0.0;
                for (double x : row) {
                    total += x;
                }
                if (total <= 0.0) {
                    continue;
                }
                auto& out = d.waning_distribution[v][a][t];
                out.resize(row.size());
                for (std::size_t w = 0; w < row.size(); ++w) {
                    out[w] = row[w] / total;
                }
            }
        }
    }
}

/// Throws DataError describing the first violated invariant.
inline void validate_dataset(const ObservedDataset& d)
{
    if (d.groups.empty()) {
        throw DataError("dataset has no age groups");
    }
    if (d.weeks <= 0) {
        throw DataError("no observations");
    }
    std::vector<std::string> seen;
    for (const auto& g : d.groups) {
        if (!(g.population > 0.0)) {
            throw DataError("age group '" + g.label + "' has non-positive population");
        }
        if (std::find(seen.begin(), seen.end(), g.label) != seen.end()) {
            throw DataError("duplicate age group '" + g.label + "'");
        }
        seen.push_back(g.label);
    }
    const auto m = static_cast<std::size_t>(d.weeks);
    for (std::size_t a = 0; a < d.groups.size(); ++a) {
        const auto& label = d.groups[a].label;
        for (std::size_t t = 0; t < m; ++t) {
            const double c = d.cases[a][t];
            if (!(c >= 0.0) || c > d.groups[a].population) {
                throw DataError("cases out of range for " + label + " in week " + std::to_string(t + 1));
            }
            for (std::size_t dose = 0; dose < kDoses; ++dose) {
                if (!(d.dose_counts[a][dose][t] >= 0.0)) {
                    throw DataError("negative dose count for " + label + " in week " + std::to_string(t + 1));
                }
            }
            for (std::size_t v = 0; v < kStatuses; ++v) {
                const auto& cell = d.severe[v][a][t];
                if (!(cell.count >= 0.0) || !(cell.population >= 0.0) || cell.count > cell.population) {
                    throw DataError("severe-case stratum out of range for " + label + ", " + std::to_string(v) +
                                    " doses, week " + std::to_string(t + 1));
                }
            }
        }
    }
    if (!d.status_fractions.empty()) {
        for (std::size_t a = 0; a < d.groups.size(); ++a) {
            for (std::size_t t = 0; t < m; ++t) {
                double s = 0.0;
                for (double x : d.status_fractions[a][t]) {
                    s += x;
                }
                if (std::abs(s - 1.0) > 1e-9) {
                    throw DataError("vaccination fractions do not close for " + d.groups[a].label + " in week " +
                                    std::to_string(t + 1));
                }
            }
        }
        for (std::size_t v = 0; v < kStatuses; ++v) {
            for (std::size_t a = 0; a < d.groups.size(); ++a) {
                for (std::size_t t = 0; t < m; ++t) {
                    const auto& row = d.waning_distribution[v][a][t];
                    if (row.empty()) {
                        continue;
                    }
                    double s = 0.0;
                    for (double x : row) {
                        s += x;
                    }
                    if (std::abs(s - 1.0) > 1e-9) {
                        throw DataError("waning-time distribution does not normalise");
                    }
                }
            }
        }
    }
}

} // namespace counterfact

#endif // COUNTERFACT_DATA_HPP
