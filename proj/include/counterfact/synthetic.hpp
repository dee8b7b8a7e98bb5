#ifndef COUNTERFACT_SYNTHETIC_HPP
#define COUNTERFACT_SYNTHETIC_HPP

#include "counterfact/common.hpp"
#include "counterfact/data.hpp"
#include "counterfact/dynamics.hpp"
#include "counterfact/severity.hpp"
#include "counterfact/strategy.hpp"
#include "counterfact/waning.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

namespace counterfact
{

/// Linear roll-out of the three doses in one age group.
struct Campaign {
    double first_uptake = 0.0;
    /// Fraction of first-dose recipients who get a second dose, three weeks later.
    double second_share = 0.95;
    /// Fraction of second-dose recipients who get a booster.
    double booster_share = 0.0;
    int start_week = 1;
    int rollout_weeks = 1;
    int booster_start_week = 0;
    int booster_rollout_weeks = 1;
};

inline DoseMarginals campaign_marginals(const std::vector<Campaign>& campaigns, int weeks)
{
    auto m = DoseMarginals::zeros(campaigns.size(), weeks);
    auto put = [&](std::size_t a, int dose, int week, double mass) {
        if (week >= 1 && week <= weeks) {
            m.per_age[a][static_cast<std::size_t>(dose - 1)][static_cast<std::size_t>(week - 1)] += mass;
        }
    };
    for (std::size_t a = 0; a < campaigns.size(); ++a) {
        const auto& c = campaigns[a];
        const double per_week = c.first_uptake / c.rollout_weeks;
        double second_given = 0.0;
        for (int k = 0; k < c.rollout_weeks; ++k) {
            put(a, 1, c.start_week + k, per_week);
            put(a, 2, c.start_week + k + 3, per_week * c.second_share);
            if (c.start_week + k + 3 <= weeks) {
                second_given += per_week * c.second_share;
            }
        }
        if (c.booster_share > 0.0) {
            for (int k = 0; k < c.booster_rollout_weeks; ++k) {
                put(a, 3, c.booster_start_week + k, second_given * c.booster_share / c.booster_rollout_weeks);
            }
        }
    }
    return m;
}

struct SyntheticSpec {
    std::string name = "synthetic";
    Date start{};
    int weeks = 0;
    std::vector<AgeGroup> groups;
    std::vector<Campaign> campaigns;

    DynamicsParams dynamics;
    DynamicsConfig config;
    /// Seeding level: exposures per pre-window day are these divided by 7.
    std::vector<double> initial_weekly_cases;

    /// Empty: f0 is `severity_scale` times the population-wide weekly infection incidence.
    std::vector<double> f0;
    double severity_scale = 0.03;
    std::array<std::vector<double>, kStatuses> g;
    WaningCurve waning = default_waning();

    /// Student-t(4) noise with scale case_kappa * sqrt(C + 1) on reported cases.
    bool case_noise = false;
    double case_kappa = 0.3;
    /// Poisson noise on severe counts.
    bool severe_noise = false;

    std::vector<double> populations() const
    {
        std::vector<double> p;
        for (const auto& g : groups) {
            p.push_back(g.population);
        }
        return p;
    }
};

struct SyntheticBundle {
    ObservedDataset data;
    /// Spec with f0 resolved.
    SyntheticSpec truth;
    EpidemicState state;
    std::uint64_t seed = 0;
};

inline void validate_spec(const SyntheticSpec& s)
{
    const auto n = s.groups.size();
    if (n == 0 || s.weeks <= 0) {
        throw ConfigError("synthetic spec needs at least one group and one week");
    }
    for (const auto& g : s.groups) {
        if (!(g.population > 0.0)) {
            throw ConfigError("synthetic spec: population of '" + g.label + "' must be positive");
        }
    }
    if (s.campaigns.size() != n || s.dynamics.r0.size() != n || s.dynamics.change_points.size() != n ||
        s.dynamics.influx.size() != n || s.initial_weekly_cases.size() != n) {
        throw ConfigError("synthetic spec: per-group tables disagree on the number of groups");
    }
    for (const auto& h : s.dynamics.influx) {
        if (h.size() != static_cast<std::size_t>(s.weeks)) {
            throw ConfigError("synthetic spec: influx must cover every week");
        }
        for (double x : h) {
            if (!(x >= 0.0)) {
                throw ConfigError("synthetic spec: influx must be non-negative");
            }
        }
    }
    for (double r : s.dynamics.r0) {
        if (!(r >= 0.0)) {
            throw ConfigError("synthetic spec: R0 must be non-negative");
        }
    }
    for (const auto& gv : s.g) {
        if (gv.size() != n) {
            throw ConfigError("synthetic spec: g needs one value per group and vaccination status");
        }
        for (double x : gv) {
            if (!(x > 0.0)) {
                throw ConfigError("synthetic spec: g must be positive");
            }
        }
    }
    if (!s.f0.empty() && s.f0.size() != static_cast<std::size_t>(s.weeks)) {
        throw ConfigError("synthetic spec: f0 must cover every week");
    }
}

/// Simulates a dataset from known parameters. Deterministic for a fixed seed; the seed only
/// matters when noise is switched on.
inline SyntheticBundle generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed)
{
    validate_spec(spec);
    SyntheticBundle b;
    b.seed = seed;
    b.truth = spec;
    auto& d = b.data;
    d = make_empty_dataset(spec.start, spec.weeks, spec.groups);
    const auto pop = spec.populations();
    const auto m = static_cast<std::size_t>(spec.weeks);

    const auto marg = campaign_marginals(spec.campaigns, spec.weeks);
    for (std::size_t a = 0; a < pop.size(); ++a) {
        for (std::size_t v = 0; v < kDoses; ++v) {
            for (std::size_t t = 0; t < m; ++t) {
                d.dose_counts[a][v][t] = marg.per_age[a][v][t] * pop[a];
            }
        }
    }
    try {
        derive_vaccination_tables(d);
    }
    catch (const InfeasibleError& e) {
        throw ConfigError(std::string("synthetic campaign infeasible: ") + e.what());
    }

    ContactMatrix contacts(spec.config.mixing, pop);
    std::vector<double> seed_level;
    for (double c : spec.initial_weekly_cases) {
        seed_level.push_back(c);
    }
    const auto seeding = Seeding::from_first_week(seed_level, spec.config.kernel.size());
    b.state = simulate(spec.dynamics, spec.config, contacts,
                       infectability_table(d.factual, spec.waning, spec.dynamics.protection), seeding, pop,
                       spec.weeks);

    std::mt19937_64 rng(seed);
    std::student_t_distribution<double> student(4.0);
    for (std::size_t a = 0; a < pop.size(); ++a) {
        for (std::size_t t = 0; t < m; ++t) {
            double c = b.state.weekly_cases[a][t];
            if (spec.case_noise) {
                c = std::round(std::max(0.0, c + spec.case_kappa * std::sqrt(c + 1.0) * student(rng)));
            }
            d.cases[a][t] = std::min(c, pop[a]);
        }
    }

    auto& f0 = b.truth.f0;
    if (f0.empty()) {
        const double total = std::accumulate(pop.begin(), pop.end(), 0.0);
        f0.assign(m, 0.0);
        for (std::size_t t = 0; t < m; ++t) {
            double c = 0.0;
            for (std::size_t a = 0; a < pop.size(); ++a) {
                c += b.state.weekly_cases[a][t];
            }
            f0[t] = spec.severity_scale * c / total;
        }
    }

    for (std::size_t v = 0; v < kStatuses; ++v) {
        for (std::size_t a = 0; a < pop.size(); ++a) {
            for (std::size_t t = 0; t < m; ++t) {
                const double stratum = pop[a] * d.status_fractions[a][t][v];
                auto& cell = d.severe[v][a][t];
                cell.population = stratum;
                if (!(stratum > 0.0)) {
                    continue;
                }
                double mh = 1.0;
                if (v > 0) {
                    mh = 0.0;
                    const auto& dist = d.waning_distribution[v][a][t];
                    for (std::size_t w = 0; w < dist.size(); ++w) {
                        mh += dist[w] * spec.waning.relative_risk(static_cast<int>(v), double(w));
                    }
                }
                const double p = f0[t] * spec.g[v][a] * mh;
                if (p > 1.0) {
                    throw ConfigError("synthetic severity probability exceeds one");
                }
                double count = stratum * p;
                if (spec.severe_noise) {
                    count = double(std::poisson_distribution<long>(count)(rng));
                    count = std::min(count, stratum);
                }
                cell.count = count;
            }
        }
    }
    validate_dataset(d);
    return b;
}

// ---------------------------------------------------------------------------
// Presets

/// Change points every `spacing` days starting at `first_day`, all with zero effect.
inline std::vector<ChangePoint> change_point_grid(int count, double first_day, double spacing = 21.0,
                                                  double length = 4.0)
{
    std::vector<ChangePoint> out;
    for (int n = 0; n < count; ++n) {
        out.push_back({0.0, length, first_day + spacing * n});
    }
    return out;
}

/// Two groups over 30 weeks with a piecewise base reproduction number. Small enough for a
/// complete posterior fit on a desktop.
inline SyntheticSpec desk_spec()
{
    SyntheticSpec s;
    s.name = "desk";
    s.start = parse_date("2021-01-03");
    s.weeks = 30;
    s.groups = {{"20-29", 1'200'000.0}, {"60-69", 800'000.0}};
    s.campaigns = {
        {0.35, 0.95, 0.5, 10, 10, 27, 3},
        {0.60, 0.97, 0.6, 2, 6, 22, 4},
    };
    s.dynamics.r0 = {1.25, 1.15};
    s.dynamics.change_points.assign(2, change_point_grid(10, 7.0));
    for (auto& cps : s.dynamics.change_points) {
        cps[1].effect = -0.12;
        cps[4].effect = 0.65;
        cps[7].effect = -0.40;
    }
    s.dynamics.influx.assign(2, std::vector<double>(30, 0.0));
    for (std::size_t a = 0; a < 2; ++a) {
        for (auto& h : s.dynamics.influx[a]) {
            h = 0.7 * s.groups[a].population / 1e6;
        }
    }
    s.initial_weekly_cases = {3000.0, 1500.0};
    s.g[0] = {0.08, 1.0};
    s.g[1] = {0.04, 0.45};
    s.g[2] = {0.012, 0.15};
    s.g[3] = {0.004, 0.05};
    return s;
}

inline constexpr std::array<double, 9> kIsraelPopulation = {3'371'000, 1'254'000, 1'179'000, 1'072'000, 860'000,
                                                            768'000,   514'000,   227'000,   46'000};

/// Nine Israeli age groups over 53 weeks from 20 December 2020 with an elderly-first campaign,
/// booster roll-out from August 2021 and two infection waves. Stands in for the registry data.
inline SyntheticSpec israel_like_spec()
{
    SyntheticSpec s;
    s.name = "israel-like";
    s.start = parse_date("2020-12-20");
    s.weeks = 53;
    for (std::size_t a = 0; a < 9; ++a) {
        s.groups.push_back({std::string(kAgeLabels[a]), kIsraelPopulation[a]});
    }
    // first uptake, second share, booster share, start, roll-out, booster start, booster roll-out
    s.campaigns = {
        {0.38, 0.90, 0.45, 10, 12, 37, 10}, {0.80, 0.94, 0.65, 7, 8, 35, 8},  {0.83, 0.95, 0.70, 6, 8, 34, 8},
        {0.87, 0.95, 0.75, 5, 7, 34, 7},   {0.89, 0.96, 0.80, 4, 6, 33, 6},  {0.91, 0.97, 0.85, 2, 5, 32, 5},
        {0.94, 0.97, 0.90, 1, 4, 31, 4},   {0.94, 0.97, 0.90, 1, 3, 31, 3},  {0.90, 0.96, 0.88, 1, 3, 31, 3},
    };
    const std::size_t n = 9;
    const std::array<double, 9> r0 = {1.375, 1.32, 1.32, 1.265, 1.232, 1.21, 1.188, 1.155, 1.155};
    for (std::size_t a = 0; a < n; ++a) {
        s.dynamics.r0.push_back(r0[a]);
        auto cps = change_point_grid(17, 21.0);
        cps[0].effect = -0.30; // January lockdown
        cps[3].effect = 0.20;  // March reopening
        cps[4].effect = -0.25;
        cps[8].effect = 1.18;  // Delta
        cps[10].effect = -0.35;
        cps[12].effect = -0.35;
        s.dynamics.change_points.push_back(cps);
        s.dynamics.influx.push_back(std::vector<double>(53, 7.0 * 0.1 * kIsraelPopulation[a] / 1e6));
    }
    for (std::size_t t = 24; t < 32; ++t) {
        for (std::size_t a = 0; a < n; ++a) {
            s.dynamics.influx[a][t] = 7.0 * 2.0 * kIsraelPopulation[a] / 1e6; // summer travel
        }
    }
    s.initial_weekly_cases = {9000, 3600, 3100, 2800, 2000, 1500, 900, 350, 80};
    const std::array<double, 9> g0 = {0.01, 0.03, 0.06, 0.15, 0.4, 1.0, 2.2, 4.5, 7.0};
    const std::array<double, kDoses> rel = {0.5, 0.15, 0.05};
    s.severity_scale = 0.09;
    for (std::size_t a = 0; a < n; ++a) {
        s.g[0].push_back(g0[a]);
        for (std::size_t v = 0; v < kDoses; ++v) {
            s.g[v + 1].push_back(g0[a] * rel[v]);
        }
    }
    return s;
}

// ---------------------------------------------------------------------------
// Ground truth serialisation

inline nlohmann::json dynamics_to_json(const DynamicsParams& p, const std::vector<std::string>& labels)
{
    nlohmann::json j;
    j["R0"] = p.r0;
    j["protection"] = p.protection;
    j["influx"] = p.influx;
    nlohmann::json cps = nlohmann::json::array();
    for (std::size_t a = 0; a < p.groups(); ++a) {
        nlohmann::json row = nlohmann::json::array();
        for (const auto& cp : p.change_points[a]) {
            row.push_back({{"effect", cp.effect}, {"length", cp.length}, {"day", cp.day}});
        }
        cps.push_back(row);
    }
    j["change_points"] = cps;
    j["labels"] = labels;
    return j;
}

inline DynamicsParams dynamics_from_json(const nlohmann::json& j)
{
    DynamicsParams p;
    p.r0 = j.at("R0").get<std::vector<double>>();
    p.protection = j.at("protection").get<std::array<double, kDoses>>();
    p.influx = j.at("influx").get<std::vector<std::vector<double>>>();
    for (const auto& row : j.at("change_points")) {
        std::vector<ChangePoint> cps;
        for (const auto& c : row) {
            cps.push_back({c.at("effect").get<double>(), c.at("length").get<double>(), c.at("day").get<double>()});
        }
        p.change_points.push_back(cps);
    }
    return p;
}

inline nlohmann::json waning_to_json(const WaningCurve& w)
{
    return {{"mode", w.mode() == WaningCurve::Mode::Logistic ? "logistic" : "constant"},
            {"midpoint_weeks", w.midpoint()},
            {"steepness_weeks", w.steepness()},
            {"half_life_scale", w.half_life_scale()},
            {"full_efficacy", w.full_efficacy()}};
}

inline nlohmann::json truth_to_json(const SyntheticBundle& b)
{
    const auto& s = b.truth;
    const auto labels = b.data.labels();
    nlohmann::json j;
    j["name"] = s.name;
    j["seed"] = b.seed;
    j["start"] = format_date(s.start);
    j["weeks"] = s.weeks;
    j["mixing"] = s.config.mixing;
    j["dynamics"] = dynamics_to_json(s.dynamics, labels);
    j["weekly_base_reproduction"] = weekly_base_reproduction(s.dynamics, s.weeks);
    j["initial_weekly_cases"] = s.initial_weekly_cases;
    j["f0"] = s.f0;
    j["g"] = s.g;
    j["waning"] = waning_to_json(s.waning);
    j["weekly_cases_noise_free"] = b.state.weekly_cases;
    return j;
}

inline void save_truth(const SyntheticBundle& b, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    std::ofstream out(dir / "truth.json");
    out << truth_to_json(b).dump(2) << '\n';
}

} // namespace counterfact

#endif // COUNTERFACT_SYNTHETIC_HPP
