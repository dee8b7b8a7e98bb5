#ifndef COUNTERFACT_COUNTERFACTUAL_HPP
#define COUNTERFACT_COUNTERFACTUAL_HPP

#include "counterfact/common.hpp"
#include "counterfact/data.hpp"
#include "counterfact/dynamics.hpp"
#include "counterfact/inference.hpp"
#include "counterfact/parallel.hpp"
#include "counterfact/severity.hpp"
#include "counterfact/strategy.hpp"
#include "counterfact/waning.hpp"

#include <json.hpp>

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace counterfact
{

// ---------------------------------------------------------------------------
// Target function

namespace detail
{
inline void check_window(const AllocationStrategy& s, const SeverityFactorization& f, std::size_t groups)
{
    if (s.weeks() != f.weeks() || s.groups() != f.groups() || groups != s.groups()) {
        throw ConfigError("strategy '" + s.label() + "' covers " + std::to_string(s.groups()) + " groups x " +
                          std::to_string(s.weeks()) + " weeks, severity model " + std::to_string(f.groups()) +
                          " x " + std::to_string(f.weeks()) + ", population " + std::to_string(groups));
    }
}
} // namespace detail

/// [age][week-1] sum over the support of P(t1, t2, t3 | a) g(v, a) h^v(t - t_last).
/// Everything in the target function except D^(a) f0(t) f1(a, t).
inline std::vector<std::vector<double>> branch_sums(const AllocationStrategy& s, const SeverityFactorization& f)
{
    const auto weeks = static_cast<std::size_t>(s.weeks());
    // h^v(w) lookup, w = 0..M-1
    std::array<std::vector<double>, kStatuses> h;
    for (int v = 0; v < kStatuses; ++v) {
        for (std::size_t w = 0; w < weeks; ++w) {
            h[static_cast<std::size_t>(v)].push_back(f.h(v, double(w)));
        }
    }
    std::vector<std::vector<double>> out(s.groups(), std::vector<double>(weeks, 0.0));
    for (std::size_t a = 0; a < s.groups(); ++a) {
        for (const auto& [times, mass] : s.joint(a)) {
            if (mass == 0.0) {
                continue;
            }
            for (int t = 1; t <= s.weeks(); ++t) {
                const int v = times.status(t);
                const double g = f.g[static_cast<std::size_t>(v)][a];
                if (!std::isfinite(g)) {
                    throw DataError("risk factor g(" + std::to_string(v) + ", " + f.labels[a] +
                                    ") is unidentified; fill it before evaluating strategies");
                }
                const double hv = v == 0 ? 1.0 : h[static_cast<std::size_t>(v)][static_cast<std::size_t>(t - times.last_dose(t))];
                out[a][static_cast<std::size_t>(t - 1)] += mass * g * hv;
            }
        }
    }
    return out;
}

/// Expected severe cases per (age, week) under strategy `s`; the grand total is s(pi~).
inline std::vector<std::vector<double>> target_function(const AllocationStrategy& s, const SeverityFactorization& f,
                                                        std::span<const double> population)
{
    detail::check_window(s, f, population.size());
    auto out = branch_sums(s, f);
    for (std::size_t a = 0; a < out.size(); ++a) {
        for (std::size_t t = 0; t < out[a].size(); ++t) {
            out[a][t] *= population[a] * f.f0[t] * f.f1[a][t];
        }
    }
    return out;
}

inline double grand_total(const std::vector<std::vector<double>>& x)
{
    double s = 0.0;
    for (const auto& row : x) {
        for (double v : row) {
            s += v;
        }
    }
    return s;
}

// ---------------------------------------------------------------------------
// Disease profiles

enum class DiseaseProfile { Covid, SpanishFlu, FlatRisk };

inline std::string profile_name(DiseaseProfile p)
{
    switch (p) {
    case DiseaseProfile::Covid: return "COVID";
    case DiseaseProfile::SpanishFlu: return "SpanishFlu";
    case DiseaseProfile::FlatRisk: return "FlatRisk";
    }
    return {};
}

inline DiseaseProfile parse_profile(std::string_view name)
{
    for (auto p : {DiseaseProfile::Covid, DiseaseProfile::SpanishFlu, DiseaseProfile::FlatRisk}) {
        if (profile_name(p) == name) {
            return p;
        }
    }
    throw ConfigError("unknown disease profile '" + std::string(name) + "'");
}

/// Excess respiratory death rate by decade of age, 1918 pandemic, relative scale.
/// Digitised shape: low in children, peaked at 20-39, dipping through midlife.
inline constexpr std::array<double, 10> kSpanishFluShape = {0.6, 0.6, 1.0, 0.9, 0.5, 0.35, 0.35, 0.45, 0.55, 0.6};

/// Unnormalised g(0, a) for a non-COVID profile, looked up by each label's lower age bound.
inline std::vector<double> profile_shape(DiseaseProfile p, std::span<const std::string> labels)
{
    std::vector<double> out;
    for (const auto& l : labels) {
        if (p == DiseaseProfile::FlatRisk) {
            out.push_back(1.0);
            continue;
        }
        const auto decade = static_cast<std::size_t>(std::clamp(age_lower_bound(l) / 10, 0, 9));
        out.push_back(kSpanishFluShape[decade]);
    }
    return out;
}

/// Replaces g by shape * scale with vaccine efficacy held constant across ages: g(v, a) = g(0, a) r_v,
/// r_v the population-weighted mean of the fitted ratios g(v, .)/g(0, .).
inline SeverityFactorization apply_profile(const SeverityFactorization& fitted, std::span<const double> shape,
                                           double scale, std::span<const double> population)
{
    SeverityFactorization f = fitted;
    std::array<double, kStatuses> ratio{1.0, 0.0, 0.0, 0.0};
    for (int v = 1; v < kStatuses; ++v) {
        double num = 0.0, den = 0.0;
        for (std::size_t a = 0; a < f.groups(); ++a) {
            const double gv = fitted.g[static_cast<std::size_t>(v)][a];
            if (std::isfinite(gv) && fitted.g[0][a] > 0.0) {
                num += population[a] * gv / fitted.g[0][a];
                den += population[a];
            }
        }
        ratio[static_cast<std::size_t>(v)] =
            den > 0.0 ? num / den : 1.0 - kSeverityFullEfficacy[static_cast<std::size_t>(v - 1)];
    }
    for (int v = 0; v < kStatuses; ++v) {
        for (std::size_t a = 0; a < f.groups(); ++a) {
            f.g[static_cast<std::size_t>(v)][a] = shape[a] * scale * ratio[static_cast<std::size_t>(v)];
        }
    }
    return f;
}

// ---------------------------------------------------------------------------
// Scenarios

struct ScenarioSpec {
    std::string name;
    AllocationStrategy strategy;
    /// Overrides g(0, .) with age-constant efficacy. Already normalised.
    std::optional<std::vector<double>> risk;
    /// Half-life scale of the waning curve in the counterfactual world; empty = no waning.
    std::optional<double> waning_scale = 1.0;
};

/// Everything shared by all scenarios of one evaluation run.
struct EvaluationContext {
    const ObservedDataset* data = nullptr;
    std::vector<double> population;
    SeverityFactorization severity; // fitted, unidentified entries filled
    WaningCurve waning;
    DynamicsConfig dynamics;
    ContactMatrix contacts{0.0, std::vector<double>{1.0}};
    Seeding seeding;
    std::vector<PosteriorSample> draws;
    /// [draw] factual base reproduction tables and infection probabilities.
    std::vector<std::vector<std::vector<double>>> r_base;
    std::vector<std::vector<std::vector<double>>> factual_probability;
    std::vector<std::string> warnings;
    unsigned threads = 1;

    std::size_t groups() const { return population.size(); }
    int weeks() const { return data->weeks; }
};

inline constexpr std::size_t kPropagatedDraws = 1000;

/// Keeps `limit` evenly spaced draws (all of them if fewer).
inline std::vector<PosteriorSample> thin_draws(const std::vector<PosteriorSample>& samples, std::size_t limit,
                                               std::vector<std::string>* warnings = nullptr)
{
    if (samples.empty()) {
        throw DataError("posterior has no samples");
    }
    if (samples.size() <= limit) {
        if (samples.size() < limit && warnings) {
            warnings->push_back("posterior has " + std::to_string(samples.size()) + " draws, fewer than " +
                                std::to_string(limit) + "; using all of them");
        }
        return samples;
    }
    std::vector<PosteriorSample> out;
    for (std::size_t i = 0; i < limit; ++i) {
        out.push_back(samples[i * samples.size() / limit]);
    }
    return out;
}

/// Fits the severity factorisation and runs the factual dynamics once per draw.
inline EvaluationContext prepare_evaluation(const ObservedDataset& data, const WaningCurve& waning,
                                            const DynamicsConfig& dynamics, const std::vector<PosteriorSample>& samples,
                                            std::size_t max_draws = kPropagatedDraws, unsigned threads = 0,
                                            const SeverityOptions& severity_options = {})
{
    EvaluationContext ctx;
    ctx.data = &data;
    ctx.population = data.populations();
    ctx.waning = waning;
    ctx.dynamics = dynamics;
    ctx.contacts = ContactMatrix(dynamics.mixing, ctx.population);
    ctx.severity = estimate_severity(data, waning, severity_options);
    if (const auto filled = fill_unidentified(ctx.severity, ctx.population); filled > 0) {
        ctx.warnings.push_back(std::to_string(filled) + " risk factors g(v, a) had no data and were filled");
    }
    std::vector<double> first;
    for (const auto& row : data.cases) {
        first.push_back(row.front());
    }
    ctx.seeding = Seeding::from_first_week(first, dynamics.kernel.size());
    ctx.draws = thin_draws(samples, max_draws, &ctx.warnings);
    for (const auto& s : ctx.draws) {
        if (s.params.groups() != ctx.groups() || s.params.influx.empty() ||
            s.params.influx.front().size() != static_cast<std::size_t>(data.weeks)) {
            throw DataError("posterior draws do not match the dataset's groups and weeks");
        }
    }
    ctx.threads = resolve_threads(threads);

    const auto infect = infectability_table(data.factual, waning, kInfectionProtection);
    ctx.r_base.resize(ctx.draws.size());
    ctx.factual_probability.resize(ctx.draws.size());
    parallel_for(ctx.draws.size(), ctx.threads, [&](std::size_t i) {
        const auto& p = ctx.draws[i].params;
        ctx.r_base[i] = base_reproduction_table(p, dynamics, data.weeks);
        ctx.factual_probability[i] = simulate_with_base(ctx.r_base[i], p, dynamics, ctx.contacts, infect,
                                                        ctx.seeding, ctx.population, data.weeks)
                                         .infection_probability;
    });
    return ctx;
}

struct ScenarioResult {
    std::string name;
    std::string strategy;
    std::vector<std::string> labels;
    std::vector<double> population;
    Date start{};
    int weeks = 0;
    /// [draw][age][week-1]
    std::vector<std::vector<std::vector<double>>> severe_draws;
    std::vector<std::vector<std::vector<double>>> infection_draws;
    /// [age][week-1]
    std::vector<std::vector<Interval>> severe;
    std::vector<std::vector<Interval>> infections;
    /// Cells where f1 fell back to 1 because the factual infection probability was zero.
    std::size_t flagged_cells = 0;

    double total_population() const { return std::accumulate(population.begin(), population.end(), 0.0); }
};

namespace detail
{
inline std::vector<std::vector<Interval>> cell_intervals(const std::vector<std::vector<std::vector<double>>>& draws)
{
    const std::size_t groups = draws.front().size(), weeks = draws.front().front().size();
    std::vector<std::vector<Interval>> out(groups, std::vector<Interval>(weeks));
    std::vector<double> xs(draws.size());
    for (std::size_t a = 0; a < groups; ++a) {
        for (std::size_t t = 0; t < weeks; ++t) {
            for (std::size_t i = 0; i < draws.size(); ++i) {
                xs[i] = draws[i][a][t];
            }
            out[a][t] = summarize(xs);
        }
    }
    return out;
}
} // namespace detail

/// Propagates every retained posterior draw through counterfactual dynamics and the target function.
inline ScenarioResult evaluate_scenario(const EvaluationContext& ctx, const ScenarioSpec& spec)
{
    const auto& data = *ctx.data;
    spec.strategy.validate();
    SeverityFactorization f = ctx.severity;
    if (spec.risk) {
        if (spec.risk->size() != ctx.groups()) {
            throw ConfigError("risk profile has the wrong number of age groups");
        }
        f = apply_profile(ctx.severity, *spec.risk, 1.0, ctx.population);
    }
    const WaningCurve waning = spec.waning_scale ? ctx.waning.with_scale(*spec.waning_scale)
                                                 : WaningCurve::constant(ctx.waning.full_efficacy());
    f.waning = waning;
    f.reset_correction();
    detail::check_window(spec.strategy, f, ctx.groups());
    const auto sums = branch_sums(spec.strategy, f);
    const auto infect = infectability_table(spec.strategy, waning, kInfectionProtection);

    ScenarioResult r;
    r.name = spec.name;
    r.strategy = spec.strategy.label();
    r.labels = data.labels();
    r.population = ctx.population;
    r.start = data.start;
    r.weeks = data.weeks;
    r.severe_draws.resize(ctx.draws.size());
    r.infection_draws.resize(ctx.draws.size());
    std::vector<std::size_t> flagged(ctx.draws.size(), 0);
    parallel_for(ctx.draws.size(), ctx.threads, [&](std::size_t i) {
        const auto& p = ctx.draws[i].params;
        const auto cf = simulate_with_base(ctx.r_base[i], p, ctx.dynamics, ctx.contacts, infect, ctx.seeding,
                                           ctx.population, data.weeks);
        EpidemicState base;
        base.infection_probability = ctx.factual_probability[i];
        const auto f1 = correction_factor(base, cf);
        flagged[i] = f1.flagged;
        auto severe = sums;
        for (std::size_t a = 0; a < severe.size(); ++a) {
            for (std::size_t t = 0; t < severe[a].size(); ++t) {
                severe[a][t] *= ctx.population[a] * f.f0[t] * f1.values[a][t];
            }
        }
        r.severe_draws[i] = std::move(severe);
        r.infection_draws[i] = cf.weekly_cases;
    });
    r.flagged_cells = std::accumulate(flagged.begin(), flagged.end(), std::size_t{0});
    r.severe = detail::cell_intervals(r.severe_draws);
    r.infections = detail::cell_intervals(r.infection_draws);
    return r;
}

// ---------------------------------------------------------------------------
// Strategy families

inline AllocationStrategy elderly_first(const ObservedDataset& d)
{
    std::vector<double> lb;
    for (const auto& g : d.groups) {
        lb.push_back(age_lower_bound(g.label));
    }
    return generate_ranked(d.factual, ranking_from_scores(lb, true), d.populations(), "ElderlyFirst");
}

inline AllocationStrategy young_first(const ObservedDataset& d)
{
    std::vector<double> lb;
    for (const auto& g : d.groups) {
        lb.push_back(age_lower_bound(g.label));
    }
    return generate_ranked(d.factual, ranking_from_scores(lb, false), d.populations(), "YoungFirst");
}

inline AllocationStrategy uniform(const ObservedDataset& d)
{
    return generate_uniform(d.factual, d.populations(), "Uniform");
}

inline AllocationStrategy factual(const ObservedDataset& d)
{
    AllocationStrategy s = d.factual;
    s.set_label("Factual");
    return s;
}

inline std::vector<std::string> strategy_names()
{
    return {"Factual", "Uniform", "ElderlyFirst", "YoungFirst"};
}

inline AllocationStrategy named_strategy(const ObservedDataset& d, std::string_view name)
{
    if (name == "Factual") {
        return factual(d);
    }
    if (name == "Uniform") {
        return uniform(d);
    }
    if (name == "ElderlyFirst") {
        return elderly_first(d);
    }
    if (name == "YoungFirst") {
        return young_first(d);
    }
    throw ConfigError("unknown strategy '" + std::string(name) + "'");
}

inline std::vector<ScenarioSpec> strategy_scenarios(const ObservedDataset& d)
{
    std::vector<ScenarioSpec> out;
    for (const auto& n : strategy_names()) {
        out.push_back({n, named_strategy(d, n), std::nullopt, 1.0});
    }
    return out;
}

/// Factual plus, for each age group, the factual strategy with `extra_doses` more person-doses there.
/// With `skipped` set, groups too small to absorb the doses are left out and reported there.
inline std::vector<ScenarioSpec> uptake_scenarios(const ObservedDataset& d, double extra_doses,
                                                  std::vector<std::string>* skipped = nullptr)
{
    std::vector<ScenarioSpec> out;
    out.push_back({"Factual", factual(d), std::nullopt, 1.0});
    const auto pop = d.populations();
    for (std::size_t a = 0; a < d.groups.size(); ++a) {
        const std::string name = "Boost " + d.groups[a].label;
        try {
            out.push_back({name, boost_uptake(d.factual, a, extra_doses, pop, name), std::nullopt, 1.0});
        }
        catch (const InfeasibleError& e) {
            const std::string msg = "uptake boost for " + d.groups[a].label + ": " + e.what();
            if (!skipped) {
                throw DataError(msg);
            }
            skipped->push_back(msg);
        }
    }
    return out;
}

inline std::string waning_label(const std::optional<double>& scale)
{
    if (!scale) {
        return "noWaning";
    }
    return *scale == 1.0 ? "regular" : "scale " + format_double(*scale);
}

/// Fast waning: 25% less time until the efficacy has halved.
inline constexpr double kFastWaningScale = 0.75;

inline std::vector<ScenarioSpec> waning_scenarios(const ObservedDataset& d)
{
    std::vector<ScenarioSpec> out;
    for (const auto& n : strategy_names()) {
        const auto s = named_strategy(d, n);
        for (std::optional<double> scale : {std::optional<double>{}, std::optional<double>{1.0},
                                            std::optional<double>{kFastWaningScale}}) {
            out.push_back({n + " / " + waning_label(scale), s, std::nullopt, scale});
        }
    }
    return out;
}

inline constexpr double kFlatUptake = 0.9;

struct ProfileRun {
    DiseaseProfile profile;
    /// Factor applied to the profile shape; 1 for COVID.
    double scale = 1.0;
    std::vector<double> risk;
    std::vector<ScenarioResult> results; // Uniform, RiskRanked, RiskRankedReversed
};

namespace detail
{
inline std::vector<double> draw_totals(const std::vector<std::vector<std::vector<double>>>& draws)
{
    std::vector<double> out;
    for (const auto& d : draws) {
        out.push_back(grand_total(d));
    }
    return out;
}
} // namespace detail

/// Uniform, RiskRanked and RiskRankedReversed under one disease profile.
///
/// Non-COVID shapes are rescaled so that the median cumulative severe total under Uniform
/// equals `covid_uniform`'s, and ranked strategies use a flat uptake willingness.
inline ProfileRun evaluate_profile(const EvaluationContext& ctx, DiseaseProfile profile,
                                   const ScenarioResult& covid_uniform)
{
    const auto& d = *ctx.data;
    ProfileRun run;
    run.profile = profile;
    const std::string tag = profile_name(profile);
    RankedOptions opts;
    std::optional<std::vector<double>> risk;
    std::vector<double> ranking_scores = ctx.severity.g[0];
    if (profile != DiseaseProfile::Covid) {
        opts.flat_uptake = kFlatUptake;
        const auto shape = profile_shape(profile, d.labels());
        const auto trial = evaluate_scenario(ctx, {tag + " / Uniform", uniform(d), shape, 1.0});
        const double target = quantile(detail::draw_totals(covid_uniform.severe_draws), 0.5);
        const double got = quantile(detail::draw_totals(trial.severe_draws), 0.5);
        if (!(got > 0.0)) {
            throw NumericalError("profile " + tag + " yields no severe cases under Uniform");
        }
        run.scale = target / got;
        risk = shape;
        for (double& x : *risk) {
            x *= run.scale;
        }
        ranking_scores = shape;
    }
    run.risk = risk ? *risk : ctx.severity.g[0];
    const auto pop = d.populations();
    run.results.push_back(evaluate_scenario(ctx, {tag + " / Uniform", uniform(d), risk, 1.0}));
    run.results.push_back(evaluate_scenario(
        ctx, {tag + " / RiskRanked",
              generate_ranked(d.factual, ranking_from_scores(ranking_scores, true), pop, "RiskRanked", opts), risk,
              1.0}));
    run.results.push_back(evaluate_scenario(
        ctx, {tag + " / RiskRankedReversed",
              generate_ranked(d.factual, ranking_from_scores(ranking_scores, false), pop, "RiskRankedReversed", opts),
              risk, 1.0}));
    return run;
}

// ---------------------------------------------------------------------------
// Waves

struct Wave {
    std::string name;
    Date first{};
    Date last{};
};

inline std::vector<Wave> default_waves()
{
    return {{"third", parse_date("2020-12-20"), parse_date("2021-04-11")},
            {"fourth", parse_date("2021-06-20"), parse_date("2021-11-07")}};
}

/// "name:YYYY-MM-DD:YYYY-MM-DD"
inline Wave parse_wave(std::string_view s)
{
    const auto a = s.find(':');
    const auto b = a == std::string_view::npos ? a : s.find(':', a + 1);
    if (b == std::string_view::npos) {
        throw ConfigError("wave must be written name:first:last, got '" + std::string(s) + "'");
    }
    try {
        Wave w{std::string(s.substr(0, a)), parse_date(s.substr(a + 1, b - a - 1)), parse_date(s.substr(b + 1))};
        if (w.last < w.first) {
            throw ConfigError("wave '" + w.name + "' ends before it starts");
        }
        return w;
    }
    catch (const DataError& e) {
        throw ConfigError(e.what());
    }
}

struct WaveRow {
    std::string scenario;
    std::string wave;
    std::string age_label; // "all" for the whole population
    std::string metric;    // infections | severe
    Interval per_100k;
};

/// Week indices (0-based) whose start date falls inside the wave.
inline std::vector<std::size_t> wave_weeks(const ScenarioResult& r, const Wave& w)
{
    std::vector<std::size_t> out;
    for (int t = 1; t <= r.weeks; ++t) {
        const Date d = r.start + std::chrono::days{kDaysPerWeek * (t - 1)};
        if (d >= w.first && d <= w.last) {
            out.push_back(static_cast<std::size_t>(t - 1));
        }
    }
    return out;
}

namespace detail
{
/// Per-draw sums over the wave, for one group or (group = npos) all groups.
inline std::vector<double> wave_draws(const std::vector<std::vector<std::vector<double>>>& draws,
                                      const std::vector<std::size_t>& weeks, std::size_t group)
{
    std::vector<double> out;
    for (const auto& d : draws) {
        double s = 0.0;
        for (std::size_t a = 0; a < d.size(); ++a) {
            if (group != std::string::npos && a != group) {
                continue;
            }
            for (auto t : weeks) {
                s += d[a][t];
            }
        }
        out.push_back(s);
    }
    return out;
}
} // namespace detail

/// Cumulative incidence per 100k per wave: population-wide rows ("all") use the total population,
/// per-age rows that group's population.
inline std::vector<WaveRow> wave_summary(const ScenarioResult& r, const std::vector<Wave>& waves)
{
    std::vector<WaveRow> rows;
    const double total = r.total_population();
    for (const auto& w : waves) {
        const auto weeks = wave_weeks(r, w);
        for (const auto& [metric, draws] : {std::pair{"infections", &r.infection_draws}, std::pair{"severe", &r.severe_draws}}) {
            for (std::size_t g = 0; g <= r.labels.size(); ++g) {
                const bool all = g == r.labels.size();
                const std::size_t group = all ? std::string::npos : g;
                auto xs = detail::wave_draws(*draws, weeks, group);
                const double denom = all ? total : r.population[g];
                for (double& x : xs) {
                    x *= 1e5 / denom;
                }
                rows.push_back({r.name, w.name, all ? "all" : r.labels[g], metric, summarize(xs)});
            }
        }
    }
    return rows;
}

/// Paired per-draw reduction relative to `baseline` (positive = fewer cases), per 100k of the total population.
inline std::vector<WaveRow> wave_reduction(const ScenarioResult& baseline, const ScenarioResult& r,
                                           const std::vector<Wave>& waves)
{
    if (baseline.severe_draws.size() != r.severe_draws.size()) {
        throw ConfigError("scenarios were evaluated on different posterior draws");
    }
    std::vector<WaveRow> rows;
    const double total = r.total_population();
    for (const auto& w : waves) {
        const auto weeks = wave_weeks(r, w);
        for (const auto& [metric, a, b] :
             {std::tuple{"infections_averted", &baseline.infection_draws, &r.infection_draws},
              std::tuple{"severe_averted", &baseline.severe_draws, &r.severe_draws}}) {
            auto x = detail::wave_draws(*a, weeks, std::string::npos);
            const auto y = detail::wave_draws(*b, weeks, std::string::npos);
            for (std::size_t i = 0; i < x.size(); ++i) {
                x[i] = (x[i] - y[i]) * 1e5 / total;
            }
            rows.push_back({r.name, w.name, "all", metric, summarize(x)});
        }
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Output

inline void write_wave_csv(const std::vector<WaveRow>& rows, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out) {
        throw DataError("cannot write " + path.string());
    }
    out << "strategy,wave,age_label,metric,median,lo95,hi95\n";
    for (const auto& r : rows) {
        out << r.scenario << ',' << r.wave << ',' << r.age_label << ',' << r.metric << ','
            << format_double(r.per_100k.median) << ',' << format_double(r.per_100k.lo) << ','
            << format_double(r.per_100k.hi) << '\n';
    }
}

/// Weekly rows: strategy, week, age_label, metric, median, lo95, hi95.
inline void write_weekly_csv(const std::vector<ScenarioResult>& results, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out) {
        throw DataError("cannot write " + path.string());
    }
    out << "strategy,week,age_label,metric,median,lo95,hi95\n";
    for (const auto& r : results) {
        for (int t = 1; t <= r.weeks; ++t) {
            const auto week = format_date(r.start + std::chrono::days{kDaysPerWeek * (t - 1)});
            for (std::size_t a = 0; a < r.labels.size(); ++a) {
                for (const auto& [metric, cells] : {std::pair{"infections", &r.infections}, std::pair{"severe", &r.severe}}) {
                    const auto& i = (*cells)[a][static_cast<std::size_t>(t - 1)];
                    out << r.name << ',' << week << ',' << r.labels[a] << ',' << metric << ','
                        << format_double(i.median) << ',' << format_double(i.lo) << ',' << format_double(i.hi) << '\n';
                }
            }
        }
    }
}

inline nlohmann::json wave_rows_json(const std::vector<WaveRow>& rows)
{
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : rows) {
        j.push_back({{"strategy", r.scenario}, {"wave", r.wave}, {"age_label", r.age_label}, {"metric", r.metric},
                     {"median", r.per_100k.median}, {"lo95", r.per_100k.lo}, {"hi95", r.per_100k.hi}});
    }
    return j;
}

} // namespace counterfact

#endif // COUNTERFACT_COUNTERFACTUAL_HPP
