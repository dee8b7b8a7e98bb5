// Acceptance suite. Each TEST is one criterion and prints one verdict line:
//   [acceptance] criterion N PASS|FAIL|BLOCKED: description (seconds)

#include "counterfact/counterfactual.hpp"
#include "counterfact/dataset_io.hpp"
#include "counterfact/synthetic.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <random>

using namespace counterfact;

namespace
{

class Verdict
{
public:
    Verdict(int id, std::string what, double limit_seconds = 0.0)
        : id_(id)
        , what_(std::move(what))
        , limit_(limit_seconds)
        , start_(std::chrono::steady_clock::now())
    {
    }

    void note(std::string s) { note_ = std::move(s); }

    double seconds() const
    {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

    ~Verdict()
    {
        const double secs = seconds();
        if (limit_ > 0.0 && secs > limit_ && !::testing::Test::IsSkipped()) {
            ADD_FAILURE() << "took " << secs << " s, limit " << limit_ << " s";
        }
        const char* status = ::testing::Test::IsSkipped() ? "BLOCKED" : ::testing::Test::HasFailure() ? "FAIL" : "PASS";
        std::printf("[acceptance] criterion %d %s: %s (%.1f s)%s%s\n", id_, status, what_.c_str(), secs,
                    note_.empty() ? "" : "; ", note_.c_str());
        std::fflush(stdout);
    }

private:
    int id_;
    std::string what_;
    double limit_;
    std::chrono::steady_clock::time_point start_;
    std::string note_;
};

double rel(double got, double want)
{
    return want == 0.0 ? std::abs(got) : std::abs(got - want) / std::abs(want);
}

// Shorter sampler run on the desk preset for the scenario criteria.
struct DeskPosterior {
    SyntheticBundle bundle;
    PosteriorResult fit;
    EvaluationContext ctx;
};

const DeskPosterior& desk_posterior()
{
    static std::unique_ptr<DeskPosterior> p;
    if (!p) {
        p = std::make_unique<DeskPosterior>();
        const auto spec = desk_spec();
        p->bundle = generate_synthetic(spec, 1);
        auto cfg = default_inference_config(p->bundle.data);
        cfg.sampler.chains = 4;
        cfg.sampler.init_steps = 50;
        cfg.sampler.tune = 150;
        cfg.sampler.draws = 100;
        cfg.sampler.seed = 11;
        p->fit = sample_posterior(DynamicsModel(p->bundle.data, spec.waning, cfg));
        p->ctx = prepare_evaluation(p->bundle.data, spec.waning, cfg.dynamics, p->fit.samples);
    }
    return *p;
}

double cumulative(const ScenarioResult& r, bool severe, std::size_t draw)
{
    return grand_total(severe ? r.severe_draws[draw] : r.infection_draws[draw]);
}

// Every generated strategy of the evaluation families, checked against the factual budget and caps.
void check_strategy_constraints(const ObservedDataset& d, std::size_t& checked)
{
    const auto pop = d.populations();
    const int m = d.weeks;
    const auto want = oracle::weekly_totals(d.factual, pop);

    auto support_ok = [&](const AllocationStrategy& s) {
        for (std::size_t a = 0; a < s.groups(); ++a) {
            double mass = 0.0, bad = 0.0;
            for (const auto& [t, p] : s.joint(a)) {
                mass += p;
                const bool ordered = t.t1 <= t.t2 && t.t2 <= t.t3 && t.t1 >= 1 && t.t3 <= m + 1;
                const bool distinct = (t.t2 > m || t.t2 > t.t1) && (t.t3 > m || t.t3 > t.t2);
                const bool gap = t.t3 > m || t.t3 - t.t2 >= 12;
                if (p < 0.0 || !ordered || !distinct || !gap) {
                    bad += std::abs(p);
                }
            }
            EXPECT_NEAR(mass, 1.0, 1e-12) << s.label() << " group " << a;
            EXPECT_EQ(bad, 0.0) << s.label() << " group " << a << ": support mass breaking dose order or gap";
        }
    };
    auto budget_ok = [&](const AllocationStrategy& s) {
        const auto got = oracle::weekly_totals(s, pop);
        for (std::size_t dose = 0; dose < kDoses; ++dose) {
            for (std::size_t t = 0; t < static_cast<std::size_t>(m); ++t) {
                EXPECT_NEAR(got[dose][t], want[dose][t], 1e-9)
                    << s.label() << " dose " << dose + 1 << " week " << t + 1;
            }
        }
    };
    auto caps_ok = [&](const AllocationStrategy& s, std::optional<double> flat) {
        for (std::size_t a = 0; a < s.groups(); ++a) {
            for (int dose = 1; dose <= kDoses; ++dose) {
                double cap = flat ? *flat : oracle::uptake(d.factual, a, dose) + (dose == 3 ? 0.025 : 0.0);
                EXPECT_LE(oracle::uptake(s, a, dose), std::min(cap, 1.0) + 1e-12)
                    << s.label() << " group " << d.groups[a].label << " dose " << dose;
            }
        }
    };

    const auto f = estimate_severity(d, default_waning());
    std::vector<double> g0 = f.g[0];
    for (std::size_t a = 0; a < g0.size(); ++a) {
        if (!std::isfinite(g0[a])) {
            g0[a] = 0.0;
        }
    }
    std::vector<std::pair<AllocationStrategy, std::optional<double>>> ranked;
    for (const auto& n : strategy_names()) {
        ranked.push_back({named_strategy(d, n), std::nullopt});
    }
    ranked.push_back({generate_ranked(d.factual, ranking_from_scores(g0, true), pop, "RiskRanked"), std::nullopt});
    ranked.push_back(
        {generate_ranked(d.factual, ranking_from_scores(g0, false), pop, "RiskRankedReversed"), std::nullopt});
    RankedOptions flat;
    flat.flat_uptake = kFlatUptake;
    for (auto p : {DiseaseProfile::FlatRisk, DiseaseProfile::SpanishFlu}) {
        const auto shape = profile_shape(p, d.labels());
        for (bool desc : {true, false}) {
            ranked.push_back({generate_ranked(d.factual, ranking_from_scores(shape, desc), pop,
                                              profile_name(p) + (desc ? " RiskRanked" : " RiskRankedReversed"), flat),
                              kFlatUptake});
        }
    }
    for (const auto& [s, cap] : ranked) {
        support_ok(s);
        budget_ok(s);
        if (s.label() == "Uniform") {
            // same vaccination-time distribution in every group instead of per-group caps
            for (std::size_t a = 1; a < s.groups(); ++a) {
                for (const auto& [t, mass] : s.joint(0)) {
                    const auto it = s.joint(a).find(t);
                    EXPECT_NEAR(it == s.joint(a).end() ? 0.0 : it->second, mass, 1e-12) << "Uniform group " << a;
                }
                EXPECT_EQ(s.joint(a).size(), s.joint(0).size()) << "Uniform group " << a;
            }
        }
        else {
            caps_ok(s, cap);
        }
        ++checked;
    }

    // Extra uptake: other groups untouched, the boosted group gains exactly the extra doses.
    const double extra = 0.006 * d.total_population();
    std::vector<std::string> skipped;
    const auto boosts = uptake_scenarios(d, extra, &skipped);
    for (std::size_t i = 1; i < boosts.size(); ++i) {
        const auto& s = boosts[i].strategy;
        support_ok(s);
        double added = 0.0;
        for (std::size_t a = 0; a < s.groups(); ++a) {
            for (int dose = 1; dose <= kDoses; ++dose) {
                const double diff = (oracle::uptake(s, a, dose) - oracle::uptake(d.factual, a, dose)) * pop[a];
                if (boosts[i].name == "Boost " + d.groups[a].label) {
                    added += diff;
                }
                else {
                    EXPECT_NEAR(diff, 0.0, 1e-9) << s.label() << " touched " << d.groups[a].label;
                }
            }
        }
        EXPECT_NEAR(added, extra, 1e-9 * extra) << s.label();
        ++checked;
    }
}

} // namespace

TEST(Acceptance, C01_TargetFunctionOracle)
{
    Verdict v(1, "target function equals brute-force enumeration on 200 random instances", 30.0);
    std::mt19937_64 rng(1);
    double worst = 0.0;
    for (int i = 0; i < 200; ++i) {
        const int m = 1 + i % 4;
        const std::size_t groups = 1 + (i / 4) % 3;
        const auto x = oracle::random_instance(rng, m, groups);
        const double r = rel(grand_total(target_function(x.strategy, x.severity, x.population)), x.expected());
        worst = std::max(worst, r);
        EXPECT_LT(r, 1e-12) << "instance " << i;
    }
    v.note("max relative error " + format_double(worst));
}

TEST(Acceptance, C02_ContactSpectrum)
{
    Verdict v(2, "contact matrix has leading eigenvalue 1 with eigenvector along the population shares", 1.0);
    const std::vector<double> pop(kIsraelPopulation.begin(), kIsraelPopulation.end());
    for (int k = 0; k <= 10; ++k) {
        const double gamma = k / 10.0;
        const ContactMatrix c(gamma, pop);
        const Eigen::VectorXd rho = c.shares();
        // full spectrum, independent of leading_eigenpair
        Eigen::EigenSolver<Eigen::MatrixXd> es(c.matrix());
        double lmax = 0.0;
        for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
            lmax = std::max(lmax, std::abs(es.eigenvalues()[i]));
        }
        EXPECT_NEAR(lmax, 1.0, 1e-10) << "gamma " << gamma;
        EXPECT_LT((c.matrix() * rho - rho).cwiseAbs().maxCoeff(), 1e-10) << "gamma " << gamma;
        const auto [lambda, vec] = c.leading_eigenpair();
        EXPECT_NEAR(lambda, 1.0, 1e-10);
        if (k > 0) {
            // gamma = 0 is the identity and every vector is an eigenvector
            EXPECT_LT((vec - rho / rho.norm()).cwiseAbs().maxCoeff(), 1e-10) << "gamma " << gamma;
        }
    }
}

TEST(Acceptance, C03_FactorizationAnchors)
{
    Verdict v(3, "g(0, 60-69) = 1, h(v, 0) = 1, f1 = 1 under the factual strategy");
    for (const auto& spec : {desk_spec(), israel_like_spec()}) {
        const auto b = generate_synthetic(spec, 1);
        const auto f = estimate_severity(b.data, spec.waning);
        EXPECT_EQ(f.g[0][index_of_label(f.labels, kReferenceAge)], 1.0) << spec.name;
    }
    for (double scale : {1.0, kFastWaningScale}) {
        const auto w = default_waning(scale);
        for (int dose = 1; dose <= kDoses; ++dose) {
            EXPECT_EQ(w.relative_risk(dose, 0.0), 1.0);
        }
    }

    const auto& p = desk_posterior();
    const auto& ctx = p.ctx;
    const auto infect = infectability_table(factual(p.bundle.data), ctx.waning, kInfectionProtection);
    double worst = 0.0;
    for (std::size_t i = 0; i < ctx.draws.size(); ++i) {
        EpidemicState base;
        base.infection_probability = ctx.factual_probability[i];
        const auto again = simulate_with_base(ctx.r_base[i], ctx.draws[i].params, ctx.dynamics, ctx.contacts, infect,
                                              ctx.seeding, ctx.population, ctx.weeks());
        for (const auto& row : correction_factor(base, again).values) {
            for (double x : row) {
                worst = std::max(worst, std::abs(x - 1.0));
            }
        }
    }
    EXPECT_LT(worst, 1e-12);
    const auto r = evaluate_scenario(ctx, {"Factual", factual(p.bundle.data), std::nullopt, 1.0});
    const double baseline = grand_total(target_function(p.bundle.data.factual, ctx.severity, ctx.population));
    for (std::size_t i = 0; i < r.severe_draws.size(); ++i) {
        EXPECT_LT(rel(cumulative(r, true, i), baseline), 1e-12);
    }
    v.note(std::to_string(ctx.draws.size()) + " posterior draws, max |f1 - 1| " + format_double(worst));
}

TEST(Acceptance, C04_EstimatorRoundTrip)
{
    Verdict v(4, "severity estimator recovers f0 and g from noise-free synthetic data", 10.0);
    double worst = 0.0;
    for (const auto& spec : {desk_spec(), israel_like_spec()}) {
        const auto b = generate_synthetic(spec, 1);
        const auto dir = std::filesystem::temp_directory_path() / ("counterfact_acceptance_" + spec.name);
        std::filesystem::remove_all(dir);
        save_dataset(b.data, dir);
        const auto d = load_dataset(dir);
        const auto f = estimate_severity(d, spec.waning);
        for (std::size_t t = 0; t < b.truth.f0.size(); ++t) {
            worst = std::max(worst, rel(f.f0[t], b.truth.f0[t]));
        }
        std::size_t identified = 0;
        for (int s = 0; s < kStatuses; ++s) {
            for (std::size_t a = 0; a < f.groups(); ++a) {
                if (f.identified(s, a)) {
                    worst = std::max(worst, rel(f.g[static_cast<std::size_t>(s)][a],
                                                spec.g[static_cast<std::size_t>(s)][a]));
                    ++identified;
                }
            }
        }
        EXPECT_GT(identified, 3 * f.groups()) << spec.name;
    }
    EXPECT_LT(worst, 1e-6);
    v.note("max relative error " + format_double(worst));
}

TEST(Acceptance, C05_SimulatorConservation)
{
    Verdict v(5, "exposures + susceptibles = population + influx on 50 random draws", 10.0);
    const auto spec = israel_like_spec();
    const auto b = generate_synthetic(spec, 1);
    const auto pop = spec.populations();
    const std::size_t n = pop.size();
    const int weeks = spec.weeks;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    for (int draw = 0; draw < 50; ++draw) {
        DynamicsParams p;
        p.r0.resize(n);
        p.change_points.resize(n);
        p.influx.assign(n, std::vector<double>(static_cast<std::size_t>(weeks)));
        for (std::size_t a = 0; a < n; ++a) {
            p.r0[a] = 0.4 + 2.0 * u(rng);
            for (int k = 0; k < 10; ++k) {
                p.change_points[a].push_back({u(rng) - 0.5, 2.0 + 6.0 * u(rng), 21.0 * k + 7.0 * (u(rng) - 0.5)});
            }
            for (double& h : p.influx[a]) {
                h = 50.0 * u(rng) * u(rng);
            }
        }
        DynamicsConfig cfg = spec.config;
        cfg.mixing = u(rng);
        const auto w = default_waning(0.5 + u(rng));
        const auto seed = Seeding::from_first_week(spec.initial_weekly_cases, cfg.kernel.size());
        const auto st = simulate(p, cfg, ContactMatrix(cfg.mixing, pop), infectability_table(b.data.factual, w),
                                 seed, pop, weeks);
        for (std::size_t a = 0; a < n; ++a) {
            long double exposed = 0.0L, influx = 0.0L;
            for (double e : st.exposures[a]) {
                exposed += e;
            }
            for (double h : st.influx[a]) {
                influx += h;
            }
            const double lhs = static_cast<double>(exposed) + st.susceptibles[a].back();
            const double rhs = pop[a] + static_cast<double>(influx);
            worst = std::max(worst, rel(lhs, rhs));
        }
    }
    EXPECT_LT(worst, 1e-9);
    v.note("max relative error " + format_double(worst));
}

TEST(Acceptance, C06_DeskPosteriorRecovery)
{
    Verdict v(6, "desk posterior median R_base within 10% of truth on at least 80% of cells", 600.0);
    const auto spec = desk_spec();
    const auto b = generate_synthetic(spec, 1);
    const auto cfg = default_inference_config(b.data); // 8 -> 2 chains, 150/500/500
    ASSERT_EQ(cfg.sampler.chains, 8);
    ASSERT_EQ(cfg.sampler.keep_chains, 2);
    const auto fit = sample_posterior(DynamicsModel(b.data, spec.waning, cfg));
    ASSERT_EQ(fit.samples.size(), 1000u);
    const auto bands = base_reproduction_bands(fit.samples, spec.weeks);
    const auto truth = weekly_base_reproduction(spec.dynamics, spec.weeks);
    int ok = 0, cells = 0;
    for (std::size_t a = 0; a < truth.size(); ++a) {
        for (std::size_t t = 0; t < truth[a].size(); ++t) {
            ok += rel(bands[a][t].median, truth[a][t]) < 0.1;
            ++cells;
        }
    }
    EXPECT_EQ(cells, 60);
    EXPECT_GE(ok, 0.8 * cells);
    v.note(std::to_string(ok) + "/" + std::to_string(cells) + " cells within 10%");
}

TEST(Acceptance, C07_StrategyConstraints)
{
    Verdict v(7, "generated strategies keep weekly budgets, uptake caps and the booster gap", 30.0);
    std::size_t checked = 0;
    const auto b = generate_synthetic(israel_like_spec(), 1);
    check_strategy_constraints(b.data, checked);
    std::string on = "israel-like";
    if (const char* dir = std::getenv("COUNTERFACT_ISRAEL_DATA")) {
        check_strategy_constraints(load_dataset(dir), checked);
        on += " and " + std::string(dir);
    }
    v.note(std::to_string(checked) + " strategies on " + on);
}

TEST(Acceptance, C08_PublishedNumbers)
{
    Verdict v(8, "ElderlyFirst vs Factual severe incidence and strategy orderings on the full data");
    const char* dir = std::getenv("COUNTERFACT_ISRAEL_DATA");
    if (!dir) {
        v.note("COUNTERFACT_ISRAEL_DATA not set; the national dataset is not distributed");
        GTEST_SKIP() << "needs the national dataset in COUNTERFACT_ISRAEL_DATA";
    }
    const auto d = load_dataset(dir);
    const auto waning = default_waning();
    const auto waves = default_waves();

    // median per-100k totals over all ages, keyed by strategy, wave and metric
    auto run = [&](double mixing) {
        auto cfg = default_inference_config(d);
        cfg.dynamics.mixing = mixing;
        const auto fit = sample_posterior(DynamicsModel(d, waning, cfg));
        const auto ctx = prepare_evaluation(d, waning, cfg.dynamics, fit.samples);
        std::map<std::string, double> out;
        for (const auto& spec : strategy_scenarios(d)) {
            for (const auto& row : wave_summary(evaluate_scenario(ctx, spec), waves)) {
                if (row.age_label == "all") {
                    out[spec.name + "/" + row.wave + "/" + row.metric] = row.per_100k.median;
                }
            }
        }
        return out;
    };
    const auto m = run(DynamicsConfig{}.mixing);
    auto at = [&](const std::map<std::string, double>& r, const std::string& s, const std::string& w,
                  const std::string& metric) { return r.at(s + "/" + w + "/" + metric); };

    bool close = true;
    const std::array<std::tuple<std::string, std::string, double>, 4> published = {
        {{"ElderlyFirst", "third", 177.0}, {"Factual", "third", 184.0}, {"ElderlyFirst", "fourth", 84.0},
         {"Factual", "fourth", 126.0}}};
    std::string detail;
    for (const auto& [s, w, want] : published) {
        const double got = at(m, s, w, "severe");
        detail += s + "/" + w + " " + format_double(got) + " vs " + format_double(want) + "; ";
        close = close && rel(got, want) <= 0.15;
    }
    for (const char* w : {"third", "fourth"}) {
        for (const auto& s : strategy_names()) {
            if (s != "ElderlyFirst") {
                EXPECT_LT(at(m, "ElderlyFirst", w, "severe"), at(m, s, w, "severe")) << w << " " << s;
            }
        }
    }
    double top4 = 0.0;
    for (const auto& s : strategy_names()) {
        if (s != "YoungFirst") {
            EXPECT_LT(at(m, "YoungFirst", "third", "infections"), at(m, s, "third", "infections")) << s;
        }
        top4 = std::max(top4, at(m, s, "fourth", "infections"));
    }
    // highest tier: within 5% of the largest wave-4 infection total
    EXPECT_GE(at(m, "YoungFirst", "fourth", "infections"), 0.95 * top4);
    if (!close) {
        for (double gamma : {0.7, 0.9}) {
            const auto alt = run(gamma);
            for (const auto& [s, w, want] : published) {
                std::printf("sensitivity gamma %.1f: %s/%s severe per 100k %s (published %s)\n", gamma, s.c_str(), w.c_str(),
                            format_double(at(alt, s, w, "severe")).c_str(), format_double(want).c_str());
            }
        }
    }
    EXPECT_TRUE(close) << detail;
    v.note(detail);
}

TEST(Acceptance, C09_WaningMonotonicity)
{
    Verdict v(9, "noWaning <= regular <= fast for infections and severe cases under every strategy (desk)", 120.0);
    const auto& p = desk_posterior();
    const auto specs = waning_scenarios(p.bundle.data);
    ASSERT_EQ(specs.size(), 3 * strategy_names().size());
    for (std::size_t i = 0; i < specs.size(); i += 3) {
        const auto none = evaluate_scenario(p.ctx, specs[i]);
        const auto regular = evaluate_scenario(p.ctx, specs[i + 1]);
        const auto fast = evaluate_scenario(p.ctx, specs[i + 2]);
        for (bool severe : {false, true}) {
            for (std::size_t d = 0; d < none.severe_draws.size(); ++d) {
                const double a = cumulative(none, severe, d), b = cumulative(regular, severe, d),
                             c = cumulative(fast, severe, d);
                EXPECT_LE(a, b * (1.0 + 1e-12)) << specs[i].name << " draw " << d;
                EXPECT_LE(b, c * (1.0 + 1e-12)) << specs[i + 1].name << " draw " << d;
            }
        }
    }
    v.note(std::to_string(p.ctx.draws.size()) + " posterior draws, sampler included in the time");
}

TEST(Acceptance, C10_ProfileNormalization)
{
    Verdict v(10, "profiles match COVID Uniform severe totals and FlatRisk RiskRanked equals Uniform");
    const auto& p = desk_posterior();
    const auto covid = evaluate_profile(p.ctx, DiseaseProfile::Covid, {});
    ASSERT_EQ(covid.results.size(), 3u);
    const double target = quantile(detail::draw_totals(covid.results[0].severe_draws), 0.5);
    double worst = 0.0;
    for (auto profile : {DiseaseProfile::FlatRisk, DiseaseProfile::SpanishFlu}) {
        const auto run = evaluate_profile(p.ctx, profile, covid.results[0]);
        const double got = quantile(detail::draw_totals(run.results[0].severe_draws), 0.5);
        worst = std::max(worst, rel(got, target));
        EXPECT_LT(rel(got, target), 1e-6) << profile_name(profile);
        if (profile == DiseaseProfile::FlatRisk) {
            EXPECT_EQ(run.results[1].severe_draws, run.results[0].severe_draws);
            EXPECT_EQ(run.results[1].infection_draws, run.results[0].infection_draws);
        }
    }
    v.note("max relative error " + format_double(worst));
}
