// counterfact: ingest -> fit -> evaluate -> report.
//
// Exit codes: 0 ok, 2 configuration, 3 data, 4 numerical failure.

#include "counterfact/counterfactual.hpp"
#include "counterfact/dataset_io.hpp"
#include "counterfact/inference.hpp"
#include "counterfact/svg.hpp"
#include "counterfact/synthetic.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

namespace fs = std::filesystem;
using namespace counterfact;
using nlohmann::json;

namespace
{

enum Exit { kOk = 0, kConfig = 2, kData = 3, kNumerical = 4 };

void write_json(const json& j, const fs::path& path)
{
    std::ofstream out(path);
    if (!out) {
        throw DataError("cannot write " + path.string());
    }
    out << j.dump(2) << '\n';
}

json read_json(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    try {
        return json::parse(in);
    }
    catch (const json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

void ensure_dir(const fs::path& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw ConfigError("cannot create output directory " + dir.string() + ": " + ec.message());
    }
}

// ---------------------------------------------------------------------------
// ingest

struct IngestArgs {
    std::string data, out;
};

int cmd_ingest(const IngestArgs& args)
{
    const auto d = load_dataset(args.data);
    std::cout << "loaded " << d.groups.size() << " age groups x " << d.weeks << " weeks from "
              << format_date(d.start) << '\n';
    if (args.out.empty()) {
        return kOk;
    }
    ensure_dir(args.out);
    save_dataset(d, args.out);

    std::ofstream st(fs::path(args.out) / "vaccination_status.csv");
    st << "week,age_label,unvaccinated,one_dose,two_doses,three_doses\n";
    for (int t = 1; t <= d.weeks; ++t) {
        for (std::size_t a = 0; a < d.groups.size(); ++a) {
            const auto& f = d.status_fractions[a][static_cast<std::size_t>(t - 1)];
            st << format_date(d.week_start(t)) << ',' << d.groups[a].label;
            for (double x : f) {
                st << ',' << format_double(x);
            }
            st << '\n';
        }
    }

    json j;
    j["start"] = format_date(d.start);
    j["weeks"] = d.weeks;
    j["population"] = d.total_population();
    for (std::size_t a = 0; a < d.groups.size(); ++a) {
        double cases = 0.0;
        for (double c : d.cases[a]) {
            cases += c;
        }
        j["groups"].push_back({{"age_label", d.groups[a].label},
                               {"population", d.groups[a].population},
                               {"cases", cases},
                               {"uptake", {d.factual.uptake(a, 1), d.factual.uptake(a, 2), d.factual.uptake(a, 3)}}});
    }
    write_json(j, fs::path(args.out) / "dataset.json");
    std::cout << "wrote normalised dataset to " << args.out << '\n';
    return kOk;
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
    std::string preset = "desk";
    std::uint64_t seed = 1;
    std::string out;
    bool noise = false;
};

int cmd_synth(const SynthArgs& args)
{
    SyntheticSpec spec;
    if (args.preset == "desk") {
        spec = desk_spec();
    }
    else if (args.preset == "israel-like") {
        spec = israel_like_spec();
    }
    else {
        throw ConfigError("unknown preset '" + args.preset + "' (desk, israel-like)");
    }
    spec.case_noise = args.noise;
    spec.severe_noise = args.noise;
    const auto b = generate_synthetic(spec, args.seed);
    ensure_dir(args.out);
    save_dataset(b.data, args.out);
    save_truth(b, args.out);
    write_simulation_csv(b.state, b.data.labels(), b.data.start, fs::path(args.out) / "simulation.csv");
    std::cout << "wrote " << spec.name << " (" << b.data.groups.size() << " groups x " << b.data.weeks
              << " weeks) to " << args.out << '\n';
    return kOk;
}

// ---------------------------------------------------------------------------
// fit

struct FitArgs {
    std::string data, out;
    double mixing = 0.8;
    std::uint64_t seed = 1;
    int chains = 8, init = 150, keep = 2, tune = 500, draws = 500, sweeps = 10;
    int change_points = 10;
    unsigned threads = 0;
    std::string truth;
};

int cmd_fit(const FitArgs& args)
{
    const auto d = load_dataset(args.data);
    auto cfg = default_inference_config(d);
    cfg.dynamics.mixing = args.mixing;
    cfg.prior.change_points = args.change_points;
    cfg.sampler.seed = args.seed;
    cfg.sampler.chains = args.chains;
    cfg.sampler.init_steps = args.init;
    cfg.sampler.keep_chains = args.keep;
    cfg.sampler.tune = args.tune;
    cfg.sampler.draws = args.draws;
    cfg.sampler.sweeps_per_step = args.sweeps;
    cfg.sampler.threads = args.threads;
    const auto waning = default_waning();
    DynamicsModel model(d, waning, cfg);
    std::cout << "fitting " << model.layout().size() << " parameters, " << args.chains << " chains\n";

    PosteriorResult r;
    try {
        r = sample_posterior(model);
    }
    catch (const NumericalError& e) {
        std::cerr << "sampling failed: " << e.what() << '\n';
        throw;
    }
    ensure_dir(args.out);
    const fs::path out(args.out);
    save_samples(r.samples, out / "posterior.jsonl");

    auto summary = posterior_summary(r, d.labels(), d.weeks);
    summary["data"] = fs::absolute(args.data).string();
    summary["start"] = format_date(d.start);
    summary["weeks"] = d.weeks;
    for (const auto& c : r.chains) {
        std::cout << "chain " << c.chain << (c.kept ? " kept   " : " dropped") << " log posterior "
                  << format_double(c.final_log_posterior) << " acceptance " << format_double(c.acceptance) << '\n';
    }

    const auto bands = posterior_predictive(model, r.samples, args.seed);
    {
        std::ofstream p(out / "predictive.csv");
        p << "week,age_label,observed,model_median,model_lo95,model_hi95,predictive_median,predictive_lo95,"
             "predictive_hi95\n";
        for (int t = 1; t <= d.weeks; ++t) {
            const auto ti = static_cast<std::size_t>(t - 1);
            for (std::size_t a = 0; a < d.groups.size(); ++a) {
                const auto& m = bands.model[a][ti];
                const auto& q = bands.predictive[a][ti];
                p << format_date(d.week_start(t)) << ',' << d.groups[a].label << ',' << format_double(d.cases[a][ti])
                  << ',' << format_double(m.median) << ',' << format_double(m.lo) << ',' << format_double(m.hi) << ','
                  << format_double(q.median) << ',' << format_double(q.lo) << ',' << format_double(q.hi) << '\n';
            }
        }
    }
    const auto rb = base_reproduction_bands(r.samples, d.weeks);
    {
        std::ofstream p(out / "base_reproduction.csv");
        p << "week,age_label,median,lo95,hi95\n";
        for (int t = 1; t <= d.weeks; ++t) {
            for (std::size_t a = 0; a < d.groups.size(); ++a) {
                const auto& b = rb[a][static_cast<std::size_t>(t - 1)];
                p << format_date(d.week_start(t)) << ',' << d.groups[a].label << ',' << format_double(b.median) << ','
                  << format_double(b.lo) << ',' << format_double(b.hi) << '\n';
            }
        }
    }

    // Recovery against a synthetic ground truth, when one is available.
    fs::path truth_path = args.truth.empty() ? fs::path(args.data) / "truth.json" : fs::path(args.truth);
    if (fs::exists(truth_path)) {
        const auto truth = read_json(truth_path);
        const auto weekly = truth.at("weekly_base_reproduction").get<std::vector<std::vector<double>>>();
        int hit = 0, total = 0;
        for (std::size_t a = 0; a < weekly.size() && a < rb.size(); ++a) {
            for (std::size_t t = 0; t < weekly[a].size() && t < rb[a].size(); ++t) {
                hit += std::abs(rb[a][t].median / weekly[a][t] - 1.0) <= 0.1;
                ++total;
            }
        }
        const double share = total ? double(hit) / total : 0.0;
        summary["recovery"] = {{"within_10_percent", hit}, {"cells", total}, {"share", share}};
        std::cout << "recovery: posterior median R_base within 10% of truth in " << hit << "/" << total << " cells\n";
    }
    write_json(summary, out / "summary.json");
    std::cout << "wrote " << r.samples.size() << " draws to " << (out / "posterior.jsonl").string() << " in "
              << format_double(std::round(r.seconds * 10) / 10) << " s\n";
    return kOk;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateArgs {
    std::string data, fit, out;
    std::vector<std::string> scenarios{"strategies"};
    double doses = 55746;
    std::optional<double> mixing;
    std::vector<std::string> waves;
    std::size_t max_draws = kPropagatedDraws;
    unsigned threads = 0;
};

const std::vector<std::string> kFamilies = {"strategies", "uptake", "profiles", "waning"};

struct FamilyOutput {
    std::vector<ScenarioResult> results;
    std::vector<WaveRow> rows;
    json extra = json::object();
};

svg::BarChart wave_chart(const std::vector<WaveRow>& rows, const std::vector<Wave>& waves, const std::string& metric,
                         const std::string& title, const std::string& ylabel)
{
    svg::BarChart c;
    c.title = title;
    c.ylabel = ylabel;
    std::vector<std::string> scenarios;
    for (const auto& r : rows) {
        if (r.metric == metric && r.age_label == "all" &&
            std::find(scenarios.begin(), scenarios.end(), r.scenario) == scenarios.end()) {
            scenarios.push_back(r.scenario);
        }
    }
    c.series = scenarios;
    for (const auto& w : waves) {
        c.groups.push_back(w.name);
        std::vector<Interval> vals;
        for (const auto& s : scenarios) {
            Interval v;
            for (const auto& r : rows) {
                if (r.metric == metric && r.age_label == "all" && r.scenario == s && r.wave == w.name) {
                    v = r.per_100k;
                }
            }
            vals.push_back(v);
        }
        c.values.push_back(vals);
    }
    return c;
}

void emit_family(const std::string& family, const FamilyOutput& fo, const std::vector<Wave>& waves,
                 const fs::path& out)
{
    write_weekly_csv(fo.results, out / (family + "_weekly.csv"));
    write_wave_csv(fo.rows, out / (family + "_waves.csv"));
    json j;
    j["family"] = family;
    j["rows"] = wave_rows_json(fo.rows);
    j["extra"] = fo.extra;
    for (const auto& r : fo.results) {
        j["flagged_cells"][r.name] = r.flagged_cells;
    }
    write_json(j, out / (family + ".json"));

    if (family == "uptake") {
        svg::save(svg::render(wave_chart(fo.rows, waves, "severe_averted", "Severe cases averted by extra doses",
                                         "per 100k")),
                  out / "uptake.svg");
        svg::save(svg::render(wave_chart(fo.rows, waves, "infections_averted", "Infections averted by extra doses",
                                         "per 100k")),
                  out / "uptake_infections.svg");
    }
    else {
        svg::save(svg::render(wave_chart(fo.rows, waves, "severe", "Cumulative severe cases (" + family + ")",
                                         "per 100k")),
                  out / (family + ".svg"));
        svg::save(svg::render(wave_chart(fo.rows, waves, "infections", "Cumulative infections (" + family + ")",
                                         "per 100k")),
                  out / (family + "_infections.svg"));
    }
    // Weekly severe cases across all ages.
    svg::LineChart lc;
    lc.title = "Weekly severe cases (" + family + ")";
    lc.ylabel = "severe cases";
    for (const auto& r : fo.results) {
        lc.series.push_back(r.name);
        std::vector<Interval> vals;
        for (int t = 0; t < r.weeks; ++t) {
            std::vector<double> xs;
            for (const auto& d : r.severe_draws) {
                double s = 0.0;
                for (const auto& row : d) {
                    s += row[static_cast<std::size_t>(t)];
                }
                xs.push_back(s);
            }
            vals.push_back(summarize(xs));
        }
        lc.values.push_back(vals);
        lc.first_label = format_date(r.start);
        lc.last_label = format_date(r.start + std::chrono::days{kDaysPerWeek * (r.weeks - 1)});
    }
    svg::save(svg::render(lc), out / (family + "_weekly.svg"));
}

FamilyOutput run_family(const std::string& family, const EvaluationContext& ctx, const EvaluateArgs& args,
                        const std::vector<Wave>& waves)
{
    const auto& d = *ctx.data;
    FamilyOutput fo;
    auto add = [&](ScenarioResult r) {
        auto rows = wave_summary(r, waves);
        fo.rows.insert(fo.rows.end(), rows.begin(), rows.end());
        fo.results.push_back(std::move(r));
    };
    if (family == "strategies") {
        for (const auto& s : strategy_scenarios(d)) {
            add(evaluate_scenario(ctx, s));
        }
    }
    else if (family == "waning") {
        for (const auto& s : waning_scenarios(d)) {
            add(evaluate_scenario(ctx, s));
        }
    }
    else if (family == "uptake") {
        std::vector<std::string> skipped;
        const auto specs = uptake_scenarios(d, args.doses, &skipped);
        for (const auto& m : skipped) {
            std::cerr << "warning: skipped " << m << '\n';
        }
        fo.extra["skipped"] = skipped;
        for (const auto& s : specs) {
            add(evaluate_scenario(ctx, s));
        }
        for (std::size_t i = 1; i < fo.results.size(); ++i) {
            auto rows = wave_reduction(fo.results.front(), fo.results[i], waves);
            fo.rows.insert(fo.rows.end(), rows.begin(), rows.end());
        }
        fo.extra["extra_doses"] = args.doses;
    }
    else if (family == "profiles") {
        const auto covid_uniform = evaluate_scenario(ctx, {"COVID / Uniform", uniform(d), std::nullopt, 1.0});
        for (auto p : {DiseaseProfile::Covid, DiseaseProfile::SpanishFlu, DiseaseProfile::FlatRisk}) {
            auto run = evaluate_profile(ctx, p, covid_uniform);
            fo.extra["profiles"][profile_name(p)] = {{"scale", run.scale}, {"risk", run.risk}};
            for (auto& r : run.results) {
                add(std::move(r));
            }
        }
        fo.extra["flat_uptake"] = kFlatUptake;
    }
    else {
        throw ConfigError("unknown scenario family '" + family + "'");
    }
    return fo;
}

int cmd_evaluate(const EvaluateArgs& args)
{
    std::vector<std::string> families;
    for (const auto& s : args.scenarios) {
        if (s == "all") {
            families = kFamilies;
            break;
        }
        if (std::find(kFamilies.begin(), kFamilies.end(), s) == kFamilies.end()) {
            throw ConfigError("unknown scenario '" + s + "' (strategies, uptake, profiles, waning, all)");
        }
        families.push_back(s);
    }
    if (args.doses < 0.0) {
        throw ConfigError("--doses must be non-negative");
    }
    std::vector<Wave> waves;
    for (const auto& w : args.waves) {
        waves.push_back(parse_wave(w));
    }

    const auto d = load_dataset(args.data);
    const fs::path fit(args.fit);
    const auto samples = load_samples(fit / "posterior.jsonl");
    json fit_summary = fs::exists(fit / "summary.json") ? read_json(fit / "summary.json") : json::object();
    DynamicsConfig dyn;
    const double fitted_mixing = fit_summary.value("mixing", dyn.mixing);
    dyn.mixing = args.mixing.value_or(fitted_mixing);
    if (dyn.mixing != fitted_mixing) {
        std::cerr << "warning: evaluating with mixing " << format_double(dyn.mixing)
                  << " on a posterior fitted with mixing " << format_double(fitted_mixing)
                  << "; refit with --mixing for a consistent sensitivity run\n";
    }
    if (waves.empty()) {
        waves = default_waves();
        waves.push_back({"window", d.start, d.week_start(d.weeks)});
    }

    const auto ctx = prepare_evaluation(d, default_waning(), dyn, samples, args.max_draws, args.threads);
    for (const auto& w : ctx.warnings) {
        std::cerr << "warning: " << w << '\n';
    }
    ensure_dir(args.out);
    const fs::path out(args.out);

    json manifest;
    manifest["data"] = fs::absolute(args.data).string();
    manifest["fit"] = fs::absolute(args.fit).string();
    manifest["mixing"] = dyn.mixing;
    manifest["draws"] = ctx.draws.size();
    manifest["seed"] = fit_summary.contains("sampler") ? fit_summary["sampler"].value("seed", 0) : 0;
    manifest["warnings"] = ctx.warnings;
    for (const auto& w : waves) {
        manifest["waves"].push_back({{"name", w.name}, {"first", format_date(w.first)}, {"last", format_date(w.last)}});
    }
    for (const auto& family : families) {
        const auto fo = run_family(family, ctx, args, waves);
        emit_family(family, fo, waves, out);
        manifest["families"].push_back(family);
        std::cout << family << ": " << fo.results.size() << " scenarios\n";
        for (const auto& r : fo.rows) {
            if (r.age_label == "all") {
                std::cout << "  " << r.scenario << " | " << r.wave << " | " << r.metric << ": "
                          << format_double(std::round(r.per_100k.median * 10) / 10) << " ["
                          << format_double(std::round(r.per_100k.lo * 10) / 10) << ", "
                          << format_double(std::round(r.per_100k.hi * 10) / 10) << "] per 100k\n";
            }
        }
    }
    write_json(manifest, out / "evaluation.json");
    return kOk;
}

// ---------------------------------------------------------------------------
// report

struct ReportArgs {
    std::string dir;
    std::string out;
};

int cmd_report(const ReportArgs& args)
{
    const fs::path dir(args.dir);
    if (!fs::exists(dir / "evaluation.json")) {
        throw DataError("no evaluation results in " + dir.string() + "; run `counterfact evaluate --out " +
                        dir.string() + "` first");
    }
    const auto manifest = read_json(dir / "evaluation.json");
    std::ostringstream md;
    md << "# Counterfactual vaccine allocation report\n\n";
    md << "| setting | value |\n|---|---|\n";
    md << "| data | " << manifest.value("data", "") << " |\n";
    md << "| posterior | " << manifest.value("fit", "") << " |\n";
    md << "| sampler seed | " << manifest.value("seed", 0) << " |\n";
    md << "| contact mixing | " << format_double(manifest.value("mixing", 0.0)) << " |\n";
    md << "| posterior draws propagated | " << manifest.value("draws", 0) << " |\n\n";
    if (manifest.contains("waves")) {
        md << "Waves:";
        for (const auto& w : manifest["waves"]) {
            md << ' ' << w.value("name", "") << " (" << w.value("first", "") << " to " << w.value("last", "") << ")";
        }
        md << "\n\n";
    }
    for (const auto& wmsg : manifest.value("warnings", std::vector<std::string>{})) {
        md << "> warning: " << wmsg << "\n\n";
    }
    if (!manifest.contains("families") || manifest["families"].empty()) {
        throw DataError("evaluation.json lists no scenario families; run `counterfact evaluate` first");
    }
    for (const auto& f : manifest["families"]) {
        const std::string family = f.get<std::string>();
        const auto table = csv::read(dir / (family + "_waves.csv"));
        md << "## " << family << "\n\n";
        md << "| scenario | wave | metric | median | 95% interval |\n|---|---|---|---:|---|\n";
        const auto cs = table.column("strategy"), cw = table.column("wave"), ca = table.column("age_label"),
                   cm = table.column("metric"), c50 = table.column("median"), clo = table.column("lo95"),
                   chi = table.column("hi95");
        auto round1 = [](const std::string& s) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.1f", parse_double(s));
            return std::string(buf);
        };
        for (const auto& r : table.rows) {
            if (r.fields[ca] != "all") {
                continue;
            }
            md << "| " << r.fields[cs] << " | " << r.fields[cw] << " | " << r.fields[cm] << " | " << round1(r.fields[c50])
               << " | " << round1(r.fields[clo]) << " to " << round1(r.fields[chi]) << " |\n";
        }
        md << "\nValues are cumulative per 100k. Per-age rows: `" << family << "_waves.csv`; weekly values: `"
           << family << "_weekly.csv`.\n\n";
        for (const auto& suffix : {"", "_infections", "_weekly"}) {
            const auto svg_name = family + suffix + ".svg";
            if (fs::exists(dir / svg_name)) {
                md << "![" << family << suffix << "](" << svg_name << ")\n\n";
            }
        }
    }
    const fs::path out = args.out.empty() ? dir / "report.md" : fs::path(args.out);
    std::ofstream o(out);
    if (!o) {
        throw DataError("cannot write " + out.string());
    }
    o << md.str();
    std::cout << "wrote " << out.string() << '\n';
    return kOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Counterfactual evaluation of age-dependent vaccine allocation strategies.\n"
                 "COUNTERFACT_THREADS caps the number of worker threads."};
    app.require_subcommand(1);

    IngestArgs ingest;
    auto* ci = app.add_subcommand("ingest", "Validate a dataset directory and derive vaccination tables");
    ci->add_option("--data", ingest.data, "Directory with population/cases/severe/vaccinations CSV")->required();
    ci->add_option("--out", ingest.out, "Write the normalised dataset and derived tables here");

    SynthArgs synth;
    auto* cs = app.add_subcommand("synth", "Generate a synthetic dataset with known ground truth");
    cs->add_option("--preset", synth.preset, "desk | israel-like")->capture_default_str();
    cs->add_option("--seed", synth.seed, "Random seed")->capture_default_str();
    cs->add_option("--out", synth.out, "Output directory")->required();
    cs->add_flag("--noise", synth.noise, "Add observation noise to cases and severe counts");

    FitArgs fit;
    auto* cf = app.add_subcommand("fit", "Sample the posterior of the renewal model");
    cf->add_option("--data", fit.data, "Dataset directory")->required();
    cf->add_option("--out", fit.out, "Output directory")->required();
    cf->add_option("--mixing", fit.mixing, "Contact mixing factor gamma")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    cf->add_option("--seed", fit.seed, "Sampler seed")->capture_default_str();
    cf->add_option("--chains", fit.chains, "Chains initialised")->check(CLI::PositiveNumber)->capture_default_str();
    cf->add_option("--keep", fit.keep, "Chains kept after initialisation")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cf->add_option("--init", fit.init, "Initialisation steps")->check(CLI::NonNegativeNumber)->capture_default_str();
    cf->add_option("--tune", fit.tune, "Tuning steps")->check(CLI::NonNegativeNumber)->capture_default_str();
    cf->add_option("--draws", fit.draws, "Draws per kept chain")->check(CLI::PositiveNumber)->capture_default_str();
    cf->add_option("--sweeps", fit.sweeps, "Componentwise sweeps per step")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cf->add_option("--change-points", fit.change_points, "Change points per age group")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    cf->add_option("--threads", fit.threads, "Worker threads (0 = all cores)");
    cf->add_option("--truth", fit.truth, "Ground truth JSON for recovery metrics (default: DATA/truth.json)");

    EvaluateArgs ev;
    auto* ce = app.add_subcommand("evaluate", "Propagate posterior draws through counterfactual scenarios");
    ce->add_option("--data", ev.data, "Dataset directory")->required();
    ce->add_option("--fit", ev.fit, "Directory written by `fit`")->required();
    ce->add_option("--out", ev.out, "Output directory")->required();
    ce->add_option("--scenario", ev.scenarios, "strategies | uptake | profiles | waning | all (repeatable)")
        ->capture_default_str();
    ce->add_option("--doses", ev.doses, "Extra person-doses per age group for the uptake scenario")
        ->capture_default_str();
    ce->add_option("--mixing", ev.mixing, "Contact mixing factor (default: the fit's)")->check(CLI::Range(0.0, 1.0));
    ce->add_option("--wave", ev.waves, "Wave window name:YYYY-MM-DD:YYYY-MM-DD (repeatable)");
    ce->add_option("--max-draws", ev.max_draws, "Posterior draws propagated")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    ce->add_option("--threads", ev.threads, "Worker threads (0 = all cores)");

    ReportArgs rep;
    auto* cr = app.add_subcommand("report", "Collate evaluation tables and plots into a markdown report");
    cr->add_option("--dir", rep.dir, "Directory written by `evaluate`")->required();
    cr->add_option("--out", rep.out, "Report path (default: DIR/report.md)");

    try {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }

    try {
        if (*ci) {
            return cmd_ingest(ingest);
        }
        if (*cs) {
            return cmd_synth(synth);
        }
        if (*cf) {
            return cmd_fit(fit);
        }
        if (*ce) {
            return cmd_evaluate(ev);
        }
        return cmd_report(rep);
    }
    catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kConfig;
    }
    catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    }
    catch (const InfeasibleError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    }
    catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return kNumerical;
    }
}
