#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace
{

const fs::path kRoot = fs::temp_directory_path() / "counterfact_cli";

struct Run {
    int code = -1;
    std::string output;
};

Run run(const std::string& args, const std::string& env = "")
{
    const auto log = kRoot / "last.log";
    const std::string cmd = env + (env.empty() ? "" : " ") + COUNTERFACT_BIN + std::string(" ") + args + " > " +
                            log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(log);
    std::stringstream ss;
    ss << in.rdbuf();
    r.output = ss.str();
    return r;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const std::string kFitBudget = " --chains 2 --keep 1 --init 3 --tune 3 --draws 12 --sweeps 1 --change-points 10";

class Cli : public ::testing::Test
{
protected:
    static void SetUpTestSuite()
    {
        fs::remove_all(kRoot);
        fs::create_directories(kRoot);
    }
};

} // namespace

TEST_F(Cli, UsageErrorsAreConfigErrors)
{
    EXPECT_EQ(run("").code, 2);
    EXPECT_EQ(run("--help").code, 0);
    EXPECT_EQ(run("frobnicate").code, 2);
    EXPECT_EQ(run("synth").code, 2); // --out missing
    const auto bad = run("synth --preset atlantis --out " + (kRoot / "x").string());
    EXPECT_EQ(bad.code, 2);
    EXPECT_NE(bad.output.find("atlantis"), std::string::npos);
    EXPECT_EQ(run("fit --data d --out o --mixing 1.5").code, 2);
}

TEST_F(Cli, MissingDataIsDataError)
{
    const auto r = run("ingest --data " + (kRoot / "nowhere").string());
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.output.find("nowhere"), std::string::npos);
    EXPECT_EQ(run("report --dir " + (kRoot / "nowhere").string()).code, 3);
}

TEST_F(Cli, PipelineIsReproducible)
{
    const auto data = kRoot / "desk";
    ASSERT_EQ(run("synth --preset desk --seed 3 --out " + data.string()).code, 0);
    ASSERT_TRUE(fs::exists(data / "simulation.csv"));

    const auto ingested = kRoot / "ingested";
    ASSERT_EQ(run("ingest --data " + data.string() + " --out " + ingested.string()).code, 0);
    EXPECT_TRUE(fs::exists(ingested / "vaccination_status.csv"));
    EXPECT_EQ(slurp(ingested / "cases.csv"), slurp(data / "cases.csv"));

    const auto fit_a = kRoot / "fit_a", fit_b = kRoot / "fit_b";
    const auto f1 = run("fit --data " + data.string() + " --out " + fit_a.string() + " --seed 5" + kFitBudget);
    ASSERT_EQ(f1.code, 0) << f1.output;
    EXPECT_NE(f1.output.find("cells"), std::string::npos); // recovery against truth.json
    ASSERT_EQ(run("fit --data " + data.string() + " --out " + fit_b.string() + " --seed 5" + kFitBudget,
                  "COUNTERFACT_THREADS=1")
                  .code,
              0);
    EXPECT_EQ(slurp(fit_a / "posterior.jsonl"), slurp(fit_b / "posterior.jsonl"));
    for (const auto* f : {"summary.json", "predictive.csv", "base_reproduction.csv"}) {
        EXPECT_TRUE(fs::exists(fit_a / f)) << f;
    }

    const auto ev_a = kRoot / "ev_a", ev_b = kRoot / "ev_b";
    const std::string scen = " --scenario strategies --scenario waning";
    const auto e1 = run("evaluate --data " + data.string() + " --fit " + fit_a.string() + " --out " + ev_a.string() + scen);
    ASSERT_EQ(e1.code, 0) << e1.output;
    EXPECT_NE(e1.output.find("fewer than 1000"), std::string::npos);
    ASSERT_EQ(run("evaluate --data " + data.string() + " --fit " + fit_b.string() + " --out " + ev_b.string() + scen,
                  "COUNTERFACT_THREADS=2")
                  .code,
              0);
    for (const auto* f : {"strategies_waves.csv", "strategies_weekly.csv", "waning_waves.csv"}) {
        EXPECT_EQ(slurp(ev_a / f), slurp(ev_b / f)) << f;
    }
    EXPECT_TRUE(fs::exists(ev_a / "strategies.svg"));
    EXPECT_TRUE(fs::exists(ev_a / "evaluation.json"));

    ASSERT_EQ(run("report --dir " + ev_a.string()).code, 0);
    const auto md = slurp(ev_a / "report.md");
    EXPECT_NE(md.find("## strategies"), std::string::npos);
    EXPECT_NE(md.find("ElderlyFirst"), std::string::npos);
    EXPECT_NE(md.find("strategies.svg"), std::string::npos);

    // evaluation-time errors
    EXPECT_EQ(run("evaluate --data " + data.string() + " --fit " + fit_a.string() + " --out " +
                  (kRoot / "ev_c").string() + " --scenario nonsense")
                  .code,
              2);
    EXPECT_EQ(run("evaluate --data " + data.string() + " --fit " + fit_a.string() + " --out " +
                  (kRoot / "ev_c").string() + " --wave third:2021-01-01")
                  .code,
              2);
    EXPECT_EQ(run("evaluate --data " + data.string() + " --fit " + (kRoot / "desk").string() + " --out " +
                  (kRoot / "ev_c").string())
                  .code,
              3); // no posterior.jsonl there

    // no severe cases at the reference age: the risk factors cannot be anchored
    const auto broken = kRoot / "broken";
    fs::copy(data, broken);
    {
        std::ifstream in(data / "severe.csv");
        std::ofstream out(broken / "severe.csv");
        std::string line;
        std::getline(in, line);
        out << line << '\n';
        while (std::getline(in, line)) {
            if (line.find(",60-69,0,") != std::string::npos) {
                const auto a = line.find(",60-69,0,") + 9;
                line = line.substr(0, a) + "0" + line.substr(line.find(',', a));
            }
            out << line << '\n';
        }
    }
    const auto e4 = run("evaluate --data " + broken.string() + " --fit " + fit_a.string() + " --out " +
                        (kRoot / "ev_d").string());
    EXPECT_EQ(e4.code, 4) << e4.output;
}
