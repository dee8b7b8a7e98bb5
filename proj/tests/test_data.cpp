#include "counterfact/dataset_io.hpp"
#include "counterfact/synthetic.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <numeric>

using namespace counterfact;
namespace fs = std::filesystem;

namespace
{

fs::path scratch_dir(const std::string& name)
{
    auto p = fs::temp_directory_path() / ("counterfact_data_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

void write(const fs::path& p, const std::string& text)
{
    std::ofstream(p) << text;
}

SyntheticSpec short_spec()
{
    auto s = desk_spec();
    s.weeks = 10;
    for (auto& h : s.dynamics.influx) {
        h.resize(10);
    }
    return s;
}

std::string error_of(const fs::path& dir)
{
    try {
        load_dataset(dir);
    }
    catch (const DataError& e) {
        return e.what();
    }
    return {};
}

} // namespace

TEST(Population, IsraelTotalGivesTheExtraDoseCount)
{
    const double total = std::accumulate(kIsraelPopulation.begin(), kIsraelPopulation.end(), 0.0);
    EXPECT_EQ(total, 9'291'000.0);
    EXPECT_DOUBLE_EQ(0.006 * total, 55'746.0);
}

TEST(Dataset, RoundTripIsBitExact)
{
    auto spec = short_spec();
    spec.case_noise = true;
    spec.severe_noise = true;
    const auto b = generate_synthetic(spec, 11);
    const auto dir = scratch_dir("roundtrip");
    save_dataset(b.data, dir);
    const auto back = load_dataset(dir);
    EXPECT_TRUE(back.same_observations(b.data));
    EXPECT_EQ(back.start, b.data.start);
    EXPECT_EQ(back.weeks, 10);
    EXPECT_TRUE(back.factual == b.data.factual);
    EXPECT_EQ(back.status_fractions, b.data.status_fractions);
}

TEST(Dataset, SynthIsDeterministic)
{
    auto spec = short_spec();
    spec.case_noise = true;
    spec.severe_noise = true;
    const auto a = generate_synthetic(spec, 5);
    const auto b = generate_synthetic(spec, 5);
    const auto c = generate_synthetic(spec, 6);
    EXPECT_TRUE(a.data.same_observations(b.data));
    EXPECT_FALSE(a.data.same_observations(c.data));
}

TEST(Dataset, DerivedTablesClose)
{
    const auto b = generate_synthetic(israel_like_spec(), 1);
    const auto& d = b.data;
    for (std::size_t a = 0; a < d.groups.size(); ++a) {
        for (std::size_t t = 0; t < static_cast<std::size_t>(d.weeks); ++t) {
            const auto& f = d.status_fractions[a][t];
            EXPECT_NEAR(f[0] + f[1] + f[2] + f[3], 1.0, 1e-9);
            for (std::size_t v = 1; v < kStatuses; ++v) {
                const auto& w = d.waning_distribution[v][a][t];
                if (f[v] > 0.0) {
                    EXPECT_NEAR(std::accumulate(w.begin(), w.end(), 0.0), 1.0, 1e-9);
                }
            }
        }
    }
}

TEST(Dataset, ConstantReproductionGivesConstantCases)
{
    SyntheticSpec s;
    s.start = parse_date("2021-01-03");
    s.weeks = 12;
    s.groups = {{"20-29", 1e6}, {"60-69", 5e5}};
    s.campaigns.assign(2, Campaign{});
    s.dynamics.r0 = {1.0, 1.0};
    s.dynamics.change_points.assign(2, {});
    s.dynamics.influx.assign(2, std::vector<double>(12, 0.0));
    s.config.susceptible_depletion = false;
    s.initial_weekly_cases = {700.0, 350.0};
    s.g.fill({1.0, 1.0});
    const auto b = generate_synthetic(s, 1);
    for (std::size_t a = 0; a < 2; ++a) {
        for (double c : b.data.cases[a]) {
            EXPECT_NEAR(c, s.initial_weekly_cases[a] * 8.0 / 7.0, 1e-9 * c);
        }
    }
}

TEST(Dataset, MissingFileNamesIt)
{
    const auto dir = scratch_dir("missing");
    save_dataset(generate_synthetic(short_spec(), 1).data, dir);
    fs::remove(dir / "severe.csv");
    EXPECT_NE(error_of(dir).find("severe.csv"), std::string::npos);
}

TEST(Dataset, EmptyCasesHasNoObservations)
{
    const auto dir = scratch_dir("empty");
    save_dataset(generate_synthetic(short_spec(), 1).data, dir);
    write(dir / "cases.csv", "week,age_label,cases\n");
    EXPECT_NE(error_of(dir).find("no observations"), std::string::npos);
}

TEST(Dataset, MalformedRowCarriesLineNumber)
{
    const auto dir = scratch_dir("malformed");
    save_dataset(generate_synthetic(short_spec(), 1).data, dir);
    write(dir / "cases.csv", "week,age_label,cases\n2021-01-03,20-29,10\n2021-01-03,60-69,ten\n");
    const auto msg = error_of(dir);
    EXPECT_NE(msg.find("cases.csv:3"), std::string::npos) << msg;

    write(dir / "cases.csv", "week,age_label,cases\n2021-01-03,20-29\n");
    EXPECT_NE(error_of(dir).find("cases.csv:2"), std::string::npos);

    write(dir / "cases.csv", "week,age_label,cases\n2021-01-03,70-79,4\n");
    EXPECT_NE(error_of(dir).find("unknown age group"), std::string::npos);
}

TEST(Dataset, RejectsInvariantViolations)
{
    const auto dir = scratch_dir("invariants");
    const auto d = generate_synthetic(short_spec(), 1).data;

    save_dataset(d, dir);
    write(dir / "population.csv", "age_label,population\n20-29,0\n60-69,800000\n");
    EXPECT_NE(error_of(dir).find("non-positive population"), std::string::npos);

    save_dataset(d, dir);
    write(dir / "cases.csv", "week,age_label,cases\n2021-01-03,20-29,-1\n");
    EXPECT_NE(error_of(dir).find("cases out of range"), std::string::npos);

    save_dataset(d, dir);
    write(dir / "cases.csv", "week,age_label,cases\n2021-01-05,20-29,1\n");
    EXPECT_FALSE(error_of(dir).empty());

    save_dataset(d, dir);
    write(dir / "vaccinations.csv", "week,age_label,dose_number,count\n2021-01-03,20-29,4,1\n");
    EXPECT_NE(error_of(dir).find("out of range"), std::string::npos);
}

TEST(Dataset, AcceptsByteOrderMarkAndCrlf)
{
    const auto dir = scratch_dir("bom");
    const auto d = generate_synthetic(short_spec(), 1).data;
    save_dataset(d, dir);
    write(dir / "population.csv", "\xEF\xBB\xBF" "age_label,population\r\n20-29,1200000\r\n60-69,800000\r\n");
    EXPECT_TRUE(load_dataset(dir).same_observations(d));
}

TEST(Synthetic, RejectsInconsistentSpec)
{
    auto s = short_spec();
    s.groups[0].population = -5;
    EXPECT_THROW(generate_synthetic(s, 1), ConfigError);
    s = short_spec();
    s.dynamics.r0.pop_back();
    EXPECT_THROW(generate_synthetic(s, 1), ConfigError);
}
