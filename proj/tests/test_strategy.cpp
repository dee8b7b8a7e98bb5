#include "counterfact/strategy.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace counterfact;

namespace
{

DoseMarginals one_group(int weeks, std::vector<double> d1, std::vector<double> d2, std::vector<double> d3)
{
    auto m = DoseMarginals::zeros(1, weeks);
    m.per_age[0][0] = std::move(d1);
    m.per_age[0][1] = std::move(d2);
    m.per_age[0][2] = std::move(d3);
    return m;
}

// Person-dose totals per (dose, week) recomputed from scratch.
std::array<std::vector<double>, kDoses> weekly_totals(const AllocationStrategy& s, const std::vector<double>& pop)
{
    std::array<std::vector<double>, kDoses> out;
    for (auto& v : out) {
        v.assign(static_cast<std::size_t>(s.weeks()), 0.0);
    }
    for (std::size_t a = 0; a < s.groups(); ++a) {
        for (const auto& [t, mass] : s.joint(a)) {
            for (int d = 1; d <= kDoses; ++d) {
                if (t.at(d) <= s.weeks()) {
                    out[static_cast<std::size_t>(d - 1)][static_cast<std::size_t>(t.at(d) - 1)] += pop[a] * mass;
                }
            }
        }
    }
    return out;
}

// Two-group factual where group 0 gets everything.
AllocationStrategy lopsided_factual(int weeks)
{
    auto m = DoseMarginals::zeros(2, weeks);
    m.per_age[0][0][0] = 0.6;
    m.per_age[0][0][1] = 0.2;
    m.per_age[0][1][3] = 0.6;
    m.per_age[0][1][4] = 0.2;
    m.per_age[0][2][16] = 0.5;
    return reconstruct_factual(m);
}

} // namespace

TEST(Reconstruct, UniqueSupportPoint)
{
    std::vector<double> d1(20, 0.0), d2(20, 0.0), d3(20, 0.0);
    d1[0] = 1.0;
    d2[3] = 1.0;
    d3[15] = 1.0;
    const auto s = reconstruct_factual(one_group(20, d1, d2, d3));
    ASSERT_EQ(s.joint(0).size(), 1u);
    const auto& [t, mass] = *s.joint(0).begin();
    EXPECT_EQ(t, (DoseTimes{1, 4, 16}));
    EXPECT_DOUBLE_EQ(mass, 1.0);
}

TEST(Reconstruct, ShortGapIsInfeasible)
{
    EXPECT_THROW(reconstruct_factual(one_group(6, {0.5, 0, 0, 0, 0, 0}, {0, 0, 0.5, 0, 0, 0}, std::vector<double>(6))),
                 InfeasibleError);
}

TEST(Reconstruct, ClosestGapNotSooner)
{
    // Week-5 second doses pair with week 2 (gap 3), never with week 1 while week 2 lasts.
    const auto s = reconstruct_factual(
        one_group(6, {0.3, 0.3, 0, 0, 0, 0}, {0, 0, 0, 0, 0.2, 0.3}, std::vector<double>(6)));
    const auto& j = s.joint(0);
    EXPECT_NEAR(j.at({2, 5, 7}), 0.2, 1e-15);
    EXPECT_NEAR(j.at({2, 6, 7}), 0.1, 1e-15);
    EXPECT_NEAR(j.at({1, 6, 7}), 0.2, 1e-15);
    EXPECT_NEAR(j.at({1, 7, 7}), 0.1, 1e-15);
    EXPECT_NEAR(j.at({7, 7, 7}), 0.4, 1e-15);
}

TEST(Reconstruct, EarlierFirstDoseWinsTies)
{
    // Both first-dose weeks sit at a gap >= 3 from week 6; the closer (week 3) is consumed first.
    const auto s = reconstruct_factual(
        one_group(6, {0.2, 0, 0.2, 0, 0, 0}, {0, 0, 0, 0, 0, 0.3}, std::vector<double>(6)));
    EXPECT_NEAR(s.joint(0).at({3, 6, 7}), 0.2, 1e-15);
    EXPECT_NEAR(s.joint(0).at({1, 6, 7}), 0.1, 1e-15);
}

// A pairing with gap >= g exists iff cumulative later doses never outrun cumulative earlier
// doses shifted by g. Checked against the greedy on random small instances.
TEST(Reconstruct, FeasibilityMatchesHallCondition)
{
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> units(0, 3);
    std::uniform_int_distribution<int> jitter(-1, 1);
    GapRules rules;
    rules.booster_gap = 2;
    int feasible = 0, infeasible = 0;
    for (int trial = 0; trial < 3000; ++trial) {
        const int m = 3 + trial % 4;
        // Persons with dose times drawn around the nominal gaps, so some instances are infeasible.
        std::array<std::vector<double>, kDoses> marg;
        for (auto& v : marg) {
            v.assign(static_cast<std::size_t>(m), 0.0);
        }
        for (int p = 0; p < 6; ++p) {
            const int t1 = 1 + units(rng) % m;
            const int t2 = t1 + rules.second_dose_gap + jitter(rng);
            const int t3 = t2 + rules.booster_gap + jitter(rng);
            const double mass = (1 + units(rng)) / 32.0;
            marg[0][static_cast<std::size_t>(t1 - 1)] += mass;
            if (t2 <= m && units(rng) > 0) {
                marg[1][static_cast<std::size_t>(t2 - 1)] += mass;
                if (t3 <= m && units(rng) > 0) {
                    marg[2][static_cast<std::size_t>(t3 - 1)] += mass;
                }
            }
        }
        bool ok = true;
        double total1 = 0;
        for (double x : marg[0]) {
            total1 += x;
        }
        ok = total1 <= 1.0;
        for (int dose = 1; dose < kDoses && ok; ++dose) {
            const int gap = dose == 1 ? rules.second_dose_gap : rules.booster_gap;
            double later = 0.0;
            for (int t = 1; t <= m; ++t) {
                later += marg[static_cast<std::size_t>(dose)][static_cast<std::size_t>(t - 1)];
                double earlier = 0.0;
                for (int s = 1; s <= t - gap; ++s) {
                    earlier += marg[static_cast<std::size_t>(dose - 1)][static_cast<std::size_t>(s - 1)];
                }
                if (later > earlier + 1e-12) {
                    ok = false;
                }
            }
        }
        auto dm = DoseMarginals::zeros(1, m);
        dm.per_age[0] = marg;
        if (ok) {
            ++feasible;
            const auto s = reconstruct_factual(dm, "x", rules);
            s.validate(rules.booster_gap);
            for (int d = 1; d <= kDoses; ++d) {
                const auto back = s.marginal(0, d);
                for (int t = 0; t < m; ++t) {
                    EXPECT_NEAR(back[static_cast<std::size_t>(t)],
                                marg[static_cast<std::size_t>(d - 1)][static_cast<std::size_t>(t)], 1e-12);
                }
            }
            for (const auto& [t, mass] : s.joint(0)) {
                if (t.t2 <= m) {
                    EXPECT_GE(t.t2 - t.t1, rules.second_dose_gap);
                }
            }
        }
        else {
            ++infeasible;
            EXPECT_THROW(reconstruct_factual(dm, "x", rules), InfeasibleError);
        }
    }
    EXPECT_GT(feasible, 100);
    EXPECT_GT(infeasible, 100);
}

TEST(Uniform, FixedPointWhenAlreadyUniform)
{
    auto m = DoseMarginals::zeros(2, 20);
    for (std::size_t a = 0; a < 2; ++a) {
        m.per_age[a][0][0] = 0.5;
        m.per_age[a][1][3] = 0.5;
        m.per_age[a][2][15] = 0.25;
    }
    const auto f = reconstruct_factual(m);
    const std::vector<double> pop = {1000.0, 3000.0};
    const auto u = generate_uniform(f, pop, "Factual");
    for (std::size_t a = 0; a < 2; ++a) {
        ASSERT_EQ(u.joint(a).size(), f.joint(a).size());
        for (const auto& [t, mass] : f.joint(a)) {
            EXPECT_NEAR(u.joint(a).at(t), mass, 1e-15);
        }
    }
}

TEST(Uniform, EqualGroupsSplitLopsidedBudget)
{
    const std::vector<double> pop = {500.0, 500.0};
    const auto f = lopsided_factual(20);
    const auto u = generate_uniform(f, pop);
    u.validate();
    for (int d = 1; d <= kDoses; ++d) {
        const auto m0 = f.marginal(0, d);
        const auto m1 = u.marginal(0, d);
        for (std::size_t t = 0; t < m0.size(); ++t) {
            EXPECT_NEAR(m1[t], 0.5 * m0[t], 1e-15);
        }
    }
    EXPECT_EQ(u.joint(0), u.joint(1));
}

TEST(Ranked, ElderlyFirstExhaustsOldestGroupFirst)
{
    // Three groups; all doses factually go to the middle group at a fixed weekly rate.
    const int weeks = 30;
    auto m = DoseMarginals::zeros(3, weeks);
    for (std::size_t a = 0; a < 3; ++a) {
        for (int t = 0; t < 10; ++t) {
            m.per_age[a][0][static_cast<std::size_t>(t)] = 0.08;
            m.per_age[a][1][static_cast<std::size_t>(t + 3)] = 0.08;
        }
        for (int t = 16; t < 26; ++t) {
            m.per_age[a][2][static_cast<std::size_t>(t)] = 0.05;
        }
    }
    const auto f = reconstruct_factual(m);
    const std::vector<double> pop = {1000.0, 1000.0, 1000.0};
    const std::vector<std::size_t> order = {2, 1, 0};
    RankedReport report;
    const auto r = generate_ranked(f, ranking_from_order(order), pop, "ElderlyFirst", {}, &report);
    r.validate();

    const auto old_first = r.marginal(2, 1);
    const auto young_first = r.marginal(0, 1);
    double cum_old = 0.0;
    for (std::size_t t = 0; t < old_first.size(); ++t) {
        if (young_first[t] > 0.0) {
            EXPECT_NEAR(cum_old, f.uptake(2, 1), 1e-12) << "week " << t + 1;
        }
        cum_old += old_first[t];
    }
    const auto fb = weekly_totals(f, pop);
    const auto rb = weekly_totals(r, pop);
    for (std::size_t d = 0; d < kDoses; ++d) {
        for (std::size_t t = 0; t < fb[d].size(); ++t) {
            EXPECT_NEAR(rb[d][t], fb[d][t], 1e-9);
        }
    }
    EXPECT_EQ(report.unplaced_doses, 0.0);
}

TEST(Ranked, RespectsCaps)
{
    const int weeks = 30;
    const auto f = lopsided_factual(weeks);
    const std::vector<double> pop = {800.0, 1200.0};
    for (auto order : {std::vector<std::size_t>{0, 1}, std::vector<std::size_t>{1, 0}}) {
        const auto r = generate_ranked(f, ranking_from_order(order), pop, "r");
        r.validate();
        for (std::size_t a = 0; a < 2; ++a) {
            EXPECT_LE(r.uptake(a, 1), f.uptake(a, 1) + 1e-12);
            EXPECT_LE(r.uptake(a, 2), f.uptake(a, 2) + 1e-12);
            EXPECT_LE(r.uptake(a, 3), f.uptake(a, 3) + 0.025 + 1e-12);
        }
    }
}

TEST(Ranked, SingleGroupReproducesFactual)
{
    std::vector<double> d1(20, 0.0), d2(20, 0.0), d3(20, 0.0);
    d1[0] = 0.4;
    d1[1] = 0.4;
    d2[3] = 0.4;
    d2[5] = 0.4;
    d3[17] = 0.3;
    const auto f = reconstruct_factual(one_group(20, d1, d2, d3));
    const std::vector<double> pop = {1234.0};
    const std::vector<std::size_t> order = {0};
    const auto r = generate_ranked(f, ranking_from_order(order), pop, "Factual");
    for (int d = 1; d <= kDoses; ++d) {
        const auto a = f.marginal(0, d), b = r.marginal(0, d);
        for (std::size_t t = 0; t < a.size(); ++t) {
            EXPECT_NEAR(a[t], b[t], 1e-12);
        }
    }
    r.validate();
}

TEST(Ranked, TiedClassEqualsUniform)
{
    const auto f = lopsided_factual(20);
    const std::vector<double> pop = {700.0, 1300.0};
    const std::vector<double> flat = {1.0, 1.0};
    const auto r = generate_ranked(f, ranking_from_scores(flat), pop, "Uniform");
    EXPECT_TRUE(r == generate_uniform(f, pop));
}

TEST(Ranked, RejectsNonPermutation)
{
    const auto f = lopsided_factual(20);
    const std::vector<double> pop = {700.0, 1300.0};
    Ranking bad = {{0}, {0}};
    EXPECT_THROW(generate_ranked(f, bad, pop, "x"), ConfigError);
}

TEST(Boost, ZeroDosesIsIdentity)
{
    const auto f = lopsided_factual(20);
    const std::vector<double> pop = {700.0, 1300.0};
    EXPECT_TRUE(boost_uptake(f, 0, 0.0, pop) == f);
}

TEST(Boost, ScalesWeeklyDosesByConstant)
{
    const auto f = lopsided_factual(20);
    const std::vector<double> pop = {700.0, 1300.0};
    const double extra = 60.0;
    const auto b = boost_uptake(f, 0, extra, pop);
    b.validate();
    const int never = f.never();
    EXPECT_NEAR(f.joint(0).at({never, never, never}) - b.joint(0).at({never, never, never}),
                extra / (3.0 * pop[0]), 1e-15);
    EXPECT_EQ(b.joint(1), f.joint(1));
    for (int d = 1; d <= kDoses; ++d) {
        const auto before = f.marginal(0, d), after = b.marginal(0, d);
        double ratio = -1.0;
        for (std::size_t t = 0; t < before.size(); ++t) {
            if (before[t] > 0.0) {
                if (ratio < 0.0) {
                    ratio = after[t] / before[t];
                }
                EXPECT_NEAR(after[t] / before[t], ratio, 1e-12);
            }
            else {
                EXPECT_EQ(after[t], 0.0);
            }
        }
        EXPECT_GT(ratio, 1.0);
    }
}

TEST(Boost, RejectsTooManyDoses)
{
    const auto f = lopsided_factual(20);
    const std::vector<double> pop = {700.0, 1300.0};
    EXPECT_THROW(boost_uptake(f, 0, 3.0 * 700.0, pop), InfeasibleError);
}

TEST(Tables, StatusFractionsClose)
{
    const auto f = lopsided_factual(20);
    for (const auto& age : status_fractions(f)) {
        for (const auto& row : age) {
            EXPECT_NEAR(row[0] + row[1] + row[2] + row[3], 1.0, 1e-12);
        }
    }
}
