#ifndef COUNTERFACT_STRATEGY_HPP
#define COUNTERFACT_STRATEGY_HPP

#include "counterfact/common.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

namespace counterfact
{

/// Weeks (1-based) in which doses 1..3 were received. M+1 encodes "never".
struct DoseTimes {
    int t1 = 0;
    int t2 = 0;
    int t3 = 0;

    auto operator<=>(const DoseTimes&) const = default;

    int at(int dose) const { return dose == 1 ? t1 : dose == 2 ? t2 : t3; }

    /// Doses received by the end of week t.
    int status(int week) const { return (t1 <= week) + (t2 <= week) + (t3 <= week); }

    /// Week of the most recent dose received by week t (undefined for status 0).
    int last_dose(int week) const { return t3 <= week ? t3 : t2 <= week ? t2 : t1; }
};

using JointDistribution = std::map<DoseTimes, double>;

/// Weekly probability of receiving dose i (i = 1..3) per age group; index [age][dose-1][week-1].
struct DoseMarginals {
    int weeks = 0;
    std::vector<std::array<std::vector<double>, kDoses>> per_age;

    static DoseMarginals zeros(std::size_t groups, int weeks)
    {
        DoseMarginals m;
        m.weeks = weeks;
        m.per_age.resize(groups);
        for (auto& a : m.per_age) {
            for (auto& d : a) {
                d.assign(static_cast<std::size_t>(weeks), 0.0);
            }
        }
        return m;
    }

    double uptake(std::size_t age, int dose) const
    {
        const auto& v = per_age[age][static_cast<std::size_t>(dose - 1)];
        return std::accumulate(v.begin(), v.end(), 0.0);
    }
};

/// Per-age joint distribution over vaccination weeks (t1, t2, t3).
class AllocationStrategy
{
public:
    AllocationStrategy() = default;
    AllocationStrategy(std::string label, int weeks, std::size_t groups)
        : label_(std::move(label))
        , weeks_(weeks)
        , per_age_(groups)
    {
    }

    const std::string& label() const { return label_; }
    void set_label(std::string l) { label_ = std::move(l); }
    int weeks() const { return weeks_; }
    int never() const { return weeks_ + 1; }
    std::size_t groups() const { return per_age_.size(); }

    const JointDistribution& joint(std::size_t age) const { return per_age_.at(age); }
    JointDistribution& joint(std::size_t age) { return per_age_.at(age); }

    void add(std::size_t age, DoseTimes times, double mass)
    {
        if (mass != 0.0) {
            per_age_.at(age)[times] += mass;
        }
    }

    /// P(T_i = t | a) for t = 1..M.
    std::vector<double> marginal(std::size_t age, int dose) const
    {
        std::vector<double> out(static_cast<std::size_t>(weeks_), 0.0);
        for (const auto& [times, mass] : per_age_.at(age)) {
            const int t = times.at(dose);
            if (t <= weeks_) {
                out[static_cast<std::size_t>(t - 1)] += mass;
            }
        }
        return out;
    }

    DoseMarginals marginals() const
    {
        auto m = DoseMarginals::zeros(groups(), weeks_);
        for (std::size_t a = 0; a < groups(); ++a) {
            for (int d = 1; d <= kDoses; ++d) {
                m.per_age[a][static_cast<std::size_t>(d - 1)] = marginal(a, d);
            }
        }
        return m;
    }

    double uptake(std::size_t age, int dose) const
    {
        auto m = marginal(age, dose);
        return std::accumulate(m.begin(), m.end(), 0.0);
    }

    double total_mass(std::size_t age) const
    {
        double s = 0.0;
        for (const auto& kv : per_age_.at(age)) {
            s += kv.second;
        }
        return s;
    }

    /// Checks normalisation, monotone dosing with an absorbing sentinel and the booster gap.
    void validate(int booster_gap = 12, double tol = 1e-9) const
    {
        for (std::size_t a = 0; a < groups(); ++a) {
            double sum = 0.0;
            for (const auto& [t, mass] : per_age_[a]) {
                const auto where = "strategy '" + label_ + "', age " + std::to_string(a);
                if (!(mass >= 0.0)) {
                    throw InfeasibleError(where + ": negative mass");
                }
                for (int x : {t.t1, t.t2, t.t3}) {
                    if (x < 1 || x > never()) {
                        throw InfeasibleError(where + ": week out of range");
                    }
                }
                if (!(t.t1 <= t.t2 && t.t2 <= t.t3)) {
                    throw InfeasibleError(where + ": non-monotone dose times");
                }
                if ((t.t1 == never() && t.t2 != never()) || (t.t2 == never() && t.t3 != never())) {
                    throw InfeasibleError(where + ": dose after a missing dose");
                }
                if (t.t3 <= weeks_ && t.t3 < t.t2 + booster_gap && mass > 0.0) {
                    throw InfeasibleError(where + ": booster gap below " + std::to_string(booster_gap) + " weeks");
                }
                sum += mass;
            }
            if (std::abs(sum - 1.0) > tol) {
                throw InfeasibleError("strategy '" + label_ + "', age " + std::to_string(a) +
                                      ": mass sums to " + format_double(sum));
            }
        }
    }

    bool operator==(const AllocationStrategy&) const = default;

private:
    std::string label_;
    int weeks_ = 0;
    std::vector<JointDistribution> per_age_;
};

/// Weekly person-dose totals and per-age uptake caps.
struct DoseBudget {
    /// [dose-1][week-1], persons receiving that dose in that week.
    std::array<std::vector<double>, kDoses> per_week;
    /// [age][dose-1], maximum fraction of the group receiving that dose.
    std::vector<std::array<double, kDoses>> caps;
};

inline DoseBudget dose_budget(const AllocationStrategy& s, std::span<const double> population)
{
    DoseBudget b;
    for (auto& v : b.per_week) {
        v.assign(static_cast<std::size_t>(s.weeks()), 0.0);
    }
    b.caps.resize(s.groups());
    for (std::size_t a = 0; a < s.groups(); ++a) {
        for (int d = 1; d <= kDoses; ++d) {
            const auto m = s.marginal(a, d);
            for (std::size_t t = 0; t < m.size(); ++t) {
                b.per_week[static_cast<std::size_t>(d - 1)][t] += population[a] * m[t];
            }
            b.caps[a][static_cast<std::size_t>(d - 1)] = std::accumulate(m.begin(), m.end(), 0.0);
        }
    }
    return b;
}

struct GapRules {
    /// Target gap between first and second dose; shorter gaps are never chosen if `strict`.
    int second_dose_gap = 3;
    /// Hard minimum between second and third dose.
    int booster_gap = 12;
    bool strict = true;
};

namespace detail
{

inline constexpr double kMassEps = 1e-13;

/// Tracks vaccination cohorts of one group while doses are handed out week by week.
class CohortBook
{
public:
    explicit CohortBook(int weeks)
        : weeks_(weeks)
        , first_only_(static_cast<std::size_t>(weeks) + 2, 0.0)
    {
    }

    void give_first(int week, double amount) { first_only_[static_cast<std::size_t>(week)] += amount; }

    /// Mass eligible for a second dose in `week` with gap >= min_gap.
    double eligible_second(int week, int min_gap) const
    {
        double s = 0.0;
        for (int t1 = 1; t1 <= week - min_gap; ++t1) {
            s += first_only_[static_cast<std::size_t>(t1)];
        }
        return s;
    }

    /// Consumes first-dose cohorts closest to the target gap first (never below it when strict),
    /// then, if allowed, progressively shorter gaps. Returns the amount placed.
    double give_second(int week, double amount, const GapRules& rules, bool allow_short)
    {
        double left = amount;
        auto take = [&](int t1) {
            if (left <= 0.0 || t1 < 1) {
                return;
            }
            double& avail = first_only_[static_cast<std::size_t>(t1)];
            const double x = std::min(avail, left);
            if (x <= 0.0) {
                return;
            }
            avail -= x;
            if (avail < kMassEps * std::max(1.0, amount)) {
                left -= avail; // absorb rounding dust
                pairs_[{t1, week}] += avail;
                avail = 0.0;
            }
            pairs_[{t1, week}] += x;
            left -= x;
        };
        for (int t1 = week - rules.second_dose_gap; t1 >= 1 && left > 0.0; --t1) {
            take(t1);
        }
        if (allow_short) {
            for (int gap = rules.second_dose_gap - 1; gap >= 1 && left > 0.0; --gap) {
                take(week - gap);
            }
        }
        return amount - std::max(left, 0.0);
    }

    double eligible_third(int week, int booster_gap) const
    {
        double s = 0.0;
        for (const auto& [key, mass] : pairs_) {
            if (key.second <= week - booster_gap) {
                s += mass;
            }
        }
        return s;
    }

    /// Earliest second-dose cohorts (then earliest first dose) are boosted first.
    double give_third(int week, double amount, int booster_gap)
    {
        double left = amount;
        std::vector<std::pair<int, int>> keys;
        for (const auto& [key, mass] : pairs_) {
            if (key.second <= week - booster_gap && mass > 0.0) {
                keys.push_back(key);
            }
        }
        std::sort(keys.begin(), keys.end(), [](auto a, auto b) {
            return std::tie(a.second, a.first) < std::tie(b.second, b.first);
        });
        for (const auto& key : keys) {
            if (left <= 0.0) {
                break;
            }
            double& avail = pairs_[key];
            double x = std::min(avail, left);
            avail -= x;
            if (avail < kMassEps * std::max(1.0, amount)) {
                x += avail;
                avail = 0.0;
            }
            full_[DoseTimes{key.first, key.second, week}] += x;
            left -= x;
        }
        return amount - std::max(left, 0.0);
    }

    double first_total() const
    {
        double s = 0.0;
        for (double x : first_only_) {
            s += x;
        }
        for (const auto& kv : pairs_) {
            s += kv.second;
        }
        for (const auto& kv : full_) {
            s += kv.second;
        }
        return s;
    }

    /// Writes the cohorts (divided by `scale`) plus the never-vaccinated remainder into `out`.
    void emit(JointDistribution& out, double total, double scale) const
    {
        const int never = weeks_ + 1;
        double vaccinated = 0.0;
        for (int t1 = 1; t1 <= weeks_; ++t1) {
            const double m = first_only_[static_cast<std::size_t>(t1)];
            if (m > 0.0) {
                out[{t1, never, never}] += m / scale;
                vaccinated += m;
            }
        }
        for (const auto& [key, m] : pairs_) {
            if (m > 0.0) {
                out[{key.first, key.second, never}] += m / scale;
                vaccinated += m;
            }
        }
        for (const auto& [key, m] : full_) {
            if (m > 0.0) {
                out[key] += m / scale;
                vaccinated += m;
            }
        }
        double rest = (total - vaccinated) / scale;
        if (rest < -1e-9) {
            throw InfeasibleError("more vaccinated persons than population in group");
        }
        if (rest > 0.0) {
            out[{never, never, never}] += rest;
        }
    }

private:
    int weeks_;
    std::vector<double> first_only_;
    std::map<std::pair<int, int>, double> pairs_;
    JointDistribution full_;
};

/// Greedy joint for one group from its weekly dose marginals.
inline JointDistribution joint_from_marginals(const std::array<std::vector<double>, kDoses>& m, int weeks,
                                              const GapRules& rules, const std::string& where)
{
    CohortBook book(weeks);
    const double tol = 1e-9;
    for (int t = 1; t <= weeks; ++t) {
        const auto i = static_cast<std::size_t>(t - 1);
        if (m[0][i] < 0.0 || m[1][i] < 0.0 || m[2][i] < 0.0) {
            throw InfeasibleError(where + ": negative dose marginal in week " + std::to_string(t));
        }
        book.give_first(t, m[0][i]);
        const double placed2 = book.give_second(t, m[1][i], rules, !rules.strict);
        if (placed2 < m[1][i] - tol) {
            throw InfeasibleError(where + ": second doses in week " + std::to_string(t) +
                                  " cannot be paired with a first dose at least " +
                                  std::to_string(rules.strict ? rules.second_dose_gap : 1) + " weeks earlier");
        }
        const double placed3 = book.give_third(t, m[2][i], rules.booster_gap);
        if (placed3 < m[2][i] - tol) {
            throw InfeasibleError(where + ": third doses in week " + std::to_string(t) +
                                  " precede every available second dose by less than " +
                                  std::to_string(rules.booster_gap) + " weeks");
        }
    }
    if (book.first_total() > 1.0 + tol) {
        throw InfeasibleError(where + ": first-dose uptake exceeds 1");
    }
    JointDistribution out;
    book.emit(out, 1.0, 1.0);
    return out;
}

} // namespace detail

/// Joint vaccination-time distribution consistent with observed per-age dose marginals.
///
/// Second doses are paired with first doses as close to the target gap as possible but never
/// sooner; boosters go to the earliest eligible second-dose cohorts at least `booster_gap`
/// weeks back. Weeks are processed in order.
inline AllocationStrategy reconstruct_factual(const DoseMarginals& marginals, std::string label = "Factual",
                                              GapRules rules = {})
{
    AllocationStrategy s(std::move(label), marginals.weeks, marginals.per_age.size());
    for (std::size_t a = 0; a < marginals.per_age.size(); ++a) {
        s.joint(a) = detail::joint_from_marginals(marginals.per_age[a], marginals.weeks, rules,
                                                  "age group " + std::to_string(a));
    }
    return s;
}

/// Every group gets the same joint; weekly person-dose totals equal the factual ones.
inline AllocationStrategy generate_uniform(const AllocationStrategy& factual, std::span<const double> population,
                                           std::string label = "Uniform")
{
    const double total = std::accumulate(population.begin(), population.end(), 0.0);
    const auto budget = dose_budget(factual, population);
    std::array<std::vector<double>, kDoses> shared;
    for (int d = 0; d < kDoses; ++d) {
        shared[static_cast<std::size_t>(d)] = budget.per_week[static_cast<std::size_t>(d)];
        for (double& x : shared[static_cast<std::size_t>(d)]) {
            x /= total;
        }
    }
    GapRules rules;
    rules.strict = false;
    JointDistribution joint;
    try {
        joint = detail::joint_from_marginals(shared, factual.weeks(), rules, "uniform strategy");
    }
    catch (const InfeasibleError& e) {
        throw InfeasibleError(std::string("cannot equalise dose budget across groups: ") + e.what());
    }
    AllocationStrategy out(std::move(label), factual.weeks(), factual.groups());
    for (std::size_t a = 0; a < factual.groups(); ++a) {
        out.joint(a) = joint;
    }
    return out;
}

/// Priority classes, highest first. Groups within a class share doses in proportion to
/// their remaining capacity.
using Ranking = std::vector<std::vector<std::size_t>>;

inline Ranking ranking_from_order(std::span<const std::size_t> order)
{
    Ranking r;
    for (auto a : order) {
        r.push_back({a});
    }
    return r;
}

/// Ranks groups by score (ties share a class).
inline Ranking ranking_from_scores(std::span<const double> scores, bool descending = true)
{
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) {
        return descending ? scores[a] > scores[b] : scores[a] < scores[b];
    });
    Ranking r;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (i > 0 && scores[idx[i]] == scores[idx[i - 1]]) {
            r.back().push_back(idx[i]);
        }
        else {
            r.push_back({idx[i]});
        }
    }
    return r;
}

struct RankedOptions {
    /// Absolute relaxation of the booster uptake cap.
    double booster_cap_relaxation = 0.025;
    /// Overrides the factual uptake caps for every dose (e.g. a flat 90% willingness).
    std::optional<double> flat_uptake;
};

/// Diagnostics of a ranked generation run.
struct RankedReport {
    /// Person-doses that could not be placed in their week and were carried to the next one.
    double deferred_doses = 0.0;
    /// Person-doses still unplaced at the end of the window.
    double unplaced_doses = 0.0;
};

/// Doses of each week flow to the highest-ranked group that still has uptake capacity.
///
/// Weekly person-dose totals match the factual strategy. First and second doses are capped at
/// the factual uptake, boosters at the factual uptake plus a small relaxation. Whatever a class
/// cannot absorb spills to the next class within the same week.
inline AllocationStrategy generate_ranked(const AllocationStrategy& factual, const Ranking& ranking,
                                          std::span<const double> population, std::string label,
                                          const RankedOptions& opts = {}, RankedReport* report = nullptr)
{
    const std::size_t groups = factual.groups();
    {
        std::vector<std::size_t> seen;
        for (const auto& cls : ranking) {
            seen.insert(seen.end(), cls.begin(), cls.end());
        }
        std::sort(seen.begin(), seen.end());
        std::vector<std::size_t> expect(groups);
        std::iota(expect.begin(), expect.end(), 0);
        if (seen != expect) {
            throw ConfigError("ranking is not a permutation of the age groups");
        }
    }
    if (ranking.size() == 1 && groups > 1 && !opts.flat_uptake) {
        // No prioritisation at all.
        return generate_uniform(factual, population, std::move(label));
    }

    const auto budget = dose_budget(factual, population);
    std::vector<std::array<double, kDoses>> cap(groups);
    for (std::size_t a = 0; a < groups; ++a) {
        for (int d = 0; d < kDoses; ++d) {
            double c = opts.flat_uptake ? *opts.flat_uptake : budget.caps[a][static_cast<std::size_t>(d)];
            if (d == 2 && !opts.flat_uptake) {
                c += opts.booster_cap_relaxation;
            }
            cap[a][static_cast<std::size_t>(d)] = std::clamp(c, 0.0, 1.0) * population[a];
        }
    }
    if (ranking.size() == 1 && groups > 1) {
        // Single tie class with explicit caps: behaves like Uniform when caps do not bind.
        bool binding = false;
        const double total = std::accumulate(population.begin(), population.end(), 0.0);
        for (std::size_t a = 0; a < groups && !binding; ++a) {
            for (int d = 0; d < kDoses; ++d) {
                const auto& w = budget.per_week[static_cast<std::size_t>(d)];
                const double share = std::accumulate(w.begin(), w.end(), 0.0) / total * population[a];
                binding = binding || share > cap[a][static_cast<std::size_t>(d)] * (1.0 + 1e-12);
            }
        }
        if (!binding) {
            return generate_uniform(factual, population, std::move(label));
        }
    }

    std::vector<detail::CohortBook> books(groups, detail::CohortBook(factual.weeks()));
    std::vector<std::array<double, kDoses>> given(groups, {0.0, 0.0, 0.0});
    GapRules rules;
    double carry[kDoses] = {0.0, 0.0, 0.0};
    RankedReport rep;

    for (int t = 1; t <= factual.weeks(); ++t) {
        const auto wi = static_cast<std::size_t>(t - 1);
        for (int d = 1; d <= kDoses; ++d) {
            const auto di = static_cast<std::size_t>(d - 1);
            double left = budget.per_week[di][wi] + carry[di];
            // Second doses: one pass respecting the target gap, then one allowing shorter gaps.
            const int passes = d == 2 ? 2 : 1;
            for (int pass = 0; pass < passes && left > 1e-12; ++pass) {
                const bool allow_short = pass == 1;
                for (const auto& cls : ranking) {
                    if (left <= 1e-12) {
                        break;
                    }
                    std::vector<double> room(cls.size(), 0.0);
                    double room_total = 0.0;
                    for (std::size_t k = 0; k < cls.size(); ++k) {
                        const auto a = cls[k];
                        double r = std::max(0.0, cap[a][di] - given[a][di]);
                        if (d == 2) {
                            r = std::min(r, books[a].eligible_second(t, allow_short ? 1 : rules.second_dose_gap));
                        }
                        else if (d == 3) {
                            r = std::min(r, books[a].eligible_third(t, rules.booster_gap));
                        }
                        room[k] = r;
                        room_total += r;
                    }
                    if (room_total <= 0.0) {
                        continue;
                    }
                    const double share = std::min(left, room_total);
                    for (std::size_t k = 0; k < cls.size(); ++k) {
                        if (room[k] <= 0.0) {
                            continue;
                        }
                        const auto a = cls[k];
                        const double x = share * (room[k] / room_total);
                        double placed = x;
                        if (d == 1) {
                            books[a].give_first(t, x);
                        }
                        else if (d == 2) {
                            placed = books[a].give_second(t, x, rules, allow_short);
                        }
                        else {
                            placed = books[a].give_third(t, x, rules.booster_gap);
                        }
                        given[a][di] += placed;
                        left -= placed;
                    }
                }
            }
            if (left > 1e-9) {
                rep.deferred_doses += left;
                carry[di] = left;
            }
            else {
                carry[di] = 0.0;
            }
        }
    }
    rep.unplaced_doses = carry[0] + carry[1] + carry[2];
    if (report) {
        *report = rep;
    }

    AllocationStrategy out(std::move(label), factual.weeks(), groups);
    for (std::size_t a = 0; a < groups; ++a) {
        books[a].emit(out.joint(a), population[a], population[a]);
    }
    return out;
}

/// Moves extra_doses/3 never-vaccinated persons of `group` to full three-dose vaccination.
///
/// Their dose timing follows the group's factual weekly administration so that every dose's
/// weekly counts in the group scale by one constant factor. When that violates the booster gap,
/// the timing of the group's factual three-dose recipients is copied instead. Other groups are untouched.
inline AllocationStrategy boost_uptake(const AllocationStrategy& factual, std::size_t group, double extra_doses,
                                       std::span<const double> population, std::string label = {})
{
    AllocationStrategy out = factual;
    if (!label.empty()) {
        out.set_label(std::move(label));
    }
    if (extra_doses == 0.0) {
        return out;
    }
    if (extra_doses < 0.0) {
        throw ConfigError("extra doses must be non-negative");
    }
    const int never = factual.never();
    const DoseTimes unvaccinated{never, never, never};
    const double persons = extra_doses / 3.0;
    const double added = persons / population[group];
    auto& joint = out.joint(group);
    auto it = joint.find(unvaccinated);
    const double available = it == joint.end() ? 0.0 : it->second;
    if (added > available + 1e-12) {
        throw InfeasibleError("group has only " + format_double(available * population[group] * 3.0) +
                              " unvaccinated person-doses available for " + format_double(extra_doses));
    }

    std::array<std::vector<double>, kDoses> shape;
    for (int d = 1; d <= kDoses; ++d) {
        auto m = factual.marginal(group, d);
        const double u = std::accumulate(m.begin(), m.end(), 0.0);
        if (!(u > 0.0)) {
            throw InfeasibleError("group has no factual administrations of dose " + std::to_string(d) +
                                  " to scale");
        }
        for (double& x : m) {
            x /= u;
        }
        shape[static_cast<std::size_t>(d - 1)] = std::move(m);
    }
    GapRules rules;
    rules.strict = false;
    JointDistribution cohort;
    try {
        cohort = detail::joint_from_marginals(shape, factual.weeks(), rules, "uptake boost");
    }
    catch (const InfeasibleError&) {
        // Boosters too close to the second-dose curve for everyone to get all three doses.
        // Copy the timing of the group's factual three-dose cohort instead.
        double total = 0.0;
        for (const auto& [times, mass] : joint) {
            if (times.t3 <= factual.weeks()) {
                cohort[times] += mass;
                total += mass;
            }
        }
        if (!(total > 0.0)) {
            throw InfeasibleError("group has no three-dose recipients whose timing the extra doses could follow");
        }
        for (auto& kv : cohort) {
            kv.second /= total;
        }
    }
    for (const auto& [times, mass] : cohort) {
        if (times == unvaccinated) {
            continue;
        }
        joint[times] += mass * added;
    }
    it = joint.find(unvaccinated);
    it->second -= added;
    if (it->second <= 0.0) {
        joint.erase(it);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Derived per-week tables

/// [age][week-1][status] mass with exactly `status` doses by the end of the week.
inline std::vector<std::vector<std::array<double, kStatuses>>> status_fractions(const AllocationStrategy& s)
{
    std::vector<std::vector<std::array<double, kStatuses>>> out(
        s.groups(), std::vector<std::array<double, kStatuses>>(static_cast<std::size_t>(s.weeks())));
    for (std::size_t a = 0; a < s.groups(); ++a) {
        for (auto& row : out[a]) {
            row.fill(0.0);
        }
        for (const auto& [times, mass] : s.joint(a)) {
            for (int t = 1; t <= s.weeks(); ++t) {
                out[a][static_cast<std::size_t>(t - 1)][static_cast<std::size_t>(times.status(t))] += mass;
            }
        }
    }
    return out;
}

/// Distribution of weeks since the last dose among those with status v in week t.
/// Index [status][age][week-1] -> vector over w = 0..M-1 (mass, not normalised).
using WaningMass = std::vector<std::vector<std::vector<std::vector<double>>>>;

inline WaningMass waning_mass(const AllocationStrategy& s)
{
    const auto weeks = static_cast<std::size_t>(s.weeks());
    WaningMass out(kStatuses, std::vector<std::vector<std::vector<double>>>(
                                  s.groups(), std::vector<std::vector<double>>(weeks, std::vector<double>(weeks, 0.0))));
    for (std::size_t a = 0; a < s.groups(); ++a) {
        for (const auto& [times, mass] : s.joint(a)) {
            for (int t = 1; t <= s.weeks(); ++t) {
                const int v = times.status(t);
                const int w = v == 0 ? 0 : t - times.last_dose(t);
                out[static_cast<std::size_t>(v)][a][static_cast<std::size_t>(t - 1)][static_cast<std::size_t>(w)] +=
                    mass;
            }
        }
    }
    return out;
}

} // namespace counterfact

#endif // COUNTERFACT_STRATEGY_HPP
