#ifndef COUNTERFACT_COMMON_HPP
#define COUNTERFACT_COMMON_HPP

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace counterfact
{

// Error categories. The CLI maps each one onto a distinct exit code.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct InfeasibleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Number of vaccine doses tracked (first, second, booster).
inline constexpr int kDoses = 3;
/// Vaccination states 0..3 (doses received).
inline constexpr int kStatuses = kDoses + 1;

inline constexpr std::array<std::string_view, 9> kAgeLabels = {
    "0-19", "20-29", "30-39", "40-49", "50-59", "60-69", "70-79", "80-89", "90+"};

/// Reference stratum for the risk-factor normalisation g(0, a*) = 1.
inline constexpr std::string_view kReferenceAge = "60-69";

inline constexpr int kDaysPerWeek = 7;

// ---------------------------------------------------------------------------
// Calendar dates

using Date = std::chrono::sys_days;

inline Date parse_date(std::string_view s)
{
    int y = 0;
    unsigned m = 0, d = 0;
    auto bad = [&] { return DataError("malformed ISO date '" + std::string(s) + "'"); };
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') {
        throw bad();
    }
    auto num = [&](std::string_view part, auto& out) {
        auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), out);
        if (ec != std::errc{} || p != part.data() + part.size()) {
            throw bad();
        }
    };
    num(s.substr(0, 4), y);
    num(s.substr(5, 2), m);
    num(s.substr(8, 2), d);
    std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    if (!ymd.ok()) {
        throw bad();
    }
    return Date{ymd};
}

inline std::string format_date(Date date)
{
    std::chrono::year_month_day ymd{date};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", int(ymd.year()), unsigned(ymd.month()),
                  unsigned(ymd.day()));
    return buf;
}

inline long days_between(Date from, Date to)
{
    return (to - from).count();
}

// ---------------------------------------------------------------------------
// Numerics

/// Shortest decimal representation that round-trips to the same double.
inline std::string format_double(double x)
{
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, p);
}

inline double parse_double(std::string_view s)
{
    double out = 0.0;
    auto first = s.data();
    auto last = s.data() + s.size();
    while (first != last && *first == ' ') {
        ++first;
    }
    auto [p, ec] = std::from_chars(first, last, out);
    if (ec != std::errc{} || p != last) {
        throw DataError("malformed number '" + std::string(s) + "'");
    }
    return out;
}

inline long parse_int(std::string_view s)
{
    long out = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc{} || p != s.data() + s.size()) {
        throw DataError("malformed integer '" + std::string(s) + "'");
    }
    return out;
}

/// Linear-interpolated quantile of an unsorted sample, q in [0, 1].
inline double quantile(std::vector<double> xs, double q)
{
    if (xs.empty()) {
        return 0.0;
    }
    std::sort(xs.begin(), xs.end());
    const double pos = q * double(xs.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, xs.size() - 1);
    const double frac = pos - double(lo);
    return xs[lo] + frac * (xs[hi] - xs[lo]);
}

/// Median with an equal-tailed 95% interval.
struct Interval {
    double median = 0.0;
    double lo = 0.0;
    double hi = 0.0;
};

inline Interval summarize(const std::vector<double>& xs)
{
    return {quantile(xs, 0.5), quantile(xs, 0.025), quantile(xs, 0.975)};
}

inline double softplus(double x)
{
    return x > 30.0 ? x : std::log1p(std::exp(x));
}

inline double sigmoid(double x)
{
    return 1.0 / (1.0 + std::exp(-x));
}

inline std::size_t index_of_label(std::span<const std::string> labels, std::string_view label)
{
    auto it = std::find(labels.begin(), labels.end(), label);
    if (it == labels.end()) {
        throw DataError("unknown age group '" + std::string(label) + "'");
    }
    return static_cast<std::size_t>(it - labels.begin());
}

/// Lower age bound parsed from a label such as "30-39" or "90+".
inline int age_lower_bound(std::string_view label)
{
    int v = 0;
    std::from_chars(label.data(), label.data() + label.size(), v);
    return v;
}

} // namespace counterfact

#endif // COUNTERFACT_COMMON_HPP
