#ifndef COUNTERFACT_DATASET_IO_HPP
#define COUNTERFACT_DATASET_IO_HPP

#include "counterfact/common.hpp"
#include "counterfact/data.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace counterfact
{

namespace csv
{

struct Row {
    std::size_t line = 0;
    std::vector<std::string> fields;
};

struct Table {
    std::string path;
    std::vector<std::string> header;
    std::vector<Row> rows;

    std::string where(const Row& r) const { return path + ":" + std::to_string(r.line); }

    std::size_t column(const std::string& name) const
    {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) {
            throw DataError(path + ": missing column '" + name + "'");
        }
        return static_cast<std::size_t>(it - header.begin());
    }
};

inline std::vector<std::string> split(std::string_view line)
{
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (true) {
        const auto next = line.find(',', pos);
        std::string_view field = line.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos);
        while (!field.empty() && (field.front() == ' ' || field.front() == '"')) {
            field.remove_prefix(1);
        }
        while (!field.empty() && (field.back() == ' ' || field.back() == '"')) {
            field.remove_suffix(1);
        }
        out.emplace_back(field);
        if (next == std::string_view::npos) {
            break;
        }
        pos = next + 1;
    }
    return out;
}

inline Table read(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    Table t;
    t.path = path.string();
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (n == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
            line.erase(0, 3);
        }
        if (line.empty()) {
            continue;
        }
        if (t.header.empty()) {
            t.header = split(line);
            continue;
        }
        Row r{n, split(line)};
        if (r.fields.size() != t.header.size()) {
            throw DataError(t.path + ":" + std::to_string(n) + ": expected " + std::to_string(t.header.size()) +
                            " fields, found " + std::to_string(r.fields.size()));
        }
        t.rows.push_back(std::move(r));
    }
    if (t.header.empty()) {
        throw DataError(t.path + ": empty file");
    }
    return t;
}

/// Runs `f` and prefixes any DataError with the row location.
template <class F>
auto at(const Table& t, const Row& r, F&& f)
{
    try {
        return f();
    }
    catch (const DataError& e) {
        throw DataError(t.where(r) + ": " + e.what());
    }
}

} // namespace csv

namespace detail
{

inline std::size_t week_index(Date start, Date week, const std::string& where)
{
    const long d = days_between(start, week);
    if (d < 0 || d % kDaysPerWeek != 0) {
        throw DataError(where + ": week " + format_date(week) + " is not aligned to the window start " +
                        format_date(start));
    }
    return static_cast<std::size_t>(d / kDaysPerWeek);
}

} // namespace detail

/// Reads population.csv, cases.csv, severe.csv and vaccinations.csv from `dir`.
/// The window starts at the earliest week found in any file and ends at the latest.
/// Cells without a row are zero. Vaccination fractions and waning-time distributions
/// are derived from the dose counts.
inline ObservedDataset load_dataset(const std::filesystem::path& dir)
{
    const auto pop = csv::read(dir / "population.csv");
    const auto cases = csv::read(dir / "cases.csv");
    const auto severe = csv::read(dir / "severe.csv");
    const auto vacc = csv::read(dir / "vaccinations.csv");

    std::vector<AgeGroup> groups;
    {
        const auto cl = pop.column("age_label"), cp = pop.column("population");
        for (const auto& r : pop.rows) {
            csv::at(pop, r, [&] {
                groups.push_back({r.fields[cl], parse_double(r.fields[cp])});
                return 0;
            });
        }
    }
    if (cases.rows.empty()) {
        throw DataError(cases.path + ": no observations");
    }
    std::vector<std::string> labels;
    for (const auto& g : groups) {
        labels.push_back(g.label);
    }

    // Window bounds.
    std::optional<Date> first, last;
    for (const auto* t : {&cases, &severe, &vacc}) {
        const auto cw = t->column("week");
        for (const auto& r : t->rows) {
            const Date d = csv::at(*t, r, [&] { return parse_date(r.fields[cw]); });
            if (!first || d < *first) {
                first = d;
            }
            if (!last || d > *last) {
                last = d;
            }
        }
    }
    const long span = days_between(*first, *last);
    if (span % kDaysPerWeek != 0) {
        throw DataError("week dates are not spaced by whole weeks");
    }
    const int weeks = static_cast<int>(span / kDaysPerWeek) + 1;
    auto d = make_empty_dataset(*first, weeks, groups);

    auto age_of = [&](const csv::Table& t, const csv::Row& r, std::size_t col) {
        return csv::at(t, r, [&] { return index_of_label(labels, r.fields[col]); });
    };
    auto week_of = [&](const csv::Table& t, const csv::Row& r, std::size_t col) {
        return detail::week_index(d.start, parse_date(r.fields[col]), t.where(r));
    };
    auto status_of = [&](const csv::Table& t, const csv::Row& r, std::size_t col, long lo, long hi) {
        const long v = csv::at(t, r, [&] { return parse_int(r.fields[col]); });
        if (v < lo || v > hi) {
            throw DataError(t.where(r) + ": dose count " + std::to_string(v) + " out of range");
        }
        return static_cast<std::size_t>(v);
    };

    {
        const auto cw = cases.column("week"), ca = cases.column("age_label"), cc = cases.column("cases");
        for (const auto& r : cases.rows) {
            d.cases[age_of(cases, r, ca)][week_of(cases, r, cw)] =
                csv::at(cases, r, [&] { return parse_double(r.fields[cc]); });
        }
    }
    {
        const auto cw = severe.column("week"), ca = severe.column("age_label"), cv = severe.column("doses"),
                   cn = severe.column("severe_count"), cp = severe.column("stratum_population");
        for (const auto& r : severe.rows) {
            auto& cell = d.severe[status_of(severe, r, cv, 0, kDoses)][age_of(severe, r, ca)][week_of(severe, r, cw)];
            cell.count = csv::at(severe, r, [&] { return parse_double(r.fields[cn]); });
            cell.population = csv::at(severe, r, [&] { return parse_double(r.fields[cp]); });
        }
    }
    {
        const auto cw = vacc.column("week"), ca = vacc.column("age_label"), cd = vacc.column("dose_number"),
                   cn = vacc.column("count");
        for (const auto& r : vacc.rows) {
            d.dose_counts[age_of(vacc, r, ca)][status_of(vacc, r, cd, 1, kDoses) - 1][week_of(vacc, r, cw)] =
                csv::at(vacc, r, [&] { return parse_double(r.fields[cn]); });
        }
    }

    validate_dataset(d);
    try {
        derive_vaccination_tables(d);
    }
    catch (const InfeasibleError& e) {
        throw DataError(std::string("vaccination counts: ") + e.what());
    }
    validate_dataset(d);
    return d;
}

/// Writes the four CSV files; every cell gets a row so that loading reproduces the window exactly.
inline void save_dataset(const ObservedDataset& d, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    auto open = [&](const char* name) {
        std::ofstream out(dir / name);
        if (!out) {
            throw DataError("cannot write " + (dir / name).string());
        }
        return out;
    };
    {
        auto out = open("population.csv");
        out << "age_label,population\n";
        for (const auto& g : d.groups) {
            out << g.label << ',' << format_double(g.population) << '\n';
        }
    }
    {
        auto out = open("cases.csv");
        out << "week,age_label,cases\n";
        for (int t = 1; t <= d.weeks; ++t) {
            for (std::size_t a = 0; a < d.groups.size(); ++a) {
                out << format_date(d.week_start(t)) << ',' << d.groups[a].label << ','
                    << format_double(d.cases[a][static_cast<std::size_t>(t - 1)]) << '\n';
            }
        }
    }
    {
        auto out = open("severe.csv");
        out << "week,age_label,doses,severe_count,stratum_population\n";
        for (int t = 1; t <= d.weeks; ++t) {
            for (std::size_t a = 0; a < d.groups.size(); ++a) {
                for (std::size_t v = 0; v < kStatuses; ++v) {
                    const auto& c = d.severe[v][a][static_cast<std::size_t>(t - 1)];
                    out << format_date(d.week_start(t)) << ',' << d.groups[a].label << ',' << v << ','
                        << format_double(c.count) << ',' << format_double(c.population) << '\n';
                }
            }
        }
    }
    {
        auto out = open("vaccinations.csv");
        out << "week,age_label,dose_number,count\n";
        for (int t = 1; t <= d.weeks; ++t) {
            for (std::size_t a = 0; a < d.groups.size(); ++a) {
                for (std::size_t v = 0; v < kDoses; ++v) {
                    out << format_date(d.week_start(t)) << ',' << d.groups[a].label << ',' << v + 1 << ','
                        << format_double(d.dose_counts[a][v][static_cast<std::size_t>(t - 1)]) << '\n';
                }
            }
        }
    }
}

} // namespace counterfact

#endif // COUNTERFACT_DATASET_IO_HPP
