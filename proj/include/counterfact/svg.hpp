#ifndef COUNTERFACT_SVG_HPP
#define COUNTERFACT_SVG_HPP

#include "counterfact/common.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace counterfact::svg
{

namespace detail
{
inline constexpr std::array<const char*, 8> kPalette = {"#4477aa", "#ee6677", "#228833", "#ccbb44",
                                                        "#66ccee", "#aa3377", "#bbbbbb", "#000000"};

inline std::string num(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", x);
    return buf;
}

inline std::string escape(const std::string& s)
{
    std::string out;
    for (char c : s) {
        switch (c) {
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '&': out += "&amp;"; break;
        default: out += c;
        }
    }
    return out;
}

inline double nice_ceiling(double x)
{
    if (!(x > 0.0)) {
        return 1.0;
    }
    const double p = std::pow(10.0, std::floor(std::log10(x)));
    for (double m : {1.0, 2.0, 2.5, 5.0, 10.0}) {
        if (m * p >= x) {
            return m * p;
        }
    }
    return 10.0 * p;
}

struct Frame {
    double width = 720, height = 360, left = 70, right = 160, top = 40, bottom = 60;
    double plot_w() const { return width - left - right; }
    double plot_h() const { return height - top - bottom; }
};

inline void axes(std::ostringstream& o, const Frame& f, double ymax, const std::string& title, const std::string& ylabel)
{
    o << "<text x=\"" << num(f.width / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
      << "</text>\n";
    for (int i = 0; i <= 5; ++i) {
        const double v = ymax * i / 5.0;
        const double y = f.top + f.plot_h() * (1.0 - i / 5.0);
        o << "<line x1=\"" << num(f.left) << "\" x2=\"" << num(f.left + f.plot_w()) << "\" y1=\"" << num(y)
          << "\" y2=\"" << num(y) << "\" stroke=\"#e0e0e0\"/>\n";
        o << "<text x=\"" << num(f.left - 6) << "\" y=\"" << num(y + 4) << "\" text-anchor=\"end\" font-size=\"11\">"
          << format_double(v) << "</text>\n";
    }
    o << "<text transform=\"translate(16," << num(f.top + f.plot_h() / 2) << ") rotate(-90)\" text-anchor=\"middle\" "
      << "font-size=\"12\">" << escape(ylabel) << "</text>\n";
    o << "<line x1=\"" << num(f.left) << "\" x2=\"" << num(f.left) << "\" y1=\"" << num(f.top) << "\" y2=\""
      << num(f.top + f.plot_h()) << "\" stroke=\"black\"/>\n";
    o << "<line x1=\"" << num(f.left) << "\" x2=\"" << num(f.left + f.plot_w()) << "\" y1=\"" << num(f.top + f.plot_h())
      << "\" y2=\"" << num(f.top + f.plot_h()) << "\" stroke=\"black\"/>\n";
}

inline void legend(std::ostringstream& o, const Frame& f, const std::vector<std::string>& series)
{
    for (std::size_t s = 0; s < series.size(); ++s) {
        const double y = f.top + 18.0 * double(s);
        o << "<rect x=\"" << num(f.width - f.right + 12) << "\" y=\"" << num(y) << "\" width=\"12\" height=\"12\" fill=\""
          << kPalette[s % kPalette.size()] << "\"/>\n";
        o << "<text x=\"" << num(f.width - f.right + 30) << "\" y=\"" << num(y + 10) << "\" font-size=\"11\">"
          << escape(series[s]) << "</text>\n";
    }
}

inline std::string open(const Frame& f)
{
    return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(f.width) + "\" height=\"" + num(f.height) +
           "\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}
} // namespace detail

/// values[group][series] with median bars and 95% whiskers.
struct BarChart {
    std::string title;
    std::string ylabel;
    std::vector<std::string> groups;
    std::vector<std::string> series;
    std::vector<std::vector<Interval>> values;
};

inline std::string render(const BarChart& c)
{
    detail::Frame f;
    f.width = std::max(720.0, 120.0 + 40.0 * double(c.groups.size() * std::max<std::size_t>(1, c.series.size())));
    double ymax = 0.0;
    for (const auto& g : c.values) {
        for (const auto& v : g) {
            ymax = std::max({ymax, v.hi, v.median});
        }
    }
    ymax = detail::nice_ceiling(ymax);
    const double ymin = 0.0;
    std::ostringstream o;
    o << detail::open(f);
    detail::axes(o, f, ymax, c.title, c.ylabel);
    auto y_of = [&](double v) { return f.top + f.plot_h() * (1.0 - (std::max(v, ymin) - ymin) / (ymax - ymin)); };
    const double slot = f.plot_w() / double(std::max<std::size_t>(1, c.groups.size()));
    const double bar = slot * 0.8 / double(std::max<std::size_t>(1, c.series.size()));
    for (std::size_t g = 0; g < c.groups.size(); ++g) {
        const double x0 = f.left + slot * double(g) + slot * 0.1;
        for (std::size_t s = 0; s < c.series.size() && s < c.values[g].size(); ++s) {
            const auto& v = c.values[g][s];
            const double x = x0 + bar * double(s);
            o << "<rect x=\"" << detail::num(x) << "\" y=\"" << detail::num(y_of(v.median)) << "\" width=\""
              << detail::num(bar * 0.9) << "\" height=\"" << detail::num(y_of(0.0) - y_of(v.median)) << "\" fill=\""
              << detail::kPalette[s % detail::kPalette.size()] << "\"/>\n";
            const double xm = x + bar * 0.45;
            o << "<line x1=\"" << detail::num(xm) << "\" x2=\"" << detail::num(xm) << "\" y1=\"" << detail::num(y_of(v.lo))
              << "\" y2=\"" << detail::num(y_of(v.hi)) << "\" stroke=\"black\"/>\n";
        }
        o << "<text x=\"" << detail::num(f.left + slot * (double(g) + 0.5)) << "\" y=\""
          << detail::num(f.top + f.plot_h() + 18) << "\" text-anchor=\"middle\" font-size=\"11\">"
          << detail::escape(c.groups[g]) << "</text>\n";
    }
    detail::legend(o, f, c.series);
    o << "</svg>\n";
    return o.str();
}

/// Weekly medians as lines with a shaded 95% band; values[series][x].
struct LineChart {
    std::string title;
    std::string ylabel;
    std::vector<std::string> series;
    std::vector<std::vector<Interval>> values;
    /// Label under the first and last x position.
    std::string first_label, last_label;
};

inline std::string render(const LineChart& c)
{
    detail::Frame f;
    double ymax = 0.0;
    std::size_t n = 0;
    for (const auto& s : c.values) {
        n = std::max(n, s.size());
        for (const auto& v : s) {
            ymax = std::max({ymax, v.hi, v.median});
        }
    }
    ymax = detail::nice_ceiling(ymax);
    std::ostringstream o;
    o << detail::open(f);
    detail::axes(o, f, ymax, c.title, c.ylabel);
    auto x_of = [&](std::size_t i) { return f.left + f.plot_w() * (n > 1 ? double(i) / double(n - 1) : 0.5); };
    auto y_of = [&](double v) { return f.top + f.plot_h() * (1.0 - std::max(v, 0.0) / ymax); };
    for (std::size_t s = 0; s < c.values.size(); ++s) {
        const auto& vs = c.values[s];
        const char* col = detail::kPalette[s % detail::kPalette.size()];
        std::string band, line;
        for (std::size_t i = 0; i < vs.size(); ++i) {
            band += detail::num(x_of(i)) + "," + detail::num(y_of(vs[i].hi)) + " ";
            line += detail::num(x_of(i)) + "," + detail::num(y_of(vs[i].median)) + " ";
        }
        for (std::size_t i = vs.size(); i-- > 0;) {
            band += detail::num(x_of(i)) + "," + detail::num(y_of(vs[i].lo)) + " ";
        }
        o << "<polygon points=\"" << band << "\" fill=\"" << col << "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
        o << "<polyline points=\"" << line << "\" fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.5\"/>\n";
    }
    const double yb = f.top + f.plot_h() + 18;
    o << "<text x=\"" << detail::num(f.left) << "\" y=\"" << detail::num(yb) << "\" font-size=\"11\">"
      << detail::escape(c.first_label) << "</text>\n";
    o << "<text x=\"" << detail::num(f.left + f.plot_w()) << "\" y=\"" << detail::num(yb)
      << "\" text-anchor=\"end\" font-size=\"11\">" << detail::escape(c.last_label) << "</text>\n";
    detail::legend(o, f, c.series);
    o << "</svg>\n";
    return o.str();
}

inline void save(const std::string& content, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out) {
        throw DataError("cannot write " + path.string());
    }
    out << content;
}

} // namespace counterfact::svg

#endif // COUNTERFACT_SVG_HPP
