#include "toolwatch/svg.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

namespace toolwatch::svg {

namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 480.0;
constexpr double kMargin = 60.0;
constexpr std::array<const char*, kNumClasses> kClassColors = {"#2e8b57", "#e0a800", "#c0392b"};

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

struct Axis {
    double lo = 0.0, hi = 1.0;

    void include(double v) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    void pad() {
        if (hi <= lo) {
            lo -= 0.5;
            hi += 0.5;
        }
        const double m = 0.05 * (hi - lo);
        lo -= m;
        hi += m;
    }
};

Axis empty_axis() {
    return {std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
}

void header(std::ostringstream& out, const std::string& title) {
    out << std::setprecision(8);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
        << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\" "
        << "font-family=\"sans-serif\">" << escape(title) << "</text>\n";
}

void frame(std::ostringstream& out, const Axis& ax, const Axis& ay, const std::string& xl,
           const std::string& yl) {
    out << "<rect x=\"" << kMargin << "\" y=\"" << kMargin << "\" width=\"" << kWidth - 2 * kMargin
        << "\" height=\"" << kHeight - 2 * kMargin << "\" fill=\"none\" stroke=\"#444\"/>\n";
    out << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 15
        << "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\">" << escape(xl) << "</text>\n";
    out << "<text x=\"15\" y=\"" << kHeight / 2 << "\" transform=\"rotate(-90 15 " << kHeight / 2
        << ")\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\">" << escape(yl)
        << "</text>\n";
    auto tick = [&](double v) {
        std::ostringstream s;
        s << std::setprecision(3) << v;
        return s.str();
    };
    out << "<text x=\"" << kMargin << "\" y=\"" << kHeight - kMargin + 16
        << "\" font-size=\"10\" font-family=\"sans-serif\">" << tick(ax.lo) << "</text>\n";
    out << "<text x=\"" << kWidth - kMargin << "\" y=\"" << kHeight - kMargin + 16
        << "\" text-anchor=\"end\" font-size=\"10\" font-family=\"sans-serif\">" << tick(ax.hi) << "</text>\n";
    out << "<text x=\"" << kMargin - 4 << "\" y=\"" << kHeight - kMargin
        << "\" text-anchor=\"end\" font-size=\"10\" font-family=\"sans-serif\">" << tick(ay.lo) << "</text>\n";
    out << "<text x=\"" << kMargin - 4 << "\" y=\"" << kMargin + 8
        << "\" text-anchor=\"end\" font-size=\"10\" font-family=\"sans-serif\">" << tick(ay.hi) << "</text>\n";
}

double sx(const Axis& a, double v) { return kMargin + (v - a.lo) / (a.hi - a.lo) * (kWidth - 2 * kMargin); }
double sy(const Axis& a, double v) { return kHeight - kMargin - (v - a.lo) / (a.hi - a.lo) * (kHeight - 2 * kMargin); }

}  // namespace

std::string line_chart(const std::vector<LineSeries>& series, const std::string& title, const std::string& x_label,
                       const std::string& y_label) {
    Axis ax = empty_axis(), ay = empty_axis();
    for (const auto& s : series) {
        for (double v : s.x) ax.include(v);
        for (double v : s.y) ay.include(v);
    }
    if (!std::isfinite(ax.lo)) ax = {0, 1};
    if (!std::isfinite(ay.lo)) ay = {0, 1};
    ax.pad();
    ay.pad();

    static constexpr std::array<const char*, 4> palette = {"#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd"};
    std::ostringstream out;
    header(out, title);
    frame(out, ax, ay, x_label, y_label);
    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const char* color = palette[si % palette.size()];
        out << "<polyline class=\"series\" data-series=\"" << escape(s.name) << "\" fill=\"none\" stroke=\""
            << color << "\" stroke-width=\"2\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i) out << sx(ax, s.x[i]) << ',' << sy(ay, s.y[i]) << ' ';
        out << "\"/>\n";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            out << "<circle class=\"point\" data-series=\"" << escape(s.name) << "\" data-x=\"" << s.x[i]
                << "\" data-y=\"" << s.y[i] << "\" cx=\"" << sx(ax, s.x[i]) << "\" cy=\"" << sy(ay, s.y[i])
                << "\" r=\"3\" fill=\"" << color << "\"/>\n";
        }
        out << "<text x=\"" << kWidth - kMargin - 4 << "\" y=\"" << kMargin + 16 + 14 * static_cast<double>(si)
            << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\" fill=\"" << color << "\">"
            << escape(s.name) << "</text>\n";
    }
    out << "</svg>\n";
    return out.str();
}

std::string signed_bar_chart(const std::vector<std::string>& names, const std::vector<double>& values,
                             const std::string& title) {
    if (names.size() != values.size()) throw Error("bar chart: names and values differ in length");
    double extent = 0.0;
    for (double v : values) extent = std::max(extent, std::abs(v));
    if (extent == 0.0) extent = 1.0;

    std::ostringstream out;
    header(out, title);
    const double label_w = 150.0;
    const double center = label_w + (kWidth - label_w - 20.0) / 2.0;
    const double half = (kWidth - label_w - 20.0) / 2.0 - 10.0;
    const double row_h = names.empty() ? 0.0 : std::min(32.0, (kHeight - kMargin - 20.0) / static_cast<double>(names.size()));
    out << "<line x1=\"" << center << "\" y1=\"" << kMargin - 10 << "\" x2=\"" << center << "\" y2=\""
        << kHeight - 20 << "\" stroke=\"#444\"/>\n";
    for (std::size_t i = 0; i < names.size(); ++i) {
        const double v = values[i];
        const double len = std::abs(v) / extent * half;
        // Darker shade for stronger influence.
        const double strength = std::abs(v) / extent;
        const bool positive = v >= 0.0;
        const int tone = static_cast<int>(std::lround(210.0 - 110.0 * strength));
        std::ostringstream color;
        if (positive) {
            color << "rgb(30," << tone << ",60)";
        } else {
            color << "rgb(" << tone + 30 << ",30,40)";
        }
        const double y = kMargin + static_cast<double>(i) * row_h;
        out << "<text x=\"" << label_w - 6 << "\" y=\"" << y + row_h * 0.65
            << "\" text-anchor=\"end\" font-size=\"12\" font-family=\"sans-serif\">" << escape(names[i]) << "</text>\n";
        out << "<rect class=\"bar " << (positive ? "positive" : "negative") << "\" data-feature=\""
            << escape(names[i]) << "\" data-value=\"" << std::setprecision(17) << v << std::setprecision(8)
            << "\" x=\"" << (positive ? center : center - len) << "\" y=\"" << y + 2 << "\" width=\"" << len
            << "\" height=\"" << row_h - 4 << "\" fill=\"" << color.str() << "\"/>\n";
    }
    out << "</svg>\n";
    return out.str();
}

std::string neighbor_scatter(const explain::NeighborPlotData& data, const std::string& title) {
    Axis ax = empty_axis(), ay = empty_axis();
    for (const auto& p : data.training_points) {
        ax.include(p[0]);
        ay.include(p[1]);
    }
    for (const auto& p : data.query_points) {
        ax.include(p[0]);
        ay.include(p[1]);
    }
    if (!std::isfinite(ax.lo)) ax = {0, 1};
    if (!std::isfinite(ay.lo)) ay = {0, 1};
    ax.pad();
    ay.pad();

    std::ostringstream out;
    header(out, title);
    frame(out, ax, ay, "PC1", "PC2");
    for (std::size_t i = 0; i < data.training_points.size(); ++i) {
        const auto& p = data.training_points[i];
        const auto c = severity(data.training_labels[i]);
        out << "<circle class=\"train\" data-id=\"" << i << "\" data-label=\"" << c << "\" cx=\"" << sx(ax, p[0])
            << "\" cy=\"" << sy(ay, p[1]) << "\" r=\"2.5\" fill=\"" << kClassColors[c]
            << "\" fill-opacity=\"0.6\"/>\n";
    }
    for (const auto& s : data.segments) {
        out << "<line class=\"segment\" data-query=\"" << s.query << "\" data-target=\"" << s.training_index
            << "\" x1=\"" << sx(ax, s.from[0]) << "\" y1=\"" << sy(ay, s.from[1]) << "\" x2=\"" << sx(ax, s.to[0])
            << "\" y2=\"" << sy(ay, s.to[1]) << "\" stroke=\"#222\" stroke-width=\"1\"/>\n";
    }
    for (std::size_t q = 0; q < data.query_points.size(); ++q) {
        const double x = sx(ax, data.query_points[q][0]);
        const double y = sy(ay, data.query_points[q][1]);
        const auto c = severity(data.query_predictions[q]);
        out << "<path class=\"query\" data-id=\"" << q << "\" data-label=\"" << c << "\" d=\"M" << x - 6 << ' '
            << y - 6 << " L" << x + 6 << ' ' << y + 6 << " M" << x - 6 << ' ' << y + 6 << " L" << x + 6 << ' '
            << y - 6 << "\" stroke=\"" << kClassColors[c] << "\" stroke-width=\"3\"/>\n";
    }
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        out << "<text x=\"" << kWidth - kMargin - 4 << "\" y=\"" << kMargin + 16 + 14 * static_cast<double>(c)
            << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\" fill=\"" << kClassColors[c]
            << "\">" << display_name(static_cast<ToolCondition>(c)) << "</text>\n";
    }
    out << "</svg>\n";
    return out.str();
}

}  // namespace toolwatch::svg
