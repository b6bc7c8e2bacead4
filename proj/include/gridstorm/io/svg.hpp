#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace gridstorm {

struct PlotSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

/// Horizontal reference line, e.g. a detection threshold.
struct PlotLine {
    std::string label;
    double y = 0.0;
};

/// Shaded horizontal band, e.g. the safe frequency region.
struct PlotBand {
    std::string label;
    double lo = 0.0;
    double hi = 0.0;
};

/// Vertical marker, e.g. the first detection step.
struct PlotMarker {
    std::string label;
    double x = 0.0;
};

struct Plot {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<PlotSeries> series;
    std::vector<PlotLine> lines;
    std::vector<PlotBand> bands;
    std::vector<PlotMarker> markers;
};

namespace detail {

inline std::string svg_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string svg_tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

inline std::string svg_escape(const std::string& s) {
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

inline const char* palette(std::size_t i) {
    static const char* colors[] = {"#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"};
    return colors[i % (sizeof colors / sizeof colors[0])];
}

}  // namespace detail

/// Writes a self-contained SVG line chart. Output depends only on the plot
/// contents, so identical inputs give identical bytes.
inline void write_svg(std::ostream& out, const Plot& p) {
    constexpr double W = 800, H = 480, L = 80, R = 190, T = 40, B = 60;
    const double pw = W - L - R, ph = H - T - B;

    double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    bool have = false;
    auto take = [&](double x, double y) {
        if (!std::isfinite(x) || !std::isfinite(y)) return;
        if (!have) {
            x0 = x1 = x;
            y0 = y1 = y;
            have = true;
        }
        x0 = std::min(x0, x);
        x1 = std::max(x1, x);
        y0 = std::min(y0, y);
        y1 = std::max(y1, y);
    };
    for (const auto& s : p.series)
        for (std::size_t k = 0; k < std::min(s.x.size(), s.y.size()); ++k) take(s.x[k], s.y[k]);
    for (const auto& l : p.lines) take(have ? x0 : 0.0, l.y);
    for (const auto& b : p.bands) {
        take(have ? x0 : 0.0, b.lo);
        take(have ? x0 : 0.0, b.hi);
    }
    if (x1 <= x0) x1 = x0 + 1;
    if (y1 <= y0) {
        y0 -= 0.5;
        y1 += 0.5;
    }
    const double pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;
    auto sx = [&](double x) { return L + (x - x0) / (x1 - x0) * pw; };
    auto sy = [&](double y) { return T + (y1 - y) / (y1 - y0) * ph; };
    using detail::svg_num;

    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
        << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    out << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
    out << "<text x=\"" << svg_num(L + pw / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
        << detail::svg_escape(p.title) << "</text>\n";

    for (const auto& b : p.bands) {
        const double top = sy(std::min(b.hi, y1)), bot = sy(std::max(b.lo, y0));
        out << "<rect x=\"" << svg_num(L) << "\" y=\"" << svg_num(top) << "\" width=\"" << svg_num(pw)
            << "\" height=\"" << svg_num(std::max(0.0, bot - top)) << "\" fill=\"#d8f0d8\" opacity=\"0.6\"/>\n";
    }

    // Axes and ticks.
    out << "<rect x=\"" << svg_num(L) << "\" y=\"" << svg_num(T) << "\" width=\"" << svg_num(pw) << "\" height=\""
        << svg_num(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 5; ++t) {
        const double xv = x0 + (x1 - x0) * t / 5.0, yv = y0 + (y1 - y0) * t / 5.0;
        out << "<line x1=\"" << svg_num(sx(xv)) << "\" y1=\"" << svg_num(T + ph) << "\" x2=\"" << svg_num(sx(xv))
            << "\" y2=\"" << svg_num(T + ph + 5) << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << svg_num(sx(xv)) << "\" y=\"" << svg_num(T + ph + 18) << "\" text-anchor=\"middle\">"
            << detail::svg_tick(xv) << "</text>\n";
        out << "<line x1=\"" << svg_num(L - 5) << "\" y1=\"" << svg_num(sy(yv)) << "\" x2=\"" << svg_num(L)
            << "\" y2=\"" << svg_num(sy(yv)) << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << svg_num(L - 8) << "\" y=\"" << svg_num(sy(yv) + 4) << "\" text-anchor=\"end\">"
            << detail::svg_tick(yv) << "</text>\n";
    }
    out << "<text x=\"" << svg_num(L + pw / 2) << "\" y=\"" << svg_num(H - 15) << "\" text-anchor=\"middle\">"
        << detail::svg_escape(p.x_label) << "</text>\n";
    out << "<text x=\"18\" y=\"" << svg_num(T + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
        << svg_num(T + ph / 2) << ")\">" << detail::svg_escape(p.y_label) << "</text>\n";

    for (const auto& l : p.lines) {
        if (l.y < y0 || l.y > y1) continue;
        out << "<line x1=\"" << svg_num(L) << "\" y1=\"" << svg_num(sy(l.y)) << "\" x2=\"" << svg_num(L + pw)
            << "\" y2=\"" << svg_num(sy(l.y)) << "\" stroke=\"#d62728\" stroke-dasharray=\"6 4\"/>\n";
    }
    for (const auto& m : p.markers) {
        if (m.x < x0 || m.x > x1) continue;
        out << "<line x1=\"" << svg_num(sx(m.x)) << "\" y1=\"" << svg_num(T) << "\" x2=\"" << svg_num(sx(m.x))
            << "\" y2=\"" << svg_num(T + ph) << "\" stroke=\"#7f7f7f\" stroke-dasharray=\"2 3\"/>\n";
    }

    for (std::size_t s = 0; s < p.series.size(); ++s) {
        const auto& ser = p.series[s];
        out << "<polyline fill=\"none\" stroke=\"" << detail::palette(s) << "\" stroke-width=\"1.5\" points=\"";
        bool first = true;
        for (std::size_t k = 0; k < std::min(ser.x.size(), ser.y.size()); ++k) {
            if (!std::isfinite(ser.x[k]) || !std::isfinite(ser.y[k])) continue;
            if (!first) out << ' ';
            out << svg_num(sx(ser.x[k])) << ',' << svg_num(sy(std::clamp(ser.y[k], y0, y1)));
            first = false;
        }
        out << "\"/>\n";
    }

    // Legend.
    double ly = T + 10;
    auto legend = [&](const std::string& label, const std::string& swatch) {
        out << swatch << "<text x=\"" << svg_num(W - R + 40) << "\" y=\"" << svg_num(ly + 4) << "\">"
            << detail::svg_escape(label) << "</text>\n";
        ly += 18;
    };
    const double lx = W - R + 12;
    for (std::size_t s = 0; s < p.series.size(); ++s)
        legend(p.series[s].label, "<line x1=\"" + svg_num(lx) + "\" y1=\"" + svg_num(ly) + "\" x2=\"" +
                                      svg_num(lx + 22) + "\" y2=\"" + svg_num(ly) + "\" stroke=\"" +
                                      detail::palette(s) + "\" stroke-width=\"2\"/>");
    for (const auto& l : p.lines)
        legend(l.label, "<line x1=\"" + svg_num(lx) + "\" y1=\"" + svg_num(ly) + "\" x2=\"" + svg_num(lx + 22) +
                            "\" y2=\"" + svg_num(ly) + "\" stroke=\"#d62728\" stroke-dasharray=\"6 4\"/>");
    for (const auto& b : p.bands)
        legend(b.label, "<rect x=\"" + svg_num(lx) + "\" y=\"" + svg_num(ly - 6) +
                            "\" width=\"22\" height=\"12\" fill=\"#d8f0d8\"/>");
    for (const auto& m : p.markers)
        legend(m.label, "<line x1=\"" + svg_num(lx + 11) + "\" y1=\"" + svg_num(ly - 7) + "\" x2=\"" +
                            svg_num(lx + 11) + "\" y2=\"" + svg_num(ly + 7) +
                            "\" stroke=\"#7f7f7f\" stroke-dasharray=\"2 3\"/>");
    out << "</svg>\n";
}

}  // namespace gridstorm
