#include "lab/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "lab/errors.hpp"

namespace lab {

namespace {

constexpr int kWidth = 800;
constexpr int kHeight = 500;
constexpr int kMarginLeft = 70;
constexpr int kMarginRight = 160;
constexpr int kMarginTop = 40;
constexpr int kMarginBottom = 55;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", x);
    return buf;
}

std::string escape_xml(const std::string& s) {
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

struct AxisScale {
    double lo = 0.0, hi = 1.0;
    bool log = false;
    double to_unit(double v) const {
        double t = log ? std::log10(v) : v;
        double a = log ? std::log10(lo) : lo;
        double b = log ? std::log10(hi) : hi;
        if (b - a < 1e-300) return 0.5;
        return (t - a) / (b - a);
    }
};

std::vector<double> linear_ticks(double lo, double hi) {
    if (hi <= lo) return {lo};
    const double span = hi - lo;
    const double raw = span / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double mult : {1.0, 2.0, 5.0, 10.0}) {
        step = mult * mag;
        if (span / step <= 6.0) break;
    }
    std::vector<double> ticks;
    const double start = std::ceil(lo / step) * step;
    for (double t = start; t <= hi + 1e-12 * span; t += step) ticks.push_back(t);
    return ticks;
}

std::vector<double> decade_ticks(double lo, double hi) {
    std::vector<double> ticks;
    int k0 = static_cast<int>(std::ceil(std::log10(lo) - 1e-9));
    int k1 = static_cast<int>(std::floor(std::log10(hi) + 1e-9));
    for (int k = k0; k <= k1; ++k) ticks.push_back(std::pow(10.0, k));
    if (ticks.empty()) ticks.push_back(lo);
    return ticks;
}

}  // namespace

std::string render_svg_plot(const std::vector<SvgSeries>& series, const SvgAxes& axes) {
    if (series.empty()) throw DimensionError("svg plot: no series");
    double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
    double y_lo = x_lo, y_hi = -x_lo;
    for (const SvgSeries& s : series) {
        if (s.x.size() != s.y.size()) throw DimensionError("svg plot: x/y length mismatch in " + s.label);
        if (s.x.empty()) throw DimensionError("svg plot: empty series " + s.label);
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (axes.log_x && s.x[i] <= 0.0) throw DomainError("svg plot: log x-axis needs positive values");
            if (axes.log_y && s.y[i] <= 0.0) throw DomainError("svg plot: log y-axis needs positive values");
            x_lo = std::min(x_lo, s.x[i]);
            x_hi = std::max(x_hi, s.x[i]);
            y_lo = std::min(y_lo, s.y[i]);
            y_hi = std::max(y_hi, s.y[i]);
        }
    }
    if (x_hi == x_lo) x_hi = x_lo + (axes.log_x ? x_lo * 9.0 + 1.0 : 1.0);
    if (y_hi == y_lo) y_hi = y_lo + (axes.log_y ? y_lo * 9.0 + 1.0 : 1.0);
    if (!axes.log_y) {
        const double pad = 0.05 * (y_hi - y_lo);
        y_lo -= pad;
        y_hi += pad;
    }

    const AxisScale xs{x_lo, x_hi, axes.log_x};
    const AxisScale ys{y_lo, y_hi, axes.log_y};
    const int plot_w = kWidth - kMarginLeft - kMarginRight;
    const int plot_h = kHeight - kMarginTop - kMarginBottom;
    auto px = [&](double v) { return kMarginLeft + xs.to_unit(v) * plot_w; };
    auto py = [&](double v) { return kMarginTop + (1.0 - ys.to_unit(v)) * plot_h; };

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(kWidth) + "\" height=\"" +
           std::to_string(kHeight) + "\" viewBox=\"0 0 " + std::to_string(kWidth) + " " +
           std::to_string(kHeight) + "\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg += "<text x=\"" + std::to_string(kWidth / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" +
           escape_xml(axes.title) + "</text>\n";

    // frame
    svg += "<rect x=\"" + std::to_string(kMarginLeft) + "\" y=\"" + std::to_string(kMarginTop) + "\" width=\"" +
           std::to_string(plot_w) + "\" height=\"" + std::to_string(plot_h) +
           "\" fill=\"none\" stroke=\"#333\"/>\n";

    const std::vector<double> xticks = axes.log_x ? decade_ticks(x_lo, x_hi) : linear_ticks(x_lo, x_hi);
    for (double t : xticks) {
        const double x = px(t);
        svg += "<line x1=\"" + fmt(x) + "\" y1=\"" + std::to_string(kMarginTop + plot_h) + "\" x2=\"" + fmt(x) +
               "\" y2=\"" + std::to_string(kMarginTop + plot_h + 5) + "\" stroke=\"#333\"/>\n";
        svg += "<text x=\"" + fmt(x) + "\" y=\"" + std::to_string(kMarginTop + plot_h + 20) +
               "\" text-anchor=\"middle\" font-size=\"12\">" + fmt(t) + "</text>\n";
    }
    const std::vector<double> yticks = axes.log_y ? decade_ticks(y_lo, y_hi) : linear_ticks(y_lo, y_hi);
    for (double t : yticks) {
        const double y = py(t);
        svg += "<line x1=\"" + std::to_string(kMarginLeft - 5) + "\" y1=\"" + fmt(y) + "\" x2=\"" +
               std::to_string(kMarginLeft) + "\" y2=\"" + fmt(y) + "\" stroke=\"#333\"/>\n";
        svg += "<text x=\"" + std::to_string(kMarginLeft - 8) + "\" y=\"" + fmt(y + 4) +
               "\" text-anchor=\"end\" font-size=\"12\">" + fmt(t) + "</text>\n";
    }
    svg += "<text x=\"" + std::to_string(kMarginLeft + plot_w / 2) + "\" y=\"" + std::to_string(kHeight - 12) +
           "\" text-anchor=\"middle\" font-size=\"13\">" + escape_xml(axes.x_label) + "</text>\n";
    svg += "<text x=\"18\" y=\"" + std::to_string(kMarginTop + plot_h / 2) +
           "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 " +
           std::to_string(kMarginTop + plot_h / 2) + ")\">" + escape_xml(axes.y_label) + "</text>\n";

    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* color = kPalette[s % (sizeof(kPalette) / sizeof(kPalette[0]))];
        std::string points;
        for (std::size_t i = 0; i < series[s].x.size(); ++i) {
            points += fmt(px(series[s].x[i])) + "," + fmt(py(series[s].y[i])) + " ";
        }
        if (series[s].x.size() > 1) {
            svg += "<polyline fill=\"none\" stroke=\"";
            svg += color;
            svg += "\" stroke-width=\"1.5\" points=\"" + points + "\"/>\n";
        }
        for (std::size_t i = 0; i < series[s].x.size(); ++i) {
            svg += "<circle cx=\"" + fmt(px(series[s].x[i])) + "\" cy=\"" + fmt(py(series[s].y[i])) +
                   "\" r=\"2.5\" fill=\"";
            svg += color;
            svg += "\"/>\n";
        }
        // legend entry
        const int ly = kMarginTop + 10 + static_cast<int>(s) * 20;
        svg += "<line x1=\"" + std::to_string(kWidth - kMarginRight + 10) + "\" y1=\"" + std::to_string(ly) +
               "\" x2=\"" + std::to_string(kWidth - kMarginRight + 34) + "\" y2=\"" + std::to_string(ly) +
               "\" stroke=\"";
        svg += color;
        svg += "\" stroke-width=\"2\"/>\n";
        svg += "<text x=\"" + std::to_string(kWidth - kMarginRight + 40) + "\" y=\"" + std::to_string(ly + 4) +
               "\" font-size=\"12\">" + escape_xml(series[s].label) + "</text>\n";
    }
    svg += "</svg>\n";
    return svg;
}

void emit_svg_plot(const std::vector<SvgSeries>& series, const std::string& path, const SvgAxes& axes) {
    const std::string svg = render_svg_plot(series, axes);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f.write(svg.data(), static_cast<std::streamsize>(svg.size()));
    if (!f) throw IoError("write failed: " + path);
}

}  // namespace lab
