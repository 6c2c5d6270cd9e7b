/**
 * @file svg_plot.hpp
 * @brief Static SVG charts: density curves per group and vincentile lines.
 *
 * Output is a pure function of the input; coordinates are printed with two
 * decimals so files are byte-stable.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "gazeskill/density.hpp"
#include "gazeskill/error.hpp"

namespace gazeskill {

namespace svg {

inline constexpr double kWidth = 800.0;
inline constexpr double kHeight = 500.0;
inline constexpr double kLeft = 80.0;
inline constexpr double kRight = 30.0;
inline constexpr double kTop = 40.0;
inline constexpr double kBottom = 60.0;

inline const char* const kPalette[] = {"#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02"};

inline double nice_step(double range, int target_ticks = 5) {
    if (!(range > 0.0)) return 1.0;
    const double raw = range / target_ticks;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double f = raw / mag;
    const double nice = f < 1.5 ? 1.0 : f < 3.0 ? 2.0 : f < 7.0 ? 5.0 : 10.0;
    return nice * mag;
}

inline std::string escape(const std::string& s) {
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

struct Frame {
    double x_min, x_max, y_min, y_max;

    double px(double x) const { return kLeft + (x - x_min) / (x_max - x_min) * (kWidth - kLeft - kRight); }
    double py(double y) const { return kHeight - kBottom - (y - y_min) / (y_max - y_min) * (kHeight - kTop - kBottom); }
};

inline std::string header(const std::string& title) {
    return fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {:.0f} {:.0f}\" width=\"{:.0f}\" height=\"{:.0f}\" "
        "font-family=\"sans-serif\" font-size=\"12\">\n"
        "<rect x=\"0\" y=\"0\" width=\"{:.0f}\" height=\"{:.0f}\" fill=\"white\"/>\n"
        "<text x=\"{:.2f}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
        kWidth, kHeight, kWidth, kHeight, kWidth, kHeight, kWidth / 2.0, escape(title));
}

/// Axes with tick labels; `x_ticks` overrides the automatic x ticks.
inline std::string axes(const Frame& f, const std::string& x_label, const std::string& y_label, double y_step,
                        int y_decimals, const std::vector<std::pair<double, std::string>>& x_ticks) {
    std::string s;
    const double x0 = f.px(f.x_min), x1 = f.px(f.x_max), y0 = f.py(f.y_min), y1 = f.py(f.y_max);
    s += fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"black\"/>\n", x0, y0, x1, y0);
    s += fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"black\"/>\n", x0, y0, x0, y1);
    for (const auto& [v, label] : x_ticks) {
        const double x = f.px(v);
        s += fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"black\"/>\n", x, y0, x, y0 + 5);
        s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\">{}</text>\n", x, y0 + 18, label);
    }
    for (int i = 0;; ++i) {
        const double v = f.y_min + i * y_step;
        if (v > f.y_max + 1e-9 * y_step) break;
        const double y = f.py(v);
        s += fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"black\"/>\n", x0 - 5, y, x0, y);
        s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"end\">{:.{}f}</text>\n", x0 - 8, y + 4, v, y_decimals);
    }
    s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\">{}</text>\n", (x0 + x1) / 2.0, kHeight - 15,
                     escape(x_label));
    s += fmt::format("<text x=\"18\" y=\"{:.2f}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {:.2f})\">{}</text>\n",
                     (y0 + y1) / 2.0, (y0 + y1) / 2.0, escape(y_label));
    return s;
}

inline std::string legend(const std::vector<std::string>& names) {
    std::string s;
    for (std::size_t i = 0; i < names.size(); ++i) {
        const double y = kTop + 10 + 18.0 * static_cast<double>(i);
        const char* color = kPalette[i % std::size(kPalette)];
        s += fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"{}\" stroke-width=\"2\"/>\n",
                         kWidth - 170, y, kWidth - 145, y, color);
        s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\">{}</text>\n", kWidth - 138, y + 4, escape(names[i]));
    }
    return s;
}

// triangle, diamond, circle, square, ...
inline std::string marker(std::size_t kind, double x, double y, const char* color) {
    switch (kind % 4) {
    case 0:
        return fmt::format("<polygon points=\"{:.2f},{:.2f} {:.2f},{:.2f} {:.2f},{:.2f}\" fill=\"{}\"/>\n", x, y - 6, x - 6,
                           y + 5, x + 6, y + 5, color);
    case 1:
        return fmt::format("<polygon points=\"{:.2f},{:.2f} {:.2f},{:.2f} {:.2f},{:.2f} {:.2f},{:.2f}\" fill=\"{}\"/>\n", x,
                           y - 7, x + 6, y, x, y + 7, x - 6, y, color);
    case 2: return fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"5\" fill=\"{}\"/>\n", x, y, color);
    default: return fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"10\" height=\"10\" fill=\"{}\"/>\n", x - 5, y - 5, color);
    }
}

}  // namespace svg

/// One density curve per named group. The x axis is cut at `x_max_ms`.
inline std::string density_svg(const std::vector<std::pair<std::string, DensityEstimate>>& curves,
                               const std::string& title = "Fixation duration density", double x_max_ms = 1500.0) {
    if (curves.empty()) throw Error(Errc::InvalidArgument, "density plot needs at least one curve");
    double y_max = 0.0, x_max = 0.0;
    for (const auto& [name, est] : curves) {
        for (std::size_t i = 0; i < est.grid_ms.size() && est.grid_ms[i] <= x_max_ms; ++i) {
            y_max = std::max(y_max, est.density[i]);
            x_max = std::max(x_max, est.grid_ms[i]);
        }
    }
    if (!(x_max > 0.0)) x_max = x_max_ms;
    const double x_step = svg::nice_step(x_max);
    x_max = std::ceil(x_max / x_step) * x_step;
    // plot density per 1000 ms so tick labels stay readable
    const double scale = 1000.0;
    double y_top = y_max * scale;
    const double y_step = svg::nice_step(y_top > 0.0 ? y_top : 1.0);
    y_top = std::max(y_step, std::ceil(y_top / y_step) * y_step);
    const svg::Frame f{0.0, x_max, 0.0, y_top};

    std::vector<std::pair<double, std::string>> x_ticks;
    for (double v = 0.0; v <= x_max + 1e-9; v += x_step) x_ticks.emplace_back(v, fmt::format("{:.0f}", v));
    const int y_dec = y_step >= 1.0 ? 0 : static_cast<int>(std::ceil(-std::log10(y_step)));

    std::string s = svg::header(title);
    s += svg::axes(f, "Fixation duration (ms)", "Density (per 1000 ms)", y_step, y_dec, x_ticks);
    std::vector<std::string> names;
    for (std::size_t c = 0; c < curves.size(); ++c) {
        const auto& [name, est] = curves[c];
        names.push_back(name);
        s += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"2\" points=\"",
                         svg::kPalette[c % std::size(svg::kPalette)]);
        for (std::size_t i = 0; i < est.grid_ms.size() && est.grid_ms[i] <= x_max; ++i)
            s += fmt::format("{}{:.2f},{:.2f}", i ? " " : "", f.px(est.grid_ms[i]), f.py(est.density[i] * scale));
        s += "\"/>\n";
    }
    s += svg::legend(names);
    s += "</svg>\n";
    return s;
}

/// Mean duration per vincentile bin, one line per named group.
inline std::string vincentile_svg(const std::vector<std::pair<std::string, std::vector<double>>>& lines,
                                  const std::string& title = "Mean fixation duration per vincentile") {
    if (lines.empty() || lines.front().second.empty()) throw Error(Errc::InvalidArgument, "vincentile plot needs data");
    const std::size_t k = lines.front().second.size();
    double y_max = 0.0;
    for (const auto& [name, v] : lines) {
        if (v.size() != k) throw Error(Errc::InvalidArgument, "vincentile lines differ in length");
        for (double x : v) y_max = std::max(y_max, x);
    }
    const double y_step = svg::nice_step(y_max > 0.0 ? y_max : 1.0);
    const double y_top = std::max(y_step, std::ceil(y_max / y_step) * y_step);
    const svg::Frame f{0.5, static_cast<double>(k) + 0.5, 0.0, y_top};

    std::vector<std::pair<double, std::string>> x_ticks;
    for (std::size_t b = 1; b <= k; ++b) x_ticks.emplace_back(static_cast<double>(b), fmt::format("{}", b));

    std::string s = svg::header(title);
    s += svg::axes(f, "Vincentile bin", "Mean fixation duration (ms)", y_step, 0, x_ticks);
    std::vector<std::string> names;
    for (std::size_t c = 0; c < lines.size(); ++c) {
        const auto& [name, v] = lines[c];
        names.push_back(name);
        const char* color = svg::kPalette[c % std::size(svg::kPalette)];
        s += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"2\" points=\"", color);
        for (std::size_t b = 0; b < k; ++b)
            s += fmt::format("{}{:.2f},{:.2f}", b ? " " : "", f.px(static_cast<double>(b + 1)), f.py(v[b]));
        s += "\"/>\n";
        for (std::size_t b = 0; b < k; ++b) s += svg::marker(c, f.px(static_cast<double>(b + 1)), f.py(v[b]), color);
    }
    s += svg::legend(names);
    s += "</svg>\n";
    return s;
}

}  // namespace gazeskill
