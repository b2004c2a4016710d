// SPDX-License-Identifier: Apache-2.0
#include "predres/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace predres {

namespace {

constexpr double kWidth = 800.0;
constexpr double kHeight = 500.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 20.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 60.0;

std::string fixed(double value)
{
    char buffer[64];
    std::snprintf(buffer, sizeof buffer, "%.2f", value);
    return buffer;
}

std::string escape(const std::string& text)
{
    std::string out;
    for (char c : text) {
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

struct Range
{
    double lo = 0.0;
    double hi = 1.0;

    void widen()
    {
        if (!(hi > lo)) {
            lo -= 0.5;
            hi += 0.5;
        }
    }
};

class Frame
{
  public:
    Frame(Range x, Range y) : x_(x), y_(y)
    {
        x_.widen();
        y_.widen();
    }

    double px(double x) const { return kLeft + (x - x_.lo) / (x_.hi - x_.lo) * (kWidth - kLeft - kRight); }
    double py(double y) const { return kHeight - kBottom - (y - y_.lo) / (y_.hi - y_.lo) * (kHeight - kTop - kBottom); }

    void open(std::ostream& out, const std::string& title, const std::string& x_label,
              const std::string& y_label) const
    {
        out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
            << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << kWidth << "\" height=\""
            << kHeight << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n"
            << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
            << "<text x=\"" << fixed(kWidth / 2) << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
            << "font-size=\"16\">" << escape(title) << "</text>\n";
        // Axes.
        out << "<line x1=\"" << fixed(kLeft) << "\" y1=\"" << fixed(kHeight - kBottom) << "\" x2=\""
            << fixed(kWidth - kRight) << "\" y2=\"" << fixed(kHeight - kBottom) << "\" stroke=\"black\"/>\n"
            << "<line x1=\"" << fixed(kLeft) << "\" y1=\"" << fixed(kTop) << "\" x2=\"" << fixed(kLeft) << "\" y2=\""
            << fixed(kHeight - kBottom) << "\" stroke=\"black\"/>\n";
        for (int i = 0; i <= 4; ++i) {
            const double fx = x_.lo + (x_.hi - x_.lo) * i / 4.0;
            const double fy = y_.lo + (y_.hi - y_.lo) * i / 4.0;
            out << "<text x=\"" << fixed(px(fx)) << "\" y=\"" << fixed(kHeight - kBottom + 18)
                << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << format_tick(fx)
                << "</text>\n"
                << "<text x=\"" << fixed(kLeft - 6) << "\" y=\"" << fixed(py(fy) + 4)
                << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << format_tick(fy)
                << "</text>\n";
        }
        out << "<text x=\"" << fixed((kLeft + kWidth - kRight) / 2) << "\" y=\"" << fixed(kHeight - 15)
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" << escape(x_label)
            << "</text>\n"
            << "<text x=\"16\" y=\"" << fixed((kTop + kHeight - kBottom) / 2)
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" transform=\"rotate(-90 16 "
            << fixed((kTop + kHeight - kBottom) / 2) << ")\">" << escape(y_label) << "</text>\n";
    }

    static void close(std::ostream& out) { out << "</svg>\n"; }

  private:
    static std::string format_tick(double value)
    {
        char buffer[32];
        std::snprintf(buffer, sizeof buffer, "%.3g", value);
        return buffer;
    }

    Range x_;
    Range y_;
};

// Deterministic offset in [-1, 1] per trial.
double unit_jitter(std::size_t trial_index)
{
    std::uint64_t state = trial_index * 0x2545F4914F6CDD1Dull + 1;
    const std::uint64_t bits = splitmix64_next(state);
    return static_cast<double>(bits >> 11) * 0x1.0p-53 * 2.0 - 1.0;
}

} // namespace

std::string format_number(double value)
{
    if (std::isnan(value)) {
        return "nan";
    }
    if (std::isinf(value)) {
        return value > 0 ? "inf" : "-inf";
    }
    char buffer[64];
    const auto result = std::to_chars(buffer, buffer + sizeof buffer, value);
    return std::string(buffer, result.ptr);
}

void emit_convergence_svg(std::span<const TrialTrace> traces, const ConvergenceSvgOptions& options,
                          std::ostream& out)
{
    auto value_at = [&](const TrialTrace& trace, std::size_t i) {
        if (options.plot_summary) {
            return trace.summary_path[i];
        }
        return static_cast<double>(trace.selected_path[i]) + options.jitter * unit_jitter(trace.trial_index);
    };

    Range x{std::numeric_limits<double>::max(), std::numeric_limits<double>::lowest()};
    Range y = x;
    for (const TrialTrace& trace : traces) {
        if (trace.aborted) {
            continue;
        }
        for (std::size_t i = 0; i < trace.steps.size(); ++i) {
            x.lo = std::min(x.lo, static_cast<double>(trace.steps[i]));
            x.hi = std::max(x.hi, static_cast<double>(trace.steps[i]));
            y.lo = std::min(y.lo, value_at(trace, i));
            y.hi = std::max(y.hi, value_at(trace, i));
        }
    }
    if (x.lo > x.hi) {
        x = {0.0, 1.0};
        y = {0.0, 1.0};
    }
    if (options.marker_step) {
        x.hi = std::max(x.hi, static_cast<double>(*options.marker_step));
    }
    const Frame frame(x, y);
    frame.open(out, options.title, options.x_label, options.y_label);
    for (const TrialTrace& trace : traces) {
        if (trace.aborted || trace.steps.empty()) {
            continue;
        }
        out << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-opacity=\"0.4\" stroke-width=\"1\" points=\"";
        for (std::size_t i = 0; i < trace.steps.size(); ++i) {
            if (i > 0) {
                out << ' ';
            }
            out << fixed(frame.px(static_cast<double>(trace.steps[i]))) << ',' << fixed(frame.py(value_at(trace, i)));
        }
        out << "\"/>\n";
    }
    if (options.marker_step) {
        const double mx = frame.px(static_cast<double>(*options.marker_step));
        out << "<line x1=\"" << fixed(mx) << "\" y1=\"" << fixed(kTop) << "\" x2=\"" << fixed(mx) << "\" y2=\""
            << fixed(kHeight - kBottom) << "\" stroke=\"black\" stroke-dasharray=\"6,4\"/>\n";
    }
    Frame::close(out);
}

void emit_bar_svg(std::span<const Bar> bars, const std::string& title, double y_max, std::ostream& out)
{
    if (!(y_max > 0.0)) {
        throw std::invalid_argument("bar chart needs a positive y_max");
    }
    const Frame frame({0.0, static_cast<double>(std::max<std::size_t>(bars.size(), 1))}, {0.0, y_max});
    frame.open(out, title, "", "");
    for (std::size_t i = 0; i < bars.size(); ++i) {
        const double left = frame.px(static_cast<double>(i) + 0.1);
        const double right = frame.px(static_cast<double>(i) + 0.9);
        const double top = frame.py(std::clamp(bars[i].value, 0.0, y_max));
        const double base = frame.py(0.0);
        out << "<rect x=\"" << fixed(left) << "\" y=\"" << fixed(top) << "\" width=\"" << fixed(right - left)
            << "\" height=\"" << fixed(base - top) << "\" fill=\"" << (bars[i].highlighted ? "black" : "lightgray")
            << "\" stroke=\"black\"/>\n"
            << "<text x=\"" << fixed((left + right) / 2) << "\" y=\"" << fixed(base + 32)
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" << escape(bars[i].label)
            << "</text>\n";
    }
    Frame::close(out);
}

void emit_scatter_svg(std::span<const ScatterPoint> points, const std::string& title, const std::string& x_label,
                      const std::string& y_label, bool log_x, std::ostream& out)
{
    auto xv = [&](double x) { return log_x ? std::log10(std::max(x, 1e-300)) : x; };
    Range x{std::numeric_limits<double>::max(), std::numeric_limits<double>::lowest()};
    for (const ScatterPoint& p : points) {
        x.lo = std::min(x.lo, xv(p.x));
        x.hi = std::max(x.hi, xv(p.x));
    }
    if (points.empty()) {
        x = {0.0, 1.0};
    }
    const Frame frame(x, {0.0, 1.0});
    frame.open(out, title, log_x ? "log10 " + x_label : x_label, y_label);
    for (const ScatterPoint& p : points) {
        const double cx = frame.px(xv(p.x));
        const double cy = frame.py(p.y);
        if (p.marked) {
            out << "<path d=\"M" << fixed(cx - 4) << ',' << fixed(cy - 4) << " L" << fixed(cx + 4) << ','
                << fixed(cy + 4) << " M" << fixed(cx - 4) << ',' << fixed(cy + 4) << " L" << fixed(cx + 4) << ','
                << fixed(cy - 4) << "\" stroke=\"firebrick\" fill=\"none\"/>\n";
        } else {
            out << "<circle cx=\"" << fixed(cx) << "\" cy=\"" << fixed(cy)
                << "\" r=\"4\" stroke=\"steelblue\" fill=\"none\"/>\n";
        }
    }
    Frame::close(out);
}

} // namespace predres
