// SPDX-License-Identifier: Apache-2.0
//
// Text outputs: number formatting and deterministic SVG 1.1 charts.
#pragma once

#include "predres/engine.hpp"

#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace predres {

/// Shortest decimal string that round-trips to `value`.
std::string format_number(double value);

struct ConvergenceSvgOptions
{
    std::string title;
    /// Plot summary_path; otherwise the selected model id with per-trial
    /// vertical jitter in [-jitter, jitter].
    bool plot_summary = true;
    double jitter = 0.15;
    /// Dashed vertical marker at this imputation step.
    std::optional<std::size_t> marker_step;
    std::string x_label = "imputed observations";
    std::string y_label;
};

/// One polyline per non-aborted trace. Output bytes depend only on inputs.
void emit_convergence_svg(std::span<const TrialTrace> traces, const ConvergenceSvgOptions& options,
                          std::ostream& out);

struct Bar
{
    std::string label;
    double value = 0.0;
    /// Bars in a highlighted group are drawn dark.
    bool highlighted = false;
};

/// Vertical bar chart with values on a [0, y_max] axis.
void emit_bar_svg(std::span<const Bar> bars, const std::string& title, double y_max, std::ostream& out);

struct ScatterPoint
{
    double x = 0.0;
    double y = 0.0;
    bool marked = false; // drawn as X, otherwise O
};

void emit_scatter_svg(std::span<const ScatterPoint> points, const std::string& title, const std::string& x_label,
                      const std::string& y_label, bool log_x, std::ostream& out);

} // namespace predres
