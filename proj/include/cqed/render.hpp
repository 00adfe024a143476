#pragma once

#include <array>
#include <string>
#include <vector>

#include "cqed/spectra.hpp"

namespace cqed {

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

struct Panel {
    std::string x_label;  // with unit, e.g. "detuning [nm]"
    std::string y_label;
    std::vector<Series> series;
};

struct PlotOptions {
    int width = 900;
    int height = 600;
    std::string title;
};

/// Line plot, panels stacked vertically, as standalone SVG 1.1.
std::string render_lines_svg(const std::vector<Panel>& panels, const PlotOptions& options = {});

struct HeatmapOptions {
    bool log_scale = false;
    double log_decades = 3.0;   // dynamic range shown in log mode
    int max_cells_x = 240;      // SVG cell budget; PPM is always one pixel per sample
    int max_cells_y = 180;
    PlotOptions plot{};
};

/// "hot" colormap: black, red, yellow, white; monotone in luminance. u in [0, 1].
std::array<unsigned char, 3> hot_colormap(double u);

/// Intensity normalized to the map maximum (or log-scaled) into [0, 1]. Throws
/// InvalidInput when the map is empty or has no positive value.
Eigen::MatrixXd normalized_intensity(const PLMap& map, const HeatmapOptions& options);

/// Binary PPM (P6): wavelength left to right, time bottom to top.
std::string render_heatmap_ppm(const PLMap& map, const HeatmapOptions& options = {});
std::string render_heatmap_svg(const PLMap& map, const HeatmapOptions& options = {});

}  // namespace cqed
