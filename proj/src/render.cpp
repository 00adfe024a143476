#include "cqed/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "cqed/error.hpp"

namespace cqed {

namespace {

// Fixed-precision text keeps the SVG byte-identical across runs.
std::string fx(double v, int digits = 2) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string tick_label(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

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

// Ticks at 1, 2 or 5 times a power of ten.
std::vector<double> nice_ticks(double lo, double hi, int target = 6) {
    if (!(hi > lo)) return {lo};
    const double raw = (hi - lo) / target;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0}) {
        step = m * mag;
        if (step >= raw) break;
    }
    std::vector<double> out;
    for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * step; t += step) {
        out.push_back(std::abs(t) < 1e-12 * step ? 0.0 : t);
    }
    return out;
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

struct Frame {
    double x0, y0, w, h;     // pixel box
    double xmin, xmax, ymin, ymax;
    double px(double x) const { return x0 + (x - xmin) / (xmax - xmin) * w; }
    double py(double y) const { return y0 + h - (y - ymin) / (ymax - ymin) * h; }
};

void axes(std::ostringstream& os, const Frame& f, const std::string& xl, const std::string& yl) {
    os << "<rect x=\"" << fx(f.x0) << "\" y=\"" << fx(f.y0) << "\" width=\"" << fx(f.w) << "\" height=\"" << fx(f.h)
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (double t : nice_ticks(f.xmin, f.xmax)) {
        const double x = f.px(t);
        os << "<line x1=\"" << fx(x) << "\" y1=\"" << fx(f.y0 + f.h) << "\" x2=\"" << fx(x) << "\" y2=\""
           << fx(f.y0 + f.h + 5) << "\" stroke=\"black\"/>\n";
        os << "<text x=\"" << fx(x) << "\" y=\"" << fx(f.y0 + f.h + 18)
           << "\" font-size=\"11\" text-anchor=\"middle\">" << tick_label(t) << "</text>\n";
    }
    for (double t : nice_ticks(f.ymin, f.ymax)) {
        const double y = f.py(t);
        os << "<line x1=\"" << fx(f.x0 - 5) << "\" y1=\"" << fx(y) << "\" x2=\"" << fx(f.x0) << "\" y2=\"" << fx(y)
           << "\" stroke=\"black\"/>\n";
        os << "<text x=\"" << fx(f.x0 - 8) << "\" y=\"" << fx(y + 4) << "\" font-size=\"11\" text-anchor=\"end\">"
           << tick_label(t) << "</text>\n";
    }
    os << "<text x=\"" << fx(f.x0 + f.w / 2) << "\" y=\"" << fx(f.y0 + f.h + 36)
       << "\" font-size=\"13\" text-anchor=\"middle\">" << escape(xl) << "</text>\n";
    os << "<text transform=\"translate(" << fx(f.x0 - 62) << "," << fx(f.y0 + f.h / 2)
       << ") rotate(-90)\" font-size=\"13\" text-anchor=\"middle\">" << escape(yl) << "</text>\n";
}

std::string svg_open(int w, int h) {
    return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" +
           std::to_string(w) + "\" height=\"" + std::to_string(h) + "\" viewBox=\"0 0 " + std::to_string(w) + " " +
           std::to_string(h) + "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

void range(double& lo, double& hi) {
    if (!(hi > lo)) {
        const double pad = lo == 0.0 ? 1.0 : 0.05 * std::abs(lo);
        lo -= pad;
        hi += pad;
    }
}

}  // namespace

std::array<unsigned char, 3> hot_colormap(double u) {
    u = std::clamp(std::isfinite(u) ? u : 0.0, 0.0, 1.0);
    const auto ch = [](double v) { return static_cast<unsigned char>(std::lround(255.0 * std::clamp(v, 0.0, 1.0))); };
    return {ch(3.0 * u), ch(3.0 * u - 1.0), ch(3.0 * u - 2.0)};
}

std::string render_lines_svg(const std::vector<Panel>& panels, const PlotOptions& opt) {
    if (panels.empty()) throw InvalidInput("render: nothing to plot");
    std::ostringstream os;
    os << svg_open(opt.width, opt.height);
    const double top = opt.title.empty() ? 20.0 : 40.0;
    if (!opt.title.empty()) {
        os << "<text x=\"" << fx(opt.width / 2.0) << "\" y=\"24\" font-size=\"15\" text-anchor=\"middle\">"
           << escape(opt.title) << "</text>\n";
    }
    const double slot = (opt.height - top) / static_cast<double>(panels.size());
    for (std::size_t p = 0; p < panels.size(); ++p) {
        const Panel& pn = panels[p];
        double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
        std::size_t points = 0;
        for (const auto& s : pn.series) {
            if (s.x.size() != s.y.size()) throw InvalidInput("render: series '" + s.label + "' has mismatched x/y");
            for (std::size_t i = 0; i < s.x.size(); ++i) {
                if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
                xmin = std::min(xmin, s.x[i]);
                xmax = std::max(xmax, s.x[i]);
                ymin = std::min(ymin, s.y[i]);
                ymax = std::max(ymax, s.y[i]);
                ++points;
            }
        }
        if (points == 0) throw InvalidInput("render: empty data region");
        range(xmin, xmax);
        range(ymin, ymax);
        const Frame f{80.0, top + p * slot + 10.0, opt.width - 250.0, slot - 60.0, xmin, xmax, ymin, ymax};
        axes(os, f, pn.x_label, pn.y_label);
        for (std::size_t k = 0; k < pn.series.size(); ++k) {
            const Series& s = pn.series[k];
            const char* colour = kPalette[k % std::size(kPalette)];
            os << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
            bool first = true;
            for (std::size_t i = 0; i < s.x.size(); ++i) {
                if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
                os << (first ? "" : " ") << fx(f.px(s.x[i])) << "," << fx(f.py(s.y[i]));
                first = false;
            }
            os << "\"/>\n";
            const double ly = f.y0 + 14.0 + 18.0 * k;
            os << "<line x1=\"" << fx(f.x0 + f.w + 15) << "\" y1=\"" << fx(ly - 4) << "\" x2=\"" << fx(f.x0 + f.w + 35)
               << "\" y2=\"" << fx(ly - 4) << "\" stroke=\"" << colour << "\" stroke-width=\"2\"/>\n";
            os << "<text x=\"" << fx(f.x0 + f.w + 40) << "\" y=\"" << fx(ly) << "\" font-size=\"11\">" << escape(s.label)
               << "</text>\n";
        }
    }
    os << "</svg>\n";
    return os.str();
}

Eigen::MatrixXd normalized_intensity(const PLMap& map, const HeatmapOptions& opt) {
    if (map.intensity.size() == 0) throw InvalidInput("render: empty data region");
    map.validate();
    const double mx = map.intensity.maxCoeff();
    if (!(mx > 0.0)) throw InvalidInput("render: empty data region (no positive intensity)");
    if (!opt.log_scale) return map.intensity / mx;
    if (!(opt.log_decades > 0.0)) throw InvalidInput("render: log_decades must be > 0");
    const double floor = std::pow(10.0, -opt.log_decades);
    return map.intensity.unaryExpr([&](double v) {
        const double r = std::max(v / mx, floor);
        return 1.0 + std::log10(r) / opt.log_decades;
    });
}

std::string render_heatmap_ppm(const PLMap& map, const HeatmapOptions& opt) {
    const Eigen::MatrixXd u = normalized_intensity(map, opt);
    const auto w = u.cols(), h = u.rows();
    std::string out = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
    out.reserve(out.size() + static_cast<std::size_t>(3 * w * h));
    for (Eigen::Index r = h - 1; r >= 0; --r) {  // latest time on the top row
        for (Eigen::Index c = 0; c < w; ++c) {
            const auto px = hot_colormap(u(r, c));
            out.append(reinterpret_cast<const char*>(px.data()), 3);
        }
    }
    return out;
}

std::string render_heatmap_svg(const PLMap& map, const HeatmapOptions& opt) {
    const Eigen::MatrixXd u = normalized_intensity(map, opt);
    const int nx = static_cast<int>(std::min<Eigen::Index>(u.cols(), opt.max_cells_x));
    const int ny = static_cast<int>(std::min<Eigen::Index>(u.rows(), opt.max_cells_y));
    const PlotOptions& po = opt.plot;
    std::ostringstream os;
    os << svg_open(po.width, po.height);
    const double top = po.title.empty() ? 20.0 : 40.0;
    if (!po.title.empty()) {
        os << "<text x=\"" << fx(po.width / 2.0) << "\" y=\"24\" font-size=\"15\" text-anchor=\"middle\">"
           << escape(po.title) << "</text>\n";
    }
    const Frame f{80.0, top + 10.0, po.width - 200.0, po.height - top - 70.0, map.lambda_nm.front(),
                  map.lambda_nm.back(), map.t_ps.front(), map.t_ps.back()};
    // Cells average the samples they cover so the downsampled image keeps its morphology.
    const double cw = f.w / nx, ch = f.h / ny;
    for (int j = 0; j < ny; ++j) {
        const Eigen::Index r0 = j * u.rows() / ny, r1 = std::max<Eigen::Index>((j + 1) * u.rows() / ny, r0 + 1);
        for (int i = 0; i < nx; ++i) {
            const Eigen::Index c0 = i * u.cols() / nx, c1 = std::max<Eigen::Index>((i + 1) * u.cols() / nx, c0 + 1);
            const double v = u.block(r0, c0, r1 - r0, c1 - c0).mean();
            const auto px = hot_colormap(v);
            char colour[8];
            std::snprintf(colour, sizeof colour, "#%02x%02x%02x", px[0], px[1], px[2]);
            os << "<rect x=\"" << fx(f.x0 + i * cw) << "\" y=\"" << fx(f.y0 + f.h - (j + 1) * ch) << "\" width=\""
               << fx(cw + 0.05) << "\" height=\"" << fx(ch + 0.05) << "\" fill=\"" << colour << "\"/>\n";
        }
    }
    axes(os, f, "wavelength [nm]", "time [ps]");
    // colour bar
    const double bx = f.x0 + f.w + 30.0;
    for (int k = 0; k < 64; ++k) {
        const auto px = hot_colormap((k + 0.5) / 64.0);
        char colour[8];
        std::snprintf(colour, sizeof colour, "#%02x%02x%02x", px[0], px[1], px[2]);
        os << "<rect x=\"" << fx(bx) << "\" y=\"" << fx(f.y0 + f.h - (k + 1) * f.h / 64.0) << "\" width=\"20\" height=\""
           << fx(f.h / 64.0 + 0.05) << "\" fill=\"" << colour << "\"/>\n";
    }
    os << "<text x=\"" << fx(bx + 10) << "\" y=\"" << fx(f.y0 - 4) << "\" font-size=\"11\" text-anchor=\"middle\">"
       << (opt.log_scale ? "log10 I/Imax" : "I/Imax") << "</text>\n";
    os << "<text x=\"" << fx(bx + 24) << "\" y=\"" << fx(f.y0 + 10) << "\" font-size=\"10\">"
       << (opt.log_scale ? "0" : "1") << "</text>\n";
    os << "<text x=\"" << fx(bx + 24) << "\" y=\"" << fx(f.y0 + f.h) << "\" font-size=\"10\">"
       << (opt.log_scale ? "-" + tick_label(opt.log_decades) : "0") << "</text>\n";
    os << "</svg>\n";
    return os.str();
}

}  // namespace cqed
