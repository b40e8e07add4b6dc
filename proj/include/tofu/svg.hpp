#pragma once
#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "tofu/mat.hpp"

namespace tofu {

namespace svg {

inline const char* palette(int i) {
    static const char* colors[] = {"#d62728", "#1f77b4", "#2ca02c", "#ff7f0e",
                                   "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
    return colors[i % 8];
}

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

}  // namespace svg

// Scatter of 2-D points colored by an integer group id, with a legend.
inline std::string svg_scatter(const Mat& points2d, const std::vector<int>& group,
                               const std::string& title, const std::string& group_prefix) {
    const double W = 640, H = 480, m = 50;
    double xlo = 1e300, xhi = -1e300, ylo = 1e300, yhi = -1e300;
    for (std::size_t i = 0; i < points2d.rows; ++i) {
        xlo = std::min(xlo, points2d(i, 0));
        xhi = std::max(xhi, points2d(i, 0));
        ylo = std::min(ylo, points2d(i, 1));
        yhi = std::max(yhi, points2d(i, 1));
    }
    if (xhi <= xlo) xhi = xlo + 1;
    if (yhi <= ylo) yhi = ylo + 1;
    auto sx = [&](double x) { return m + (x - xlo) / (xhi - xlo) * (W - 2 * m); };
    auto sy = [&](double y) { return H - m - (y - ylo) / (yhi - ylo) * (H - 2 * m); };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
       << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\" "
          "font-family=\"sans-serif\">" << title << "</text>\n";
    for (std::size_t i = 0; i < points2d.rows; ++i)
        os << "<circle cx=\"" << svg::num(sx(points2d(i, 0))) << "\" cy=\""
           << svg::num(sy(points2d(i, 1))) << "\" r=\"2.2\" fill=\"" << svg::palette(group[i])
           << "\" fill-opacity=\"0.55\"/>\n";
    int max_group = 0;
    for (int g : group) max_group = std::max(max_group, g);
    for (int g = 0; g <= max_group; ++g) {
        const double ly = 40 + 18 * g;
        os << "<circle cx=\"" << W - m - 80 << "\" cy=\"" << ly << "\" r=\"5\" fill=\""
           << svg::palette(g) << "\"/>\n";
        os << "<text x=\"" << W - m - 68 << "\" y=\"" << ly + 4
           << "\" font-size=\"12\" font-family=\"sans-serif\">" << group_prefix << g << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

// Line plot of mean +/- stdev against x values (the cluster-count ablation).
inline std::string svg_line_errorbars(const std::vector<double>& xs, const std::vector<double>& mean,
                                      const std::vector<double>& stdev, const std::string& title,
                                      const std::string& xlabel, const std::string& ylabel) {
    const double W = 640, H = 480, m = 60;
    double xlo = xs.front(), xhi = xs.back();
    if (xhi <= xlo) xhi = xlo + 1;
    double ylo = 1e300, yhi = -1e300;
    for (std::size_t i = 0; i < mean.size(); ++i) {
        ylo = std::min(ylo, mean[i] - stdev[i]);
        yhi = std::max(yhi, mean[i] + stdev[i]);
    }
    const double pad = std::max(0.02, (yhi - ylo) * 0.2);
    ylo -= pad;
    yhi += pad;
    auto sx = [&](double x) { return m + (x - xlo) / (xhi - xlo) * (W - 2 * m); };
    auto sy = [&](double y) { return H - m - (y - ylo) / (yhi - ylo) * (H - 2 * m); };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
       << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\" "
          "font-family=\"sans-serif\">" << title << "</text>\n";
    os << "<line x1=\"" << m << "\" y1=\"" << H - m << "\" x2=\"" << W - m << "\" y2=\"" << H - m
       << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << m << "\" y1=\"" << m << "\" x2=\"" << m << "\" y2=\"" << H - m
       << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"" << H - 16
       << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\">" << xlabel
       << "</text>\n";
    os << "<text x=\"18\" y=\"" << H / 2 << "\" text-anchor=\"middle\" font-size=\"13\" "
          "font-family=\"sans-serif\" transform=\"rotate(-90 18 " << H / 2 << ")\">" << ylabel
       << "</text>\n";
    // y ticks
    for (int t = 0; t <= 4; ++t) {
        const double y = ylo + (yhi - ylo) * t / 4.0;
        os << "<text x=\"" << m - 6 << "\" y=\"" << svg::num(sy(y) + 4)
           << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">" << svg::num(y)
           << "</text>\n";
    }
    std::ostringstream path;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        path << (i == 0 ? "M" : "L") << svg::num(sx(xs[i])) << " " << svg::num(sy(mean[i])) << " ";
        os << "<line x1=\"" << svg::num(sx(xs[i])) << "\" y1=\"" << svg::num(sy(mean[i] - stdev[i]))
           << "\" x2=\"" << svg::num(sx(xs[i])) << "\" y2=\"" << svg::num(sy(mean[i] + stdev[i]))
           << "\" stroke=\"#1f77b4\" stroke-width=\"1.5\"/>\n";
        os << "<text x=\"" << svg::num(sx(xs[i])) << "\" y=\"" << H - m + 18
           << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">" << xs[i]
           << "</text>\n";
    }
    os << "<path d=\"" << path.str() << "\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\"/>\n";
    for (std::size_t i = 0; i < xs.size(); ++i)
        os << "<circle cx=\"" << svg::num(sx(xs[i])) << "\" cy=\"" << svg::num(sy(mean[i]))
           << "\" r=\"3.5\" fill=\"#1f77b4\"/>\n";
    os << "</svg>\n";
    return os.str();
}

}  // namespace tofu
