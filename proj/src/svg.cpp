#include "hflow/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace hflow {

namespace {
constexpr double kWidth = 720, kHeight = 480;
constexpr double kLeft = 70, kRight = 690, kTop = 50, kBottom = 430;
const char* kColors[] = {"#1f66a8", "#c23b22", "#2e8540", "#8a56a8", "#b8860b", "#444444"};

std::string num(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", x);
    return buf;
}
} // namespace

std::string render_svg_lines(const std::string& title, const std::string& x_label,
                             const std::string& y_label,
                             const std::vector<SvgSeries>& series, bool log_y) {
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    auto ty = [&](double y) { return log_y ? std::log10(std::max(y, 1e-300)) : y; };
    for (const auto& s : series)
        for (auto [x, y] : s.points) {
            if (!std::isfinite(x) || !std::isfinite(ty(y))) continue;
            xmin = std::min(xmin, x);
            xmax = std::max(xmax, x);
            ymin = std::min(ymin, ty(y));
            ymax = std::max(ymax, ty(y));
        }
    if (!(xmin < xmax)) {
        xmin -= 1;
        xmax += 1;
    }
    if (!(ymin < ymax)) {
        ymin -= 1;
        ymax += 1;
    }
    auto px = [&](double x) { return kLeft + (x - xmin) / (xmax - xmin) * (kRight - kLeft); };
    auto py = [&](double y) {
        return kBottom - (ty(y) - ymin) / (ymax - ymin) * (kBottom - kTop);
    };

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
        << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<text x=\"" << (kWidth / 2) << "\" y=\"28\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"16\">" << title << "</text>\n"
        << "<line x1=\"" << kLeft << "\" y1=\"" << kBottom << "\" x2=\"" << kRight << "\" y2=\""
        << kBottom << "\" stroke=\"black\"/>\n"
        << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\""
        << kBottom << "\" stroke=\"black\"/>\n";
    // axis end labels
    out << "<text x=\"" << kLeft << "\" y=\"" << (kBottom + 18)
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << num(xmin) << "</text>\n"
        << "<text x=\"" << kRight << "\" y=\"" << (kBottom + 18)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << num(xmax)
        << "</text>\n"
        << "<text x=\"" << (kLeft - 6) << "\" y=\"" << kBottom
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
        << num(log_y ? std::pow(10.0, ymin) : ymin) << "</text>\n"
        << "<text x=\"" << (kLeft - 6) << "\" y=\"" << (kTop + 4)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
        << num(log_y ? std::pow(10.0, ymax) : ymax) << "</text>\n"
        << "<text x=\"" << ((kLeft + kRight) / 2) << "\" y=\"" << (kHeight - 12)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" << x_label
        << (log_y ? "" : "") << "</text>\n"
        << "<text x=\"18\" y=\"" << ((kTop + kBottom) / 2)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
        << "transform=\"rotate(-90 18 " << ((kTop + kBottom) / 2) << ")\">" << y_label
        << (log_y ? " (log)" : "") << "</text>\n";

    int ci = 0;
    for (const auto& s : series) {
        const char* color = kColors[ci % 6];
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        bool first = true;
        for (auto [x, y] : s.points) {
            if (!std::isfinite(x) || !std::isfinite(ty(y))) continue;
            if (!first) out << " ";
            out << num(px(x)) << "," << num(py(y));
            first = false;
        }
        out << "\"/>\n";
        out << "<text x=\"" << (kRight - 150) << "\" y=\"" << (kTop + 16 + 16 * ci)
            << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"" << color << "\">"
            << s.label << "</text>\n";
        ++ci;
    }
    out << "</svg>\n";
    return out.str();
}

} // namespace hflow
