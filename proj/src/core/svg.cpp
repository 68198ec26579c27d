#include "core/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

namespace cvf::svg {

namespace {

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out += c;
        }
    }
    return out;
}

constexpr double width = 900.0;
constexpr double height = 520.0;
constexpr double margin_left = 70.0;
constexpr double margin_right = 30.0;
constexpr double margin_top = 50.0;
constexpr double margin_bottom = 70.0;

const char* palette[] = {"#4477aa", "#ee6677", "#228833", "#ccbb44"};

} // namespace

std::string bar_chart(const std::string& title, const std::string& x_label,
                      const std::string& y_label, const std::vector<series>& data) {
    std::set<int64_t> keys;
    double y_max = 0.0;
    for (const series& s : data)
        for (const auto& [k, v] : s.bins) {
            keys.insert(k);
            y_max = std::max(y_max, v);
        }
    if (y_max <= 0.0) y_max = 1.0;
    // Round the axis top up to 1/2/5 * 10^k.
    const double mag = std::pow(10.0, std::floor(std::log10(y_max)));
    double step = mag;
    if (y_max / mag > 5.0) step = mag * 2.0;
    const double y_top = std::ceil(y_max / step) * step;

    const double plot_w = width - margin_left - margin_right;
    const double plot_h = height - margin_top - margin_bottom;
    const size_t n_groups = keys.size();
    const size_t n_series = std::max<size_t>(data.size(), 1);

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\""
        << num(height) << "\" viewBox=\"0 0 " << num(width) << " " << num(height) << "\">\n";
    out << "<rect x=\"0\" y=\"0\" width=\"" << num(width) << "\" height=\"" << num(height)
        << "\" fill=\"#ffffff\"/>\n";
    out << "<text x=\"" << num(width / 2) << "\" y=\"28\" text-anchor=\"middle\" "
           "font-family=\"sans-serif\" font-size=\"18\">"
        << escape(title) << "</text>\n";

    // Axes.
    out << "<line x1=\"" << num(margin_left) << "\" y1=\"" << num(margin_top) << "\" x2=\""
        << num(margin_left) << "\" y2=\"" << num(height - margin_bottom)
        << "\" stroke=\"#000000\"/>\n";
    out << "<line x1=\"" << num(margin_left) << "\" y1=\"" << num(height - margin_bottom)
        << "\" x2=\"" << num(width - margin_right) << "\" y2=\"" << num(height - margin_bottom)
        << "\" stroke=\"#000000\"/>\n";
    out << "<text x=\"" << num(margin_left + plot_w / 2) << "\" y=\"" << num(height - 18)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
        << escape(x_label) << "</text>\n";
    out << "<text x=\"20\" y=\"" << num(margin_top + plot_h / 2)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\" "
           "transform=\"rotate(-90 20 "
        << num(margin_top + plot_h / 2) << ")\">" << escape(y_label) << "</text>\n";

    // Horizontal gridlines with tick labels.
    const int n_ticks = 5;
    for (int i = 0; i <= n_ticks; ++i) {
        const double value = y_top * i / n_ticks;
        const double y = height - margin_bottom - plot_h * value / y_top;
        if (i > 0)
            out << "<line x1=\"" << num(margin_left) << "\" y1=\"" << num(y) << "\" x2=\""
                << num(width - margin_right) << "\" y2=\"" << num(y)
                << "\" stroke=\"#dddddd\"/>\n";
        out << "<text x=\"" << num(margin_left - 8) << "\" y=\"" << num(y + 4)
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
            << num(value) << "</text>\n";
    }

    if (n_groups > 0) {
        const double group_w = plot_w / static_cast<double>(n_groups);
        const double bar_w = group_w * 0.8 / static_cast<double>(n_series);
        size_t gi = 0;
        const size_t label_stride = n_groups <= 30 ? 1 : (n_groups + 29) / 30;
        for (int64_t key : keys) {
            const double gx = margin_left + group_w * static_cast<double>(gi) + group_w * 0.1;
            for (size_t si = 0; si < data.size(); ++si) {
                const auto it = data[si].bins.find(key);
                const double value = it == data[si].bins.end() ? 0.0 : it->second;
                const double h = plot_h * value / y_top;
                out << "<rect class=\"bar\" x=\"" << num(gx + bar_w * static_cast<double>(si))
                    << "\" y=\"" << num(height - margin_bottom - h) << "\" width=\"" << num(bar_w)
                    << "\" height=\"" << num(h) << "\" fill=\"" << palette[si % 4] << "\"/>\n";
            }
            if (gi % label_stride == 0)
                out << "<text x=\"" << num(gx + group_w * 0.4) << "\" y=\""
                    << num(height - margin_bottom + 16)
                    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
                    << key << "</text>\n";
            ++gi;
        }
    }

    if (data.size() > 1) {
        double lx = margin_left + 12.0;
        const double ly = margin_top + 8.0;
        for (size_t si = 0; si < data.size(); ++si) {
            out << "<rect class=\"legend\" x=\"" << num(lx) << "\" y=\"" << num(ly)
                << "\" width=\"14\" height=\"14\" fill=\"" << palette[si % 4] << "\"/>\n";
            out << "<text x=\"" << num(lx + 20.0) << "\" y=\"" << num(ly + 12.0)
                << "\" font-family=\"sans-serif\" font-size=\"13\">" << escape(data[si].name)
                << "</text>\n";
            lx += 24.0 + 9.0 * static_cast<double>(data[si].name.size());
        }
    }
    out << "</svg>\n";
    return out.str();
}

} // namespace cvf::svg
