#pragma once

#include <string>
#include <vector>

namespace lab {

struct SvgSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

struct SvgAxes {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_x = false;
    bool log_y = false;
};

std::string render_svg_plot(const std::vector<SvgSeries>& series, const SvgAxes& axes);
void emit_svg_plot(const std::vector<SvgSeries>& series, const std::string& path, const SvgAxes& axes);

}  // namespace lab
