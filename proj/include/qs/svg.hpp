#ifndef QS_SVG_HPP
#define QS_SVG_HPP

#include <filesystem>
#include <string>
#include <vector>

#include "qs/evaluation.hpp"

namespace qs::svg {

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    std::string color = "#1f6fb2";
};

struct PlotOptions {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_x = false;
    bool log_y = false;
    int width = 640;
    int height = 420;
};

void line_chart(const std::filesystem::path& path, const std::vector<Series>& series,
                const PlotOptions& opts);

void scatter_chart(const std::filesystem::path& path, const std::vector<Series>& series,
                   const PlotOptions& opts, bool identity_line = false);

// One box per labeled group.
void box_chart(const std::filesystem::path& path,
               const std::vector<std::string>& labels,
               const std::vector<eval::BoxStats>& boxes, const PlotOptions& opts);

} // namespace qs::svg

#endif // QS_SVG_HPP
