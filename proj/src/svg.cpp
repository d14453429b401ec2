#include "qs/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "qs/errors.hpp"

namespace qs::svg {

namespace {

constexpr double kMarginLeft = 70, kMarginRight = 20, kMarginTop = 40, kMarginBottom = 55;

struct Axis {
    double lo = 0.0, hi = 1.0;
    bool log = false;

    double map(double v, double pix_lo, double pix_hi) const {
        double a = log ? std::log10(lo) : lo;
        double b = log ? std::log10(hi) : hi;
        double x = log ? std::log10(v) : v;
        if (b == a) return 0.5 * (pix_lo + pix_hi);
        return pix_lo + (x - a) / (b - a) * (pix_hi - pix_lo);
    }
};

Axis fit_axis(std::vector<double> values, bool log) {
    Axis ax;
    ax.log = log;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (double v : values) {
        if (log && v <= 0.0) continue;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (!std::isfinite(lo)) {
        lo = log ? 0.1 : 0.0;
        hi = 1.0;
    }
    if (lo == hi) {
        lo = log ? lo / 2.0 : lo - 1.0;
        hi = log ? hi * 2.0 : hi + 1.0;
    }
    if (!log) {
        double pad = 0.05 * (hi - lo);
        lo -= pad;
        hi += pad;
    } else {
        lo /= 1.3;
        hi *= 1.3;
    }
    ax.lo = lo;
    ax.hi = hi;
    return ax;
}

std::string esc(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '&') out += "&amp;";
        else if (c == '<') out += "&lt;";
        else if (c == '>') out += "&gt;";
        else out += c;
    }
    return out;
}

class Canvas {
public:
    Canvas(const PlotOptions& opts) : opts_(opts) {
        os_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opts.width
            << "\" height=\"" << opts.height << "\" viewBox=\"0 0 " << opts.width << " "
            << opts.height << "\">\n";
        os_ << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    }

    double px_lo() const { return kMarginLeft; }
    double px_hi() const { return opts_.width - kMarginRight; }
    double py_lo() const { return opts_.height - kMarginBottom; } // y grows down
    double py_hi() const { return kMarginTop; }

    void frame(const Axis& xa, const Axis& ya) {
        os_ << "<rect x=\"" << px_lo() << "\" y=\"" << py_hi() << "\" width=\""
            << px_hi() - px_lo() << "\" height=\"" << py_lo() - py_hi()
            << "\" fill=\"none\" stroke=\"#444\"/>\n";
        // 5 ticks per axis
        for (int i = 0; i <= 4; ++i) {
            double fx = i / 4.0;
            double xv = xa.log ? std::pow(10.0, std::log10(xa.lo) +
                                                    fx * (std::log10(xa.hi) - std::log10(xa.lo)))
                               : xa.lo + fx * (xa.hi - xa.lo);
            double px = px_lo() + fx * (px_hi() - px_lo());
            os_ << "<line x1=\"" << px << "\" y1=\"" << py_lo() << "\" x2=\"" << px
                << "\" y2=\"" << py_lo() + 5 << "\" stroke=\"#444\"/>\n";
            os_ << "<text x=\"" << px << "\" y=\"" << py_lo() + 18
                << "\" font-size=\"11\" text-anchor=\"middle\">" << fmt(xv) << "</text>\n";
            double yv = ya.log ? std::pow(10.0, std::log10(ya.lo) +
                                                    fx * (std::log10(ya.hi) - std::log10(ya.lo)))
                               : ya.lo + fx * (ya.hi - ya.lo);
            double py = py_lo() + fx * (py_hi() - py_lo());
            os_ << "<line x1=\"" << px_lo() - 5 << "\" y1=\"" << py << "\" x2=\"" << px_lo()
                << "\" y2=\"" << py << "\" stroke=\"#444\"/>\n";
            os_ << "<text x=\"" << px_lo() - 8 << "\" y=\"" << py + 4
                << "\" font-size=\"11\" text-anchor=\"end\">" << fmt(yv) << "</text>\n";
        }
        os_ << "<text x=\"" << (px_lo() + px_hi()) / 2 << "\" y=\"" << opts_.height - 12
            << "\" font-size=\"13\" text-anchor=\"middle\">" << esc(opts_.x_label)
            << "</text>\n";
        os_ << "<text x=\"16\" y=\"" << (py_lo() + py_hi()) / 2
            << "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
            << (py_lo() + py_hi()) / 2 << ")\">" << esc(opts_.y_label) << "</text>\n";
        os_ << "<text x=\"" << (px_lo() + px_hi()) / 2 << "\" y=\"22\" font-size=\"15\" "
            << "text-anchor=\"middle\">" << esc(opts_.title) << "</text>\n";
    }

    void polyline(const Axis& xa, const Axis& ya, const Series& s) {
        os_ << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.3\" points=\"";
        for (size_t i = 0; i < s.x.size(); ++i) {
            if (xa.log && s.x[i] <= 0) continue;
            if (ya.log && s.y[i] <= 0) continue;
            os_ << xa.map(s.x[i], px_lo(), px_hi()) << "," << ya.map(s.y[i], py_lo(), py_hi())
                << " ";
        }
        os_ << "\"/>\n";
    }

    void dots(const Axis& xa, const Axis& ya, const Series& s) {
        for (size_t i = 0; i < s.x.size(); ++i) {
            if (xa.log && s.x[i] <= 0) continue;
            if (ya.log && s.y[i] <= 0) continue;
            os_ << "<circle cx=\"" << xa.map(s.x[i], px_lo(), px_hi()) << "\" cy=\""
                << ya.map(s.y[i], py_lo(), py_hi()) << "\" r=\"2.2\" fill=\"" << s.color
                << "\" fill-opacity=\"0.6\"/>\n";
        }
    }

    void legend(const std::vector<Series>& series) {
        double y = py_hi() + 14;
        for (const auto& s : series) {
            if (s.label.empty()) continue;
            os_ << "<rect x=\"" << px_hi() - 150 << "\" y=\"" << y - 9
                << "\" width=\"10\" height=\"10\" fill=\"" << s.color << "\"/>\n";
            os_ << "<text x=\"" << px_hi() - 135 << "\" y=\"" << y
                << "\" font-size=\"11\">" << esc(s.label) << "</text>\n";
            y += 16;
        }
    }

    void raw(const std::string& s) { os_ << s; }

    void write(const std::filesystem::path& path) {
        os_ << "</svg>\n";
        std::filesystem::create_directories(path.parent_path());
        std::ofstream out(path, std::ios::trunc);
        if (!out)
            throw Error(ErrorClass::Dependency, "svg: cannot write " + path.string());
        out << os_.str();
    }

private:
    static std::string fmt(double v) {
        std::ostringstream os;
        os.precision(3);
        os << v;
        return os.str();
    }
    PlotOptions opts_;
    std::ostringstream os_;
};

std::vector<double> gather_x(const std::vector<Series>& series) {
    std::vector<double> out;
    for (const auto& s : series) out.insert(out.end(), s.x.begin(), s.x.end());
    return out;
}

std::vector<double> gather_y(const std::vector<Series>& series) {
    std::vector<double> out;
    for (const auto& s : series) out.insert(out.end(), s.y.begin(), s.y.end());
    return out;
}

} // namespace

void line_chart(const std::filesystem::path& path, const std::vector<Series>& series,
                const PlotOptions& opts) {
    Axis xa = fit_axis(gather_x(series), opts.log_x);
    Axis ya = fit_axis(gather_y(series), opts.log_y);
    Canvas c(opts);
    c.frame(xa, ya);
    for (const auto& s : series) c.polyline(xa, ya, s);
    c.legend(series);
    c.write(path);
}

void scatter_chart(const std::filesystem::path& path, const std::vector<Series>& series,
                   const PlotOptions& opts, bool identity_line) {
    auto xs = gather_x(series);
    auto ys = gather_y(series);
    if (identity_line) {
        xs.insert(xs.end(), ys.begin(), ys.end()); // shared range
        ys = xs;
    }
    Axis xa = fit_axis(xs, opts.log_x);
    Axis ya = fit_axis(ys, opts.log_y);
    Canvas c(opts);
    c.frame(xa, ya);
    if (identity_line) {
        Series diag;
        diag.color = "#999999";
        diag.x = {xa.lo, xa.hi};
        diag.y = {xa.lo, xa.hi};
        c.polyline(xa, ya, diag);
    }
    for (const auto& s : series) c.dots(xa, ya, s);
    c.legend(series);
    c.write(path);
}

void box_chart(const std::filesystem::path& path, const std::vector<std::string>& labels,
               const std::vector<eval::BoxStats>& boxes, const PlotOptions& opts) {
    if (labels.size() != boxes.size() || boxes.empty())
        throw Error(ErrorClass::Domain, "box_chart: labels/boxes mismatch");
    std::vector<double> ys;
    for (const auto& b : boxes) {
        ys.push_back(b.whisker_low);
        ys.push_back(b.whisker_high);
        for (double o : b.outliers) ys.push_back(o);
    }
    Axis ya = fit_axis(ys, opts.log_y);
    Axis xa{0.0, static_cast<double>(boxes.size()), false};

    Canvas c(opts);
    c.frame(xa, ya);
    for (size_t i = 0; i < boxes.size(); ++i) {
        const auto& b = boxes[i];
        double cx = xa.map(static_cast<double>(i) + 0.5, c.px_lo(), c.px_hi());
        double half = 0.3 * (c.px_hi() - c.px_lo()) / static_cast<double>(boxes.size());
        auto py = [&](double v) { return ya.map(v, c.py_lo(), c.py_hi()); };
        std::ostringstream os;
        os << "<line x1=\"" << cx << "\" y1=\"" << py(b.whisker_low) << "\" x2=\"" << cx
           << "\" y2=\"" << py(b.q1) << "\" stroke=\"#333\"/>\n";
        os << "<line x1=\"" << cx << "\" y1=\"" << py(b.whisker_high) << "\" x2=\"" << cx
           << "\" y2=\"" << py(b.q3) << "\" stroke=\"#333\"/>\n";
        os << "<rect x=\"" << cx - half << "\" y=\"" << py(b.q3) << "\" width=\"" << 2 * half
           << "\" height=\"" << py(b.q1) - py(b.q3)
           << "\" fill=\"#9ecae1\" stroke=\"#333\"/>\n";
        os << "<line x1=\"" << cx - half << "\" y1=\"" << py(b.median) << "\" x2=\""
           << cx + half << "\" y2=\"" << py(b.median)
           << "\" stroke=\"#b2182b\" stroke-width=\"1.6\"/>\n";
        for (double o : b.outliers)
            os << "<circle cx=\"" << cx << "\" cy=\"" << py(o)
               << "\" r=\"2\" fill=\"none\" stroke=\"#555\"/>\n";
        os << "<text x=\"" << cx << "\" y=\"" << c.py_lo() + 18
           << "\" font-size=\"11\" text-anchor=\"middle\">" << esc(labels[i]) << "</text>\n";
        c.raw(os.str());
    }
    c.write(path);
}

} // namespace qs::svg
