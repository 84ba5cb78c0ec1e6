#include "riverflow/analysis/report.hpp"

#include "riverflow/common/error.hpp"
#include "riverflow/grid/field_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace riverflow::analysis {

namespace fs = std::filesystem;

namespace {

constexpr double kWidth = 640.0, kHeight = 400.0;
constexpr double kLeft = 70.0, kRight = 150.0, kTop = 40.0, kBottom = 50.0;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string fixed(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string label(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

std::string escape(const std::string& s)
{
    std::string out;
    for (char c : s) {
        if (c == '<') out += "&lt;";
        else if (c == '>') out += "&gt;";
        else if (c == '&') out += "&amp;";
        else out += c;
    }
    return out;
}

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    void add(double v)
    {
        if (!std::isfinite(v)) return;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    void settle()
    {
        if (lo > hi) lo = 0.0, hi = 1.0;
        if (lo == hi) {
            const double pad = lo == 0.0 ? 1.0 : 0.5 * std::abs(lo);
            lo -= pad;
            hi += pad;
        }
    }
};

std::string header(const std::string& title)
{
    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << fixed(kWidth / 2) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << escape(title)
      << "</text>\n";
    return s.str();
}

struct Frame {
    Range xr, yr;
    double px(double x) const { return kLeft + (x - xr.lo) / (xr.hi - xr.lo) * (kWidth - kLeft - kRight); }
    double py(double y) const { return kHeight - kBottom - (y - yr.lo) / (yr.hi - yr.lo) * (kHeight - kTop - kBottom); }
};

std::string axes(const Frame& f, const std::string& x_label, const std::string& y_label, bool x_ticks)
{
    std::ostringstream s;
    const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
    s << "<path d=\"M" << fixed(x0) << ' ' << fixed(y1) << " L" << fixed(x0) << ' ' << fixed(y0) << " L" << fixed(x1)
      << ' ' << fixed(y0) << "\" stroke=\"black\" fill=\"none\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double yv = f.yr.lo + (f.yr.hi - f.yr.lo) * i / 4.0;
        s << "<text x=\"" << fixed(x0 - 6) << "\" y=\"" << fixed(f.py(yv) + 4) << "\" text-anchor=\"end\">"
          << label(yv) << "</text>\n";
        if (x_ticks) {
            const double xv = f.xr.lo + (f.xr.hi - f.xr.lo) * i / 4.0;
            s << "<text x=\"" << fixed(f.px(xv)) << "\" y=\"" << fixed(y0 + 16) << "\" text-anchor=\"middle\">"
              << label(xv) << "</text>\n";
        }
    }
    s << "<text x=\"" << fixed((x0 + x1) / 2) << "\" y=\"" << fixed(kHeight - 12) << "\" text-anchor=\"middle\">"
      << escape(x_label) << "</text>\n";
    s << "<text x=\"16\" y=\"" << fixed((y0 + y1) / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << fixed((y0 + y1) / 2) << ")\">" << escape(y_label) << "</text>\n";
    return s.str();
}

std::string ramp(double t)
{
    // Dark blue to yellow through teal.
    const double c0[3] = {68, 1, 84}, c1[3] = {33, 145, 140}, c2[3] = {253, 231, 37};
    t = std::clamp(t, 0.0, 1.0);
    double rgb[3];
    for (int k = 0; k < 3; ++k)
        rgb[k] = t < 0.5 ? c0[k] + (c1[k] - c0[k]) * t * 2.0 : c1[k] + (c2[k] - c1[k]) * (t - 0.5) * 2.0;
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", int(std::lround(rgb[0])), int(std::lround(rgb[1])),
                  int(std::lround(rgb[2])));
    return buf;
}

} // namespace

std::string format_double(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string svg_line_plot(const std::string& title, const std::string& x_label, const std::string& y_label,
                          const std::vector<Series>& series)
{
    Frame f;
    for (const auto& s : series) {
        require(s.x.size() == s.y.size(), "series '" + s.label + "' has unequal x and y lengths");
        for (double v : s.x) f.xr.add(v);
        for (double v : s.y) f.yr.add(v);
    }
    f.xr.settle();
    f.yr.settle();
    std::ostringstream out;
    out << header(title) << axes(f, x_label, y_label, true);
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        const char* colour = kPalette[k % std::size(kPalette)];
        out << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            out << (i ? " " : "") << fixed(f.px(s.x[i])) << ',' << fixed(f.py(s.y[i]));
        }
        out << "\"/>\n";
        const double ly = kTop + 16.0 * double(k);
        out << "<line x1=\"" << fixed(kWidth - kRight + 10) << "\" y1=\"" << fixed(ly) << "\" x2=\""
            << fixed(kWidth - kRight + 30) << "\" y2=\"" << fixed(ly) << "\" stroke=\"" << colour
            << "\" stroke-width=\"2\"/>\n";
        out << "<text x=\"" << fixed(kWidth - kRight + 35) << "\" y=\"" << fixed(ly + 4) << "\">" << escape(s.label)
            << "</text>\n";
    }
    out << "</svg>\n";
    return out.str();
}

std::string svg_box_plot(const std::string& title, const std::string& y_label, const DischargeErrorBins& bins)
{
    Frame f;
    f.xr = {0.0, double(std::max<std::size_t>(1, bins.bins.size()))};
    for (const auto& b : bins.bins) {
        for (double v : b.errors) f.yr.add(v);
    }
    f.yr.settle();
    std::ostringstream out;
    out << header(title) << axes(f, "discharge bin [m3/s]", y_label, false);
    for (std::size_t k = 0; k < bins.bins.size(); ++k) {
        const auto& b = bins.bins[k];
        const double cx = f.px(double(k) + 0.5), half = 0.3 * (f.px(1.0) - f.px(0.0));
        out << "<text x=\"" << fixed(cx) << "\" y=\"" << fixed(kHeight - kBottom + 16) << "\" text-anchor=\"middle\">"
            << label(b.q_low) << "-" << label(b.q_high) << "</text>\n";
        if (b.box.count == 0) {
            out << "<text x=\"" << fixed(cx) << "\" y=\"" << fixed(f.py((f.yr.lo + f.yr.hi) / 2))
                << "\" text-anchor=\"middle\">empty</text>\n";
            continue;
        }
        const auto& s = b.box;
        out << "<line x1=\"" << fixed(cx) << "\" y1=\"" << fixed(f.py(s.whisker_low)) << "\" x2=\"" << fixed(cx)
            << "\" y2=\"" << fixed(f.py(s.whisker_high)) << "\" stroke=\"black\"/>\n";
        out << "<rect x=\"" << fixed(cx - half) << "\" y=\"" << fixed(f.py(s.q3)) << "\" width=\"" << fixed(2 * half)
            << "\" height=\"" << fixed(std::max(0.0, f.py(s.q1) - f.py(s.q3)))
            << "\" fill=\"#9ecae1\" stroke=\"black\"/>\n";
        out << "<line x1=\"" << fixed(cx - half) << "\" y1=\"" << fixed(f.py(s.median)) << "\" x2=\""
            << fixed(cx + half) << "\" y2=\"" << fixed(f.py(s.median)) << "\" stroke=\"#d62728\" stroke-width=\"2\"/>\n";
        for (double o : s.outliers)
            out << "<circle cx=\"" << fixed(cx) << "\" cy=\"" << fixed(f.py(o))
                << "\" r=\"2.5\" fill=\"none\" stroke=\"black\"/>\n";
    }
    out << "</svg>\n";
    return out.str();
}

std::string svg_heatmap(const std::string& title, const grid::ScalarField& field)
{
    const auto& shape = field.shape();
    require(shape.node_count() > 0, "heatmap of an empty field");
    const double lo = field.min(), hi = field.max();
    const double plot_w = kWidth - kLeft - kRight, plot_h = kHeight - kTop - kBottom;
    const double cw = plot_w / double(shape.n_along), ch = plot_h / double(shape.n_across);
    std::ostringstream out;
    out << header(title);
    for (std::size_t j = 0; j < shape.n_along; ++j)
        for (std::size_t i = 0; i < shape.n_across; ++i) {
            const double t = hi > lo ? (field.at(i, j) - lo) / (hi - lo) : 0.0;
            out << "<rect x=\"" << fixed(kLeft + double(j) * cw) << "\" y=\""
                << fixed(kTop + double(shape.n_across - 1 - i) * ch) << "\" width=\"" << fixed(cw + 0.05)
                << "\" height=\"" << fixed(ch + 0.05) << "\" fill=\"" << ramp(t) << "\"/>\n";
        }
    out << "<text x=\"" << fixed(kLeft + plot_w / 2) << "\" y=\"" << fixed(kHeight - 12)
        << "\" text-anchor=\"middle\">along index</text>\n";
    const double lx = kWidth - kRight + 20;
    if (hi > lo) {
        for (int k = 0; k < 10; ++k)
            out << "<rect x=\"" << fixed(lx) << "\" y=\"" << fixed(kTop + 20.0 * (9 - k)) << "\" width=\"16\" height=\"20\" fill=\""
                << ramp(k / 9.0) << "\"/>\n";
        out << "<text x=\"" << fixed(lx + 22) << "\" y=\"" << fixed(kTop + 10) << "\">" << label(hi) << "</text>\n";
        out << "<text x=\"" << fixed(lx + 22) << "\" y=\"" << fixed(kTop + 195) << "\">" << label(lo) << "</text>\n";
    } else {
        out << "<rect x=\"" << fixed(lx) << "\" y=\"" << fixed(kTop) << "\" width=\"16\" height=\"20\" fill=\""
            << ramp(0.0) << "\"/>\n";
        out << "<text x=\"" << fixed(lx + 22) << "\" y=\"" << fixed(kTop + 14) << "\">" << label(lo) << "</text>\n";
    }
    out << "</svg>\n";
    return out.str();
}

void write_text(const fs::path& path, const std::string& text)
{
    std::error_code ec;
    if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out << text;
    if (!out) throw InputError("cannot write " + path.string());
}

void emit_sensitivity(const fs::path& dir, const std::vector<SensitivityReport>& reports)
{
    require(!reports.empty(), "no sensitivity reports to write");
    const std::size_t n = reports.front().delta_rmse.size();
    std::ostringstream csv;
    csv << "component";
    for (const auto& r : reports) {
        require(r.delta_rmse.size() == n, "sensitivity reports differ in length");
        csv << ",sigma_" << r.tag << ",delta_rmse_" << r.tag;
    }
    csv << '\n';
    for (std::size_t l = 0; l < n; ++l) {
        csv << l + 1;
        for (const auto& r : reports) csv << ',' << format_double(r.sigma[l]) << ',' << format_double(r.delta_rmse[l]);
        csv << '\n';
    }
    write_text(dir / "sensitivity.csv", csv.str());
    std::vector<Series> series;
    for (const auto& r : reports) {
        Series s{r.tag, {}, r.delta_rmse};
        for (std::size_t l = 0; l < n; ++l) s.x.push_back(double(l + 1));
        series.push_back(std::move(s));
    }
    write_text(dir / "sensitivity.svg", svg_line_plot("Latent sensitivity", "latent component", "delta RMSE [m/s]", series));
}

void emit_partial(const fs::path& dir, const std::vector<PartialResult>& results)
{
    std::ostringstream csv;
    csv << "sections,rmse\n";
    Series s{"rmse", {}, {}};
    for (const auto& r : results) {
        csv << r.sections << ',' << format_double(r.rmse) << '\n';
        s.x.push_back(double(r.sections));
        s.y.push_back(r.rmse);
    }
    write_text(dir / "partial_eval.csv", csv.str());
    write_text(dir / "partial_eval.svg",
               svg_line_plot("Error with partially measured bed", "measured cross sections S", "RMSE [m/s]", {s}));
}

void emit_error_bins(const fs::path& dir, const DischargeErrorBins& bins)
{
    std::ostringstream csv;
    csv << "q_low,q_high,count,q1,median,q3,whisker_low,whisker_high,outliers\n";
    for (const auto& b : bins.bins) {
        csv << format_double(b.q_low) << ',' << format_double(b.q_high) << ',' << b.box.count;
        if (b.box.count == 0) {
            csv << ",,,,,,\n";
            continue;
        }
        csv << ',' << format_double(b.box.q1) << ',' << format_double(b.box.median) << ',' << format_double(b.box.q3)
            << ',' << format_double(b.box.whisker_low) << ',' << format_double(b.box.whisker_high) << ',';
        for (std::size_t i = 0; i < b.box.outliers.size(); ++i)
            csv << (i ? ";" : "") << format_double(b.box.outliers[i]);
        csv << '\n';
    }
    write_text(dir / "error_bins.csv", csv.str());
    write_text(dir / "error_bins.svg", svg_box_plot("Per-sample error by discharge", "RMSE [m/s]", bins));
}

void emit_ensemble(const fs::path& dir, const std::string& stem, const surrogate::EnsembleStats& stats)
{
    fs::create_directories(dir);
    grid::save_field(stats.mean, dir / (stem + "_mean.rfs"));
    grid::save_field(stats.std, dir / (stem + "_std.rfs"));
    write_text(dir / (stem + "_mean.svg"), svg_heatmap(stem + " ensemble mean", stats.mean));
    write_text(dir / (stem + "_std.svg"), svg_heatmap(stem + " ensemble standard deviation", stats.std));
}

} // namespace riverflow::analysis
