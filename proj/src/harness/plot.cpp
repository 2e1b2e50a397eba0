#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "ctwin/harness/experiment.hpp"
#include "ctwin/io_util.hpp"

namespace ctwin::harness {

namespace {

// Fixed canvas so identical inputs produce identical bytes.
constexpr double kLeft = 64.0, kTop = 28.0, kRight = 520.0, kBottom = 430.0;
constexpr double kWidth = kRight - kLeft, kHeight = kBottom - kTop;
constexpr double kBerFloor = 1e-7;

const char *kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#e377c2"};
constexpr std::size_t kPaletteSize = sizeof(kPalette) / sizeof(kPalette[0]);

std::string f2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string fg(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

std::string xml_escape(const std::string &s) {
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

} // namespace

std::string render_plot_svg(const std::vector<ResultRow> &rows) {
    // Series keyed by variant label; map iteration keeps the order sorted.
    std::map<std::string, std::vector<const ResultRow *>> series;
    for (const ResultRow &row : rows)
        series[row.variant].push_back(&row);
    for (auto &entry : series)
        std::stable_sort(entry.second.begin(), entry.second.end(), [](const ResultRow *a, const ResultRow *b) {
            if (a->snr_db != b->snr_db)
                return a->snr_db < b->snr_db;
            return a->seed < b->seed;
        });

    // Axis ranges: SNR span from the data (defaults when empty), BER decades
    // from 1 down to the smallest clamped value.
    double x0 = 0.0, x1 = 20.0;
    int dec_min = -4;
    if (!rows.empty()) {
        x0 = rows.front().snr_db;
        x1 = rows.front().snr_db;
        double ber_min = 1.0;
        for (const ResultRow &row : rows) {
            x0 = std::min(x0, row.snr_db);
            x1 = std::max(x1, row.snr_db);
            ber_min = std::min(ber_min, std::max(row.ber, kBerFloor));
        }
        if (x0 == x1) {
            x0 -= 1.0;
            x1 += 1.0;
        }
        dec_min = static_cast<int>(std::floor(std::log10(ber_min) + 1e-12));
        dec_min = std::max(std::min(dec_min, -1), -7);
    }

    const auto xpos = [&](double snr) { return kLeft + (snr - x0) / (x1 - x0) * kWidth; };
    const auto ypos = [&](double ber) {
        const double l = std::log10(std::max(ber, kBerFloor));
        return kTop + (0.0 - l) / (0.0 - static_cast<double>(dec_min)) * kHeight;
    };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 720 480\" width=\"720\" height=\"480\">\n";
    svg << "<rect x=\"0\" y=\"0\" width=\"720\" height=\"480\" fill=\"#ffffff\"/>\n";

    // Decade grid and labels.
    for (int d = 0; d >= dec_min; --d) {
        const double y = ypos(std::pow(10.0, d));
        svg << "<line x1=\"" << f2(kLeft) << "\" y1=\"" << f2(y) << "\" x2=\"" << f2(kRight) << "\" y2=\"" << f2(y)
            << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
        svg << "<text x=\"" << f2(kLeft - 6.0) << "\" y=\"" << f2(y + 4.0)
            << "\" font-family=\"monospace\" font-size=\"12\" text-anchor=\"end\">1e" << d << "</text>\n";
    }

    // SNR ticks: the smallest step from a fixed ladder that keeps at most
    // nine ticks across the span.
    double step = 20.0;
    for (double cand : {1.0, 2.0, 4.0, 5.0, 10.0, 20.0})
        if ((x1 - x0) / cand <= 8.0) {
            step = cand;
            break;
        }
    for (double tick = std::ceil(x0 / step) * step; tick <= x1 + 1e-9; tick += step) {
        const double x = xpos(tick);
        svg << "<line x1=\"" << f2(x) << "\" y1=\"" << f2(kTop) << "\" x2=\"" << f2(x) << "\" y2=\"" << f2(kBottom)
            << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
        svg << "<text x=\"" << f2(x) << "\" y=\"" << f2(kBottom + 16.0)
            << "\" font-family=\"monospace\" font-size=\"12\" text-anchor=\"middle\">" << fg(tick) << "</text>\n";
    }

    // Frame and axis titles.
    svg << "<rect x=\"" << f2(kLeft) << "\" y=\"" << f2(kTop) << "\" width=\"" << f2(kWidth) << "\" height=\""
        << f2(kHeight) << "\" fill=\"none\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
    svg << "<text x=\"" << f2(kLeft + kWidth / 2.0) << "\" y=\"462\" font-family=\"monospace\" font-size=\"13\" "
           "text-anchor=\"middle\">SNR (dB)</text>\n";
    svg << "<text transform=\"translate(16," << f2(kTop + kHeight / 2.0)
        << ") rotate(-90)\" font-family=\"monospace\" font-size=\"13\" text-anchor=\"middle\">BER</text>\n";
    std::string title = "BER vs SNR";
    if (!rows.empty())
        title += " (" + rows.front().scenario + ")";
    svg << "<text x=\"" << f2(kLeft) << "\" y=\"18\" font-family=\"monospace\" font-size=\"14\">"
        << xml_escape(title) << "</text>\n";

    // Series: one polyline per variant, point markers on top, legend entries.
    std::size_t idx = 0;
    for (const auto &entry : series) {
        const char *color = kPalette[idx % kPaletteSize];
        svg << "<polyline class=\"series\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.8\" points=\"";
        for (std::size_t i = 0; i < entry.second.size(); ++i) {
            if (i)
                svg << ' ';
            svg << f2(xpos(entry.second[i]->snr_db)) << ',' << f2(ypos(entry.second[i]->ber));
        }
        svg << "\"/>\n";
        for (const ResultRow *row : entry.second)
            svg << "<circle cx=\"" << f2(xpos(row->snr_db)) << "\" cy=\"" << f2(ypos(row->ber))
                << "\" r=\"2.5\" fill=\"" << color << "\"/>\n";
        const double ly = 40.0 + 18.0 * static_cast<double>(idx);
        svg << "<line x1=\"536\" y1=\"" << f2(ly - 4.0) << "\" x2=\"554\" y2=\"" << f2(ly - 4.0) << "\" stroke=\""
            << color << "\" stroke-width=\"1.8\"/>\n";
        svg << "<text x=\"560\" y=\"" << f2(ly) << "\" font-family=\"monospace\" font-size=\"12\">"
            << xml_escape(entry.first) << "</text>\n";
        ++idx;
    }

    svg << "</svg>\n";
    return svg.str();
}

void emit_plot(const std::string &csv_path, const std::string &svg_path) {
    const std::vector<ResultRow> rows = read_results_csv(csv_path);
    io::AtomicFileWriter writer(svg_path);
    writer.stream() << render_plot_svg(rows);
    writer.commit();
}

} // namespace ctwin::harness
