#include "cmtdp/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace cmtdp {

namespace {

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
    out.flush();
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

std::string xml_escape(const std::string& text) {
    std::string out;
    for (const char c : text) {
        switch (c) {
        case '&':
            out += "&amp;";
            break;
        case '<':
            out += "&lt;";
            break;
        case '>':
            out += "&gt;";
            break;
        case '"':
            out += "&quot;";
            break;
        default:
            out += c;
        }
    }
    return out;
}

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

}  // namespace

std::string format_number(double value) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", value);
    return buf;
}

void write_curve_csv(const std::filesystem::path& path, const AggregateStats& stats) {
    auto out = open_output(path);
    out << "t,mean_cum_regret,se_cum_regret\n";
    for (std::size_t i = 0; i < stats.mean_cumulative.size(); ++i) {
        out << (i + 1) << ',' << format_number(stats.mean_cumulative[i]) << ','
            << format_number(stats.se_cumulative[i]) << '\n';
    }
    finish(out, path);
}

void write_curve_csv(const std::filesystem::path& path, const RunResult& run) {
    AggregateStats stats;
    stats.mean_cumulative = run.cumulative_regret;
    stats.se_cumulative.assign(run.cumulative_regret.size(), 0.0);
    write_curve_csv(path, stats);
}

std::vector<double> read_curve_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot read " + path.string());
    }
    std::string line;
    if (!std::getline(in, line) || line.rfind("t,mean_cum_regret", 0) != 0) {
        throw InvalidInput(path.string() + ": not a regret curve CSV");
    }
    std::vector<double> values;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        const auto first = line.find(',');
        const auto second = line.find(',', first + 1);
        if (first == std::string::npos) {
            throw InvalidInput(path.string() + ": malformed row '" + line + "'");
        }
        values.push_back(std::stod(line.substr(first + 1, second - first - 1)));
    }
    return values;
}

void write_summary_csv(const std::filesystem::path& path, const std::vector<SummaryRow>& rows) {
    auto out = open_output(path);
    out << "policy,scenario,d,K_or_nK,final_regret_mean,final_regret_se,"
           "regret_reduction_pct,std_reduction_pct,speed_ratio\n";
    for (const auto& row : rows) {
        out << row.policy << ',' << row.scenario << ',' << row.d << ',' << row.K_or_nK << ','
            << format_number(row.final_regret_mean) << ',' << format_number(row.final_regret_se)
            << ',' << format_number(row.regret_reduction_pct) << ','
            << format_number(row.std_reduction_pct) << ',' << format_number(row.speed_ratio)
            << '\n';
    }
    finish(out, path);
}

std::string render_svg(const std::vector<Curve>& curves, const std::string& title) {
    if (curves.empty() || curves.front().second.empty()) {
        throw InvalidInput("nothing to plot");
    }
    const std::size_t length = curves.front().second.size();
    double y_max = 0.0;
    double y_min = 0.0;
    for (const auto& [label, series] : curves) {
        if (series.size() != length) {
            throw InvalidInput("curve '" + label + "' has length " +
                               std::to_string(series.size()) + ", expected " +
                               std::to_string(length));
        }
        for (const double v : series) {
            y_max = std::max(y_max, v);
            y_min = std::min(y_min, v);
        }
    }
    if (y_max <= y_min) {
        y_max = y_min + 1.0;
    }

    constexpr double width = 640.0;
    constexpr double height = 420.0;
    constexpr double left = 70.0;
    constexpr double right = 20.0;
    constexpr double top = 40.0;
    constexpr double bottom = 50.0;
    const double plot_w = width - left - right;
    const double plot_h = height - top - bottom;
    const double x_span = length > 1 ? static_cast<double>(length - 1) : 1.0;
    auto px = [&](std::size_t i) { return left + plot_w * static_cast<double>(i) / x_span; };
    auto py = [&](double v) { return top + plot_h * (1.0 - (v - y_min) / (y_max - y_min)); };

    std::ostringstream svg;
    svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
    svg << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height
        << "\" fill=\"white\"/>\n";
    if (!title.empty()) {
        svg << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" "
            << "font-family=\"sans-serif\" font-size=\"14\">" << xml_escape(title) << "</text>\n";
    }
    // axes
    svg << "<line x1=\"" << left << "\" y1=\"" << py(y_min) << "\" x2=\"" << left + plot_w
        << "\" y2=\"" << py(y_min) << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
        << top + plot_h << "\" stroke=\"black\"/>\n";
    for (int tick = 0; tick <= 4; ++tick) {
        const double v = y_min + (y_max - y_min) * tick / 4.0;
        svg << "<text x=\"" << left - 6 << "\" y=\"" << py(v) + 4
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">"
            << format_number(v) << "</text>\n";
        const auto i = static_cast<std::size_t>(x_span * tick / 4.0);
        svg << "<text x=\"" << px(i) << "\" y=\"" << top + plot_h + 16
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" << i + 1
            << "</text>\n";
    }
    svg << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 10
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">t</text>\n";
    svg << "<text x=\"16\" y=\"" << top + plot_h / 2 << "\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 16 "
        << top + plot_h / 2 << ")\">cumulative regret</text>\n";

    for (std::size_t c = 0; c < curves.size(); ++c) {
        const char* colour = kPalette[c % std::size(kPalette)];
        const auto& series = curves[c].second;
        svg << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
        // Thin long series to at most ~1000 vertices.
        const std::size_t stride = std::max<std::size_t>(1, length / 1000);
        for (std::size_t i = 0; i < length; i += stride) {
            svg << format_number(px(i)) << ',' << format_number(py(series[i])) << ' ';
        }
        if ((length - 1) % stride != 0) {
            svg << format_number(px(length - 1)) << ',' << format_number(py(series.back()));
        }
        svg << "\"/>\n";
        const double ly = top + 8 + 16.0 * static_cast<double>(c);
        svg << "<g class=\"legend\"><line x1=\"" << left + 12 << "\" y1=\"" << ly << "\" x2=\""
            << left + 32 << "\" y2=\"" << ly << "\" stroke=\"" << colour
            << "\" stroke-width=\"2\"/><text x=\"" << left + 38 << "\" y=\"" << ly + 4
            << "\" font-family=\"sans-serif\" font-size=\"11\">" << xml_escape(curves[c].first)
            << "</text></g>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

void write_svg(const std::filesystem::path& path, const std::vector<Curve>& curves,
               const std::string& title) {
    const std::string content = render_svg(curves, title);
    auto out = open_output(path);
    out << content;
    finish(out, path);
}

}  // namespace cmtdp
