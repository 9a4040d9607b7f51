#pragma once

#include "cmtdp/errors.hpp"
#include "cmtdp/simulator.hpp"

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace cmtdp {

/// Output file could not be written or read.
class IoError : public Error {
public:
    using Error::Error;
};

struct SummaryRow {
    std::string policy;
    std::string scenario;
    std::string d;
    std::string K_or_nK;
    double final_regret_mean = 0.0;
    double final_regret_se = 0.0;
    double regret_reduction_pct = 0.0;
    double std_reduction_pct = 0.0;
    double speed_ratio = 1.0;
};

using Curve = std::pair<std::string, std::vector<double>>;

/// t, mean_cum_regret, se_cum_regret; one row per step.
void write_curve_csv(const std::filesystem::path& path, const AggregateStats& stats);
void write_curve_csv(const std::filesystem::path& path, const RunResult& run);

/// Reads back the mean column of a curve CSV.
std::vector<double> read_curve_csv(const std::filesystem::path& path);

void write_summary_csv(const std::filesystem::path& path, const std::vector<SummaryRow>& rows);

/// Static line plot: linear axes, one polyline per curve, legend, axis labels.
/// Throws InvalidInput when curves are empty or of unequal length.
std::string render_svg(const std::vector<Curve>& curves, const std::string& title = "");
void write_svg(const std::filesystem::path& path, const std::vector<Curve>& curves,
               const std::string& title = "");

/// Decimal with 9 significant digits.
std::string format_number(double value);

}  // namespace cmtdp
