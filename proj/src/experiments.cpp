#include "cmtdp/experiments.hpp"

#include "cmtdp/config.hpp"
#include "cmtdp/estimate_io.hpp"

#include <fstream>
#include <map>
#include <ostream>

namespace cmtdp {

namespace fs = std::filesystem;

namespace {

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) {
        throw IoError("cannot create output directory " + dir.string());
    }
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    out.flush();
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
}

std::string index_value(const ExperimentConfig& config) {
    return std::to_string(config.policy == PolicyKind::cm_tdp_off ? config.n_K : config.K);
}

SummaryRow make_row(const ExperimentConfig& config, const AggregateStats& stats,
                    const Comparison& cmp) {
    SummaryRow row;
    row.policy = to_string(config.policy);
    row.scenario = scenario_label(config);
    row.d = std::to_string(config.d);
    row.K_or_nK = index_value(config);
    row.final_regret_mean = stats.final_mean;
    row.final_regret_se = stats.final_se;
    row.regret_reduction_pct = cmp.regret_reduction_pct;
    row.std_reduction_pct = cmp.std_reduction_pct;
    row.speed_ratio = cmp.speed_ratio;
    return row;
}

void note(const DriverOptions& options, const std::string& line) {
    if (options.progress) {
        *options.progress << line << std::endl;
    }
}

struct Variant {
    std::string tag;    ///< file suffix, e.g. "K5"
    std::string label;  ///< legend entry
    ExperimentConfig config;
};

struct Panel {
    std::string name;
    std::string title;
    ExperimentConfig base;
    std::vector<Variant> variants;
};

/// Runs the single-market baseline once and every variant against it.
std::vector<SummaryRow> run_panel(const Panel& panel, const fs::path& out,
                                  const DriverOptions& options, DriverOutput& result) {
    ExperimentConfig baseline_cfg = panel.base;
    baseline_cfg.policy = PolicyKind::single_market;
    note(options, "[" + panel.name + "] baseline");
    const AggregateStats baseline = aggregate(run_replications(baseline_cfg, options.parallel));

    std::vector<SummaryRow> rows;
    std::vector<Curve> curves;
    for (const auto& variant : panel.variants) {
        note(options, "[" + panel.name + "] " + variant.label);
        const AggregateStats stats =
            aggregate(run_replications(variant.config, options.parallel));
        const Comparison cmp = compare(stats, baseline, variant.config.T);
        rows.push_back(make_row(variant.config, stats, cmp));
        const fs::path csv = out / (panel.name + "_" + variant.tag + ".csv");
        write_curve_csv(csv, stats);
        result.files.push_back(csv);
        curves.emplace_back(variant.label, stats.mean_cumulative);
    }
    rows.push_back(make_row(baseline_cfg, baseline, Comparison{}));
    const fs::path base_csv = out / (panel.name + "_baseline.csv");
    write_curve_csv(base_csv, baseline);
    result.files.push_back(base_csv);
    curves.emplace_back("single market", baseline.mean_cumulative);

    const fs::path svg = out / (panel.name + ".svg");
    write_svg(svg, curves, panel.title);
    result.files.push_back(svg);
    ++result.panels;
    return rows;
}

const std::vector<int> kSweepK = {1, 3, 5, 10};
const std::vector<int> kSweepNK = {50, 100, 200, 500};
const std::vector<int> kSweepD = {10, 15, 20};

std::vector<Variant> online_variants(const ExperimentConfig& base) {
    std::vector<Variant> out;
    for (const int K : kSweepK) {
        ExperimentConfig c = base;
        c.policy = PolicyKind::cm_tdp_on;
        c.K = K;
        out.push_back({"K" + std::to_string(K), "on, K=" + std::to_string(K), c});
    }
    return out;
}

std::vector<Variant> offline_variants(const ExperimentConfig& base) {
    std::vector<Variant> out;
    for (const int n : kSweepNK) {
        ExperimentConfig c = base;
        c.policy = PolicyKind::cm_tdp_off;
        c.n_K = n;
        out.push_back({"nK" + std::to_string(n), "off, n_K=" + std::to_string(n), c});
    }
    return out;
}

std::string family_title(Family f) { return f == Family::linear ? "linear" : "RKHS"; }

/// Field-wise mean of the numeric columns; labels come from `label`.
SummaryRow mean_row(const std::vector<SummaryRow>& rows, SummaryRow label) {
    const double n = static_cast<double>(rows.size());
    label.final_regret_mean = label.final_regret_se = 0.0;
    label.regret_reduction_pct = label.std_reduction_pct = label.speed_ratio = 0.0;
    for (const auto& r : rows) {
        label.final_regret_mean += r.final_regret_mean / n;
        label.final_regret_se += r.final_regret_se / n;
        label.regret_reduction_pct += r.regret_reduction_pct / n;
        label.std_reduction_pct += r.std_reduction_pct / n;
        label.speed_ratio += r.speed_ratio / n;
    }
    return label;
}

DriverOutput figure_preset(Family family, bool online, const ExperimentConfig& base,
                           const fs::path& out, const DriverOptions& options) {
    DriverOutput result;
    for (const ScenarioKind kind : {ScenarioKind::identical, ScenarioKind::sparse_diff}) {
        for (const int d : kSweepD) {
            Panel panel;
            panel.base = base;
            panel.base.family = family;
            panel.base.kind = kind;
            panel.base.d = d;
            panel.name = to_string(kind) + "_d" + std::to_string(d);
            panel.title = family_title(family) + ", " + to_string(kind) + ", d=" +
                          std::to_string(d);
            panel.variants = online ? online_variants(panel.base) : offline_variants(panel.base);
            auto rows = run_panel(panel, out, options, result);
            result.rows.insert(result.rows.end(), rows.begin(), rows.end());
        }
    }
    const fs::path summary = out / "summary.csv";
    write_summary_csv(summary, result.rows);
    result.files.push_back(summary);
    return result;
}

/// Sparse-difference comparison table: per-d cells, their d-average, and a
/// grand average over every transfer cell.
DriverOutput table_preset(const ExperimentConfig& base, const fs::path& out,
                          const DriverOptions& options) {
    DriverOutput result;
    std::vector<SummaryRow> cells;
    for (const Family family : {Family::linear, Family::kernel}) {
        for (const int d : kSweepD) {
            Panel panel;
            panel.base = base;
            panel.base.family = family;
            panel.base.kind = ScenarioKind::sparse_diff;
            panel.base.d = d;
            panel.name = "table_" + to_string(family) + "_d" + std::to_string(d);
            panel.title = family_title(family) + ", sparse_diff, d=" + std::to_string(d);
            panel.variants = online_variants(panel.base);
            auto off = offline_variants(panel.base);
            panel.variants.insert(panel.variants.end(), off.begin(), off.end());
            auto rows = run_panel(panel, out, options, result);
            cells.insert(cells.end(), rows.begin(), rows.end());
        }
    }

    // Average each (policy, scenario, index) over d, keeping first-seen order.
    std::vector<std::string> order;
    std::map<std::string, std::vector<SummaryRow>> groups;
    for (const auto& row : cells) {
        const std::string key = row.policy + "|" + row.scenario + "|" + row.K_or_nK;
        if (!groups.count(key)) {
            order.push_back(key);
        }
        groups[key].push_back(row);
    }
    std::vector<SummaryRow> averaged;
    for (const auto& key : order) {
        SummaryRow label = groups[key].front();
        label.d = "avg";
        averaged.push_back(mean_row(groups[key], label));
    }
    std::vector<SummaryRow> transfer;
    for (const auto& row : averaged) {
        if (row.policy != to_string(PolicyKind::single_market)) {
            transfer.push_back(row);
        }
    }
    SummaryRow grand;
    grand.policy = "all_transfer";
    grand.scenario = "sparse_diff";
    grand.d = "avg";
    grand.K_or_nK = "all";
    averaged.push_back(mean_row(transfer, grand));

    result.rows = cells;
    result.rows.insert(result.rows.end(), averaged.begin(), averaged.end());
    const fs::path table = out / "table_compare.csv";
    write_summary_csv(table, result.rows);
    result.files.push_back(table);
    return result;
}

}  // namespace

std::string scenario_label(const ExperimentConfig& config) {
    return to_string(config.family) + "_" + to_string(config.kind);
}

DriverOutput run_experiment(const ExperimentConfig& config, const fs::path& out,
                            const DriverOptions& options) {
    ensure_dir(out);
    DriverOutput result;
    write_text(out / "config.txt", config_to_text(config));
    result.files.push_back(out / "config.txt");

    note(options, "running " + to_string(config.policy) + " and single_market baseline");
    const ReplicatedRun rr = run_replicated(config, PolicyKind::single_market, options.parallel);

    const std::string tag = to_string(config.policy);
    const fs::path cand_csv = out / ("curves_" + tag + ".csv");
    const fs::path base_csv = out / "curves_baseline.csv";
    write_curve_csv(cand_csv, rr.candidate);
    write_curve_csv(base_csv, rr.baseline);

    ExperimentConfig baseline_cfg = config;
    baseline_cfg.policy = PolicyKind::single_market;
    result.rows = {make_row(config, rr.candidate, rr.comparison),
                   make_row(baseline_cfg, rr.baseline, Comparison{})};
    const fs::path summary = out / "summary.csv";
    write_summary_csv(summary, result.rows);

    const fs::path svg = out / "regret.svg";
    write_svg(svg,
              {{tag, rr.candidate.mean_cumulative}, {"single market", rr.baseline.mean_cumulative}},
              scenario_label(config) + ", d=" + std::to_string(config.d));
    result.files.insert(result.files.end(), {cand_csv, base_csv, summary, svg});
    result.panels = 1;

    if (options.dump_estimates) {
        const fs::path dir = out / "estimates";
        ensure_dir(dir);
        for (int r = 0; r < config.replications; ++r) {
            result.files.push_back(dump_estimate(config, r, dir));
        }
    }
    return result;
}

const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names = {"fig_linear_on", "fig_rkhs_on",
                                                   "fig_linear_off", "fig_rkhs_off",
                                                   "table_compare"};
    return names;
}

DriverOutput run_preset(const std::string& name, const ExperimentConfig& base,
                        const fs::path& out, const DriverOptions& options) {
    bool known = false;
    for (const auto& n : preset_names()) {
        known = known || n == name;
    }
    if (!known) {
        throw InvalidParameter("unknown preset '" + name + "'");
    }
    ensure_dir(out);
    write_text(out / "config.txt", config_to_text(base));
    if (name == "table_compare") {
        return table_preset(base, out, options);
    }
    const Family family = name.find("rkhs") != std::string::npos ? Family::kernel : Family::linear;
    const bool online = name.size() >= 3 && name.compare(name.size() - 3, 3, "_on") == 0;
    return figure_preset(family, online, base, out, options);
}

fs::path dump_estimate(const ExperimentConfig& config, int replication, const fs::path& out) {
    if (replication < 0 || replication >= config.replications) {
        throw InvalidParameter("replication index " + std::to_string(replication) +
                               " outside [0, " + std::to_string(config.replications) + ")");
    }
    ensure_dir(out);
    Estimate est;
    run_single(config, replication, &est);
    const fs::path path = out / ("estimate_rep" + std::to_string(replication) + ".txt");
    std::ofstream file(path, std::ios::binary);
    write_estimate(file, est);
    file.flush();
    if (!file) {
        throw IoError("cannot write " + path.string());
    }
    return path;
}

}  // namespace cmtdp
