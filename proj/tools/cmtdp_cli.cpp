// Command-line front end: run, preset, plot, dump-estimates.

#include "cmtdp/config.hpp"
#include "cmtdp/experiments.hpp"
#include "cmtdp/report.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace cmtdp;

namespace {

struct Common {
    std::string config_path;
    std::vector<std::string> sets;
    std::string out = "out";
    std::optional<std::uint64_t> seed;
    bool parallel = false;
    bool accumulate = false;
    bool dump_estimates = false;
};

void add_config_flags(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config_path, "flat key=value config file");
    cmd->add_option("--set", c.sets, "override key=value (repeatable)")->take_all();
    cmd->add_option("--out", c.out, "output directory")->capture_default_str();
    cmd->add_option("--seed", c.seed, "master seed (overrides the config)");
    cmd->add_flag("--parallel", c.parallel, "run replications concurrently");
    cmd->add_flag("--accumulate", c.accumulate, "refit on all past episodes");
}

ExperimentConfig load(const Common& c) {
    std::vector<std::string> overrides = c.sets;
    if (c.seed) {
        overrides.push_back("seed=" + std::to_string(*c.seed));
    }
    if (c.accumulate) {
        overrides.push_back("policy.accumulate=true");
    }
    std::optional<fs::path> path;
    if (!c.config_path.empty()) {
        path = c.config_path;
    }
    return parse_config(path, overrides);
}

void print_rows(const std::vector<SummaryRow>& rows) {
    for (const auto& r : rows) {
        std::cout << r.policy << "  " << r.scenario << "  d=" << r.d << "  K/n_K=" << r.K_or_nK
                  << "  final regret " << format_number(r.final_regret_mean) << " +- "
                  << format_number(r.final_regret_se) << "  reg% "
                  << format_number(r.regret_reduction_pct) << "  speed "
                  << format_number(r.speed_ratio) << '\n';
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cross-market transfer dynamic pricing simulator"};
    app.require_subcommand(1);
    app.footer("Exit codes: 0 ok, 1 failure, 2 usage, 3 missing file, 4 malformed config line,\n"
               "5 unknown key, 6 invalid value, 7 I/O error, 8 invalid input.\n\n" +
               config_reference());

    Common common;

    auto* run = app.add_subcommand("run", "simulate one configuration against the baseline");
    add_config_flags(run, common);
    run->add_flag("--dump-estimates", common.dump_estimates,
                  "write each replication's final estimate");

    std::string preset_name;
    auto* preset = app.add_subcommand("preset", "run a predefined sweep");
    preset->add_option("name", preset_name, "preset name")
        ->required()
        ->check(CLI::IsMember(preset_names()));
    add_config_flags(preset, common);

    std::vector<std::string> plot_inputs;
    std::string plot_out = "regret.svg";
    std::string plot_title;
    auto* plot = app.add_subcommand("plot", "render curve CSVs into one SVG");
    plot->add_option("inputs", plot_inputs, "curve CSV files")->required();
    plot->add_option("--out", plot_out, "SVG path")->capture_default_str();
    plot->add_option("--title", plot_title, "plot title");

    int replication = 0;
    auto* dump = app.add_subcommand("dump-estimates", "write the final estimate of a run");
    add_config_flags(dump, common);
    dump->add_option("--replication", replication, "replication index")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        DriverOptions options;
        options.parallel = common.parallel;
        options.dump_estimates = common.dump_estimates;
        options.progress = &std::cerr;

        if (*run) {
            const auto out = run_experiment(load(common), common.out, options);
            print_rows(out.rows);
        } else if (*preset) {
            const auto out = run_preset(preset_name, load(common), common.out, options);
            std::cout << out.panels << " panels, " << out.files.size() << " files in "
                      << common.out << '\n';
        } else if (*plot) {
            std::vector<Curve> curves;
            for (const auto& input : plot_inputs) {
                if (!fs::exists(input)) {
                    std::cerr << "error: no such file " << input << '\n';
                    return kExitMissingFile;
                }
                curves.emplace_back(fs::path(input).stem().string(), read_curve_csv(input));
            }
            write_svg(plot_out, curves, plot_title);
        } else if (*dump) {
            std::cout << dump_estimate(load(common), replication, common.out).string() << '\n';
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.code();
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const InvalidInput& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInvalidInput;
    } catch (const InvalidParameter& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitBadValue;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitOk;
}
