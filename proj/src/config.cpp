#include "cmtdp/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace cmtdp {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, const char* why) {
    throw ConfigError(kExitBadValue, "invalid value '" + std::string(value) + "' for " +
                                         std::string(key) + ": " + why);
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
    T out{};
    const auto* end = value.data() + value.size();
    const auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (ec != std::errc() || ptr != end) {
        bad_value(key, value, "not a number");
    }
    return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
    if (value == "true" || value == "1") {
        return true;
    }
    if (value == "false" || value == "0") {
        return false;
    }
    bad_value(key, value, "expected true or false");
}

std::string format_double(double v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

struct Entry {
    const char* key;
    const char* help;
    std::function<void(ExperimentConfig&, std::string_view)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

template <typename Member>
Entry number_entry(const char* key, const char* help, Member ExperimentConfig::*member) {
    return Entry{key, help,
                 [key, member](ExperimentConfig& c, std::string_view v) {
                     c.*member = parse_number<Member>(key, v);
                 },
                 [member](const ExperimentConfig& c) {
                     if constexpr (std::is_floating_point_v<Member>) {
                         return format_double(c.*member);
                     } else {
                         return std::to_string(c.*member);
                     }
                 }};
}

template <typename Enum>
Entry enum_entry(const char* key, const char* help, Enum ExperimentConfig::*member,
                 Enum (*parse)(const std::string&), std::string (*show)(Enum)) {
    return Entry{key, help,
                 [key, member, parse](ExperimentConfig& c, std::string_view v) {
                     try {
                         c.*member = parse(std::string(v));
                     } catch (const InvalidParameter& e) {
                         bad_value(key, v, e.what());
                     }
                 },
                 [member, show](const ExperimentConfig& c) { return show(c.*member); }};
}

const std::vector<Entry>& entries() {
    using C = ExperimentConfig;
    static const std::vector<Entry> table = {
        enum_entry("scenario.family", "linear | kernel", &C::family, parse_family,
                   static_cast<std::string (*)(Family)>(to_string)),
        number_entry("scenario.d", "covariate dimension", &C::d),
        number_entry("scenario.K", "number of source markets", &C::K),
        enum_entry("scenario.kind", "identical | sparse_diff", &C::kind, parse_scenario_kind,
                   static_cast<std::string (*)(ScenarioKind)>(to_string)),
        number_entry("scenario.W", "L1 budget of linear coefficients", &C::W),
        number_entry("scenario.R", "RKHS norm of the target utility", &C::R),
        number_entry("scenario.gamma", "RBF bandwidth exp(-gamma |x-y|^2)", &C::gamma),
        number_entry("scenario.diff_fraction",
                     "sparse difference fraction (linear) / RKHS difference budget (kernel)",
                     &C::diff_fraction),
        number_entry("scenario.perturb_magnitude", "half-width of sparse coefficient shifts",
                     &C::perturb_magnitude),
        number_entry("scenario.n_centers", "kernel centers per random utility", &C::n_centers),
        number_entry("noise.scale", "logistic noise scale", &C::noise_scale),
        number_entry("noise.support_bound", "nominal noise support half-width", &C::noise_support),
        number_entry("noise.h_lookup_points", "tabulate the pricing map (0 = exact)",
                     &C::h_lookup_points),
        number_entry("run.T", "horizon", &C::T),
        number_entry("run.replications", "Monte-Carlo replications", &C::replications),
        enum_entry("policy.kind", "cm_tdp_on | cm_tdp_off | single_market | oracle", &C::policy,
                   parse_policy_kind, static_cast<std::string (*)(PolicyKind)>(to_string)),
        number_entry("policy.switch_threshold",
                     "cm_tdp_off switches once target samples reach this multiple of n_K",
                     &C::switch_threshold),
        Entry{"policy.accumulate", "refit on all past episodes (true | false)",
              [](C& c, std::string_view v) { c.accumulate = parse_bool("policy.accumulate", v); },
              [](const C& c) { return std::string(c.accumulate ? "true" : "false"); }},
        number_entry("policy.l1_multiplier", "multiplier of the default L1 debias penalty",
                     &C::l1_multiplier),
        number_entry("policy.ridge_multiplier", "multiplier of the default RKHS penalties",
                     &C::ridge_multiplier),
        number_entry("fit.rkhs_alpha", "eigen-decay exponent in the RKHS penalty schedule",
                     &C::rkhs_alpha),
        number_entry("fit.rkhs_beta", "smoothness exponent in the RKHS penalty schedule",
                     &C::rkhs_beta),
        number_entry("fit.max_iters", "solver iteration cap", &C::fit_max_iters),
        number_entry("fit.step_tolerance", "solver step-norm tolerance", &C::fit_step_tolerance),
        number_entry("fit.objective_tolerance", "solver objective-decrease tolerance",
                     &C::fit_objective_tolerance),
        number_entry("offline.n_K", "offline source log size (cm_tdp_off)", &C::n_K),
        enum_entry("offline.price_rule", "uniform_random | oracle_noisy", &C::offline_price_rule,
                   parse_price_rule, static_cast<std::string (*)(PriceRule)>(to_string)),
        enum_entry("sources.price_rule", "uniform_random | oracle_noisy", &C::source_price_rule,
                   parse_price_rule, static_cast<std::string (*)(PriceRule)>(to_string)),
        number_entry("seed", "master seed", &C::seed),
    };
    return table;
}

void apply_line(ExperimentConfig& config, std::string_view line, const std::string& where) {
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
        throw ConfigError(kExitMalformedLine, where + ": expected key=value, got '" +
                                                  std::string(line) + "'");
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
        throw ConfigError(kExitMalformedLine, where + ": empty key or value");
    }
    try {
        set_config_value(config, key, value);
    } catch (const ConfigError& e) {
        throw ConfigError(e.code(), where + ": " + e.what());
    }
}

}  // namespace

void set_config_value(ExperimentConfig& config, std::string_view key, std::string_view value) {
    for (const auto& entry : entries()) {
        if (key == entry.key) {
            entry.set(config, value);
            return;
        }
    }
    throw ConfigError(kExitUnknownKey, "unknown key '" + std::string(key) + "'");
}

ExperimentConfig parse_config_text(std::string_view text, const std::vector<std::string>& overrides,
                                   const std::string& source_name) {
    ExperimentConfig config;
    std::istringstream in{std::string(text)};
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string_view line = raw;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        apply_line(config, line, source_name + ":" + std::to_string(line_no));
    }
    for (std::size_t i = 0; i < overrides.size(); ++i) {
        apply_line(config, trim(overrides[i]), "--set #" + std::to_string(i + 1));
    }
    try {
        config.validate();
    } catch (const InvalidParameter& e) {
        throw ConfigError(kExitBadValue, std::string("out of range: ") + e.what());
    }
    return config;
}

ExperimentConfig parse_config(const std::optional<std::filesystem::path>& path,
                              const std::vector<std::string>& overrides) {
    if (!path) {
        return parse_config_text("", overrides);
    }
    std::ifstream in(*path);
    if (!in) {
        throw ConfigError(kExitMissingFile, "cannot open config file " + path->string());
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str(), overrides, path->string());
}

std::string config_to_text(const ExperimentConfig& config) {
    std::string out;
    for (const auto& entry : entries()) {
        out += entry.key;
        out += " = ";
        out += entry.get(config);
        out += '\n';
    }
    return out;
}

std::string config_reference() {
    const ExperimentConfig defaults;
    std::string out = "Configuration keys (default in brackets):\n";
    for (const auto& entry : entries()) {
        out += "  ";
        out += entry.key;
        out += " [";
        out += entry.get(defaults);
        out += "]  ";
        out += entry.help;
        out += '\n';
    }
    return out;
}

}  // namespace cmtdp
