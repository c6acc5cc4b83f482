// Command-line driver: reproduces the squeezing figure, sweeps, post-selection
// tables, exact-model comparisons and the validation suite.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "singlet/experiment.hpp"
#include "singlet/validation.hpp"

namespace {

using namespace singlet;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;

double parse_number(const std::string& text)
{
    if (text == "inf" || text == "Inf" || text == "infinity") {
        return kInfinity;
    }
    double v = 0.0;
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || end != text.data() + text.size()) {
        throw ConfigError("not a number: '" + text + "'");
    }
    return v;
}

std::vector<double> parse_numbers(const std::vector<std::string>& items)
{
    std::vector<double> out;
    for (const std::string& s : items) {
        out.push_back(parse_number(s));
    }
    return out;
}

struct GlobalOptions {
    std::string config_path;
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> format;
};

ExperimentConfig resolve_config(const GlobalOptions& g)
{
    ExperimentConfig c = g.config_path.empty() ? ExperimentConfig{} : load_config(g.config_path);
    if (g.out_dir) {
        c.out_dir = *g.out_dir;
    }
    if (g.seed) {
        c.seed = *g.seed;
    }
    if (g.format) {
        c.format = parse_format(*g.format);
    }
    c.validate();
    return c;
}

bool wants_table(const ExperimentConfig& c)
{
    return c.format != OutputFormat::plot;
}

bool wants_plot(const ExperimentConfig& c)
{
    return c.format != OutputFormat::table;
}

void emit_tables(const ExperimentConfig& c, const std::string& prefix, const std::vector<Table>& tables)
{
    if (!wants_table(c)) {
        return;
    }
    for (const Table& t : tables) {
        const std::string stem = prefix.empty() ? t.name : prefix + "_" + t.name;
        const fs::path path = fs::path(c.out_dir) / (stem + ".csv");
        write_text(path, render_table(t, c));
        std::cout << path.string() << "\n";
    }
}

void emit_plot(const ExperimentConfig& c, const std::string& stem, const std::vector<Table>& tables,
               const std::string& x, const std::string& y, const std::string& title)
{
    if (!wants_plot(c)) {
        return;
    }
    const fs::path path = fs::path(c.out_dir) / (stem + ".svg");
    write_text(path, render_svg(tables, x, y, title));
    std::cout << path.string() << "\n";
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Gaussian and exact models of QND spin squeezing toward macroscopic singlet states"};
    app.require_subcommand(1);
    app.fallthrough(); // global flags may follow the verb

    GlobalOptions g;
    std::string out_dir;
    std::uint64_t seed = 0;
    std::string format;
    app.add_option("--config", g.config_path, "JSON experiment config")->check(CLI::ExistingFile);
    auto* out_opt = app.add_option("--out", out_dir, "Output directory");
    auto* seed_opt = app.add_option("--seed", seed, "Seed for randomized checks");
    auto* format_opt =
        app.add_option("--format", format, "Output kind")->check(CLI::IsMember({"table", "plot", "both"}));

    auto* fig2 = app.add_subcommand("fig2", "Squeezing dynamics traces for the x, y, z sequence");

    auto* sweep = app.add_subcommand("sweep", "Final squeezing as one parameter varies");
    std::string sweep_param;
    std::vector<std::string> sweep_values;
    sweep->add_option("param", sweep_param, "alpha | S0 | N | j | kappa_per_segment | threshold_ratio")->required();
    sweep->add_option("values", sweep_values, "Values (inf allowed)")->required();

    auto* post = app.add_subcommand("postselect-table", "Retention q and variance ratio mu per threshold B/Delta");
    std::vector<std::string> ratios = {"0.678", "1.150", "inf"};
    post->add_option("ratios", ratios, "Threshold ratios B/Delta (inf allowed)");

    auto* compare = app.add_subcommand("exact-compare", "Exact model and small-N oracle against the Gaussian model");

    auto* validate = app.add_subcommand("validate", "Run every invariant and reference check");
    std::string report_path;
    validate->add_option("--report", report_path, "Also write the JSON report here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }
    if (*out_opt) {
        g.out_dir = out_dir;
    }
    if (*seed_opt) {
        g.seed = seed;
    }
    if (*format_opt) {
        g.format = format;
    }

    try {
        const ExperimentConfig c = resolve_config(g);
        if (*fig2) {
            const std::vector<Table> tables = fig2_tables(c);
            emit_tables(c, "fig2", tables);
            emit_plot(c, "fig2", tables, "t_over_tau", "xi_squared", "xi^2 against t / tau");
        } else if (*sweep) {
            const std::vector<Table> tables = {sweep_table(c, sweep_param, parse_numbers(sweep_values))};
            emit_tables(c, "", tables);
            emit_plot(c, "sweep_" + sweep_param, tables, sweep_param, "xi_squared", "final xi^2");
        } else if (*post) {
            for (double r : parse_numbers(ratios)) {
                if (!(r > 0.0)) {
                    throw ConfigError("threshold ratios must be positive");
                }
            }
            const std::vector<Table> tables = {postselect_table(parse_numbers(ratios))};
            emit_tables(c, "", tables);
            emit_plot(c, "postselect", tables, "threshold_ratio", "mu", "variance ratio mu");
        } else if (*compare) {
            const std::vector<Table> tables = exact_compare_tables(c);
            emit_tables(c, "exact_compare", tables);
            emit_plot(c, "exact_compare", {tables.front()}, "t_over_tau", "xi_exact", "exact-model xi^2");
        } else if (*validate) {
            const ValidationReport report = run_validation(c);
            const std::string text = report.to_json().dump(2) + "\n";
            std::cout << text;
            if (!report_path.empty()) {
                write_text(report_path, text);
            }
            for (const Check& k : report.checks) {
                if (!k.passed) {
                    std::cerr << fmt::format("FAIL {}: observed {:.6g}, expected {:.6g} +/- {:.3g} {}\n", k.name,
                                             k.observed, k.expected, k.tolerance, k.detail);
                }
            }
            return report.passed() ? kExitOk : kExitValidation;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid argument: " << e.what() << "\n";
        return kExitConfig;
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return kExitIo;
    }
    return kExitOk;
}
