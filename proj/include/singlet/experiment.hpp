/**
 * @file experiment.hpp
 * @brief Experiment configuration and the table-producing commands behind the CLI.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "singlet/ensemble.hpp"
#include "singlet/exact_model.hpp"
#include "singlet/oracle.hpp"
#include "singlet/postselect.hpp"
#include "singlet/qnd_gaussian.hpp"

namespace singlet {

inline constexpr const char* kVersion = "0.1.0";

/// Bad configuration or arguments (CLI exit code 2).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File-system failure (CLI exit code 3).
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class OutputFormat { table, plot, both };

inline std::string format_name(OutputFormat f)
{
    switch (f) {
    case OutputFormat::table:
        return "table";
    case OutputFormat::plot:
        return "plot";
    case OutputFormat::both:
        return "both";
    }
    return "table";
}

inline OutputFormat parse_format(const std::string& s)
{
    if (s == "table") {
        return OutputFormat::table;
    }
    if (s == "plot") {
        return OutputFormat::plot;
    }
    if (s == "both") {
        return OutputFormat::both;
    }
    throw ConfigError("unknown output format '" + s + "' (expected table, plot or both)");
}

struct ExperimentConfig {
    // ensemble
    std::int64_t atoms = 1'000'000;
    double spin = 1.0;
    // pulse
    double stokes_number = 5e7;
    double coupling_rate = 1.0;
    /// Q; defaults to 1 for j = 1/2 and 8/9 for j = 1, required otherwise.
    std::optional<double> level_factor;
    // schedule
    std::vector<std::string> axes = {"x", "y", "z"};
    double kappa_per_segment = 2.0;
    int grid_points = 64;
    // loss: one lossy trace per optical depth, plus the lossless trace
    std::vector<double> alphas = {50.0, 75.0, 100.0};
    // feedback
    std::string feedback = "reset"; // reset | reset-with-noise | postselect
    double feedback_noise = 0.0;
    std::optional<double> threshold_ratio;
    // exact-model dots in the first segment
    int exact_points = 16;
    // output
    std::string out_dir = "out";
    OutputFormat format = OutputFormat::table;
    std::uint64_t seed = 0;

    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;

    EnsembleParams ensemble() const { return EnsembleParams::from_spin(atoms, spin); }

    double resolved_level_factor() const
    {
        if (level_factor) {
            return *level_factor;
        }
        if (auto q = default_level_factor(ensemble().two_j())) {
            return *q;
        }
        throw ConfigError(fmt::format("no default level factor Q for j = {}; set pulse.level_factor", spin));
    }

    PulseParams pulse(double alpha = kInfinity) const
    {
        return PulseParams(stokes_number, coupling_rate, alpha, resolved_level_factor());
    }

    FeedbackMode feedback_mode() const
    {
        if (feedback == "reset") {
            return FeedbackMode::plain();
        }
        if (feedback == "reset-with-noise") {
            return FeedbackMode::with_noise(feedback_noise);
        }
        if (feedback == "postselect") {
            if (!threshold_ratio) {
                throw ConfigError("postselect feedback needs feedback.threshold_ratio");
            }
            return FeedbackMode::selecting(make_rule(*threshold_ratio));
        }
        throw ConfigError("unknown feedback mode '" + feedback + "'");
    }

    MeasurementSchedule schedule(double alpha = kInfinity) const
    {
        std::vector<Axis> parsed;
        for (const std::string& a : axes) {
            parsed.push_back(parse_axis(a));
        }
        MeasurementSchedule s = MeasurementSchedule::sequential(kappa_per_segment, grid_points, parsed);
        s.optical_depth = alpha;
        s.feedback = feedback_mode();
        return s;
    }

    /// Throws ConfigError on any out-of-range field.
    void validate() const
    {
        try {
            (void)ensemble();
            (void)pulse();
            for (double a : alphas) {
                if (!(a > 0.0) || !std::isfinite(a)) {
                    throw ConfigError("loss.alphas must be positive and finite");
                }
            }
            if (grid_points < 2) {
                throw ConfigError("schedule.grid_points must be >= 2");
            }
            if (exact_points < 2) {
                throw ConfigError("exact.points must be >= 2");
            }
            if (!(feedback_noise >= 0.0)) {
                throw ConfigError("feedback.noise_c must be >= 0");
            }
            (void)schedule().validate();
        } catch (const ConfigError&) {
            throw;
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    }
};

// ---------------------------------------------------------------------------
// JSON (strict: unknown keys are errors)

namespace detail {

using nlohmann::json;

inline void reject_unknown(const json& object, const std::set<std::string>& allowed, const std::string& where)
{
    if (!object.is_object()) {
        throw ConfigError(where + " must be an object");
    }
    for (const auto& item : object.items()) {
        if (!allowed.contains(item.key())) {
            throw ConfigError("unknown key '" + item.key() + "' in " + (where.empty() ? "config" : where));
        }
    }
}

template <typename T>
void read_if(const json& object, const char* key, T& out)
{
    if (object.contains(key)) {
        out = object.at(key).get<T>();
    }
}

template <typename T>
void read_optional(const json& object, const char* key, std::optional<T>& out)
{
    if (object.contains(key)) {
        const json& v = object.at(key);
        out = v.is_null() ? std::nullopt : std::optional<T>(v.get<T>());
    }
}

template <typename T>
json optional_json(const std::optional<T>& v)
{
    return v ? json(*v) : json(nullptr);
}

} // namespace detail

inline nlohmann::json to_json(const ExperimentConfig& c)
{
    using nlohmann::json;
    return json{
        {"ensemble", {{"atoms", c.atoms}, {"spin", c.spin}}},
        {"pulse",
         {{"stokes_number", c.stokes_number},
          {"coupling_rate", c.coupling_rate},
          {"level_factor", detail::optional_json(c.level_factor)}}},
        {"schedule", {{"axes", c.axes}, {"kappa_per_segment", c.kappa_per_segment}, {"grid_points", c.grid_points}}},
        {"loss", {{"alphas", c.alphas}}},
        {"feedback",
         {{"mode", c.feedback},
          {"noise_c", c.feedback_noise},
          {"threshold_ratio", detail::optional_json(c.threshold_ratio)}}},
        {"exact", {{"points", c.exact_points}}},
        {"output", {{"dir", c.out_dir}, {"format", format_name(c.format)}}},
        {"seed", c.seed},
    };
}

inline ExperimentConfig config_from_json(const nlohmann::json& j)
{
    using detail::read_if;
    using detail::reject_unknown;
    ExperimentConfig c;
    try {
        reject_unknown(j, {"ensemble", "pulse", "schedule", "loss", "feedback", "exact", "output", "seed"}, "");
        if (j.contains("ensemble")) {
            const auto& e = j.at("ensemble");
            reject_unknown(e, {"atoms", "spin"}, "ensemble");
            read_if(e, "atoms", c.atoms);
            read_if(e, "spin", c.spin);
        }
        if (j.contains("pulse")) {
            const auto& p = j.at("pulse");
            reject_unknown(p, {"stokes_number", "coupling_rate", "level_factor"}, "pulse");
            read_if(p, "stokes_number", c.stokes_number);
            read_if(p, "coupling_rate", c.coupling_rate);
            detail::read_optional(p, "level_factor", c.level_factor);
        }
        if (j.contains("schedule")) {
            const auto& s = j.at("schedule");
            reject_unknown(s, {"axes", "kappa_per_segment", "grid_points"}, "schedule");
            read_if(s, "axes", c.axes);
            read_if(s, "kappa_per_segment", c.kappa_per_segment);
            read_if(s, "grid_points", c.grid_points);
        }
        if (j.contains("loss")) {
            const auto& l = j.at("loss");
            reject_unknown(l, {"alphas"}, "loss");
            read_if(l, "alphas", c.alphas);
        }
        if (j.contains("feedback")) {
            const auto& f = j.at("feedback");
            reject_unknown(f, {"mode", "noise_c", "threshold_ratio"}, "feedback");
            read_if(f, "mode", c.feedback);
            read_if(f, "noise_c", c.feedback_noise);
            detail::read_optional(f, "threshold_ratio", c.threshold_ratio);
        }
        if (j.contains("exact")) {
            const auto& x = j.at("exact");
            reject_unknown(x, {"points"}, "exact");
            read_if(x, "points", c.exact_points);
        }
        if (j.contains("output")) {
            const auto& o = j.at("output");
            reject_unknown(o, {"dir", "format"}, "output");
            read_if(o, "dir", c.out_dir);
            if (o.contains("format")) {
                c.format = parse_format(o.at("format").get<std::string>());
            }
        }
        read_if(j, "seed", c.seed);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
    c.validate();
    return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open config " + path.string());
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("cannot parse " + path.string() + ": " + e.what());
    }
    return config_from_json(j);
}

// ---------------------------------------------------------------------------
// Tables

struct Table {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};

inline std::string format_value(double v)
{
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    if (std::isnan(v)) {
        return "nan";
    }
    return fmt::format("{:.12g}", v);
}

/// Comment block, header row, then one delimiter-separated row per entry.
inline std::string render_table(const Table& table, const ExperimentConfig& config)
{
    std::string out;
    out += fmt::format("# singlet-squeeze {}\n", kVersion);
    out += fmt::format("# table: {}\n", table.name);
    out += fmt::format("# config: {}\n", to_json(config).dump());
    for (std::size_t i = 0; i < table.columns.size(); ++i) {
        out += (i ? "," : "") + table.columns[i];
    }
    out += "\n";
    for (const auto& row : table.rows) {
        if (row.size() != table.columns.size()) {
            throw std::logic_error("table " + table.name + " has a row that does not match its header");
        }
        for (std::size_t i = 0; i < row.size(); ++i) {
            out += (i ? "," : "") + format_value(row[i]);
        }
        out += "\n";
    }
    return out;
}

inline void write_text(const std::filesystem::path& path, const std::string& text)
{
    std::error_code ec;
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) {
            throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
        }
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << text;
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

/// Self-contained SVG line plot of column `y` against column `x` for every table.
inline std::string render_svg(const std::vector<Table>& tables, const std::string& x, const std::string& y,
                              const std::string& title)
{
    constexpr double width = 720.0;
    constexpr double height = 480.0;
    constexpr double margin = 60.0;
    static const char* const palette[] = {"#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02"};

    struct Series {
        std::string name;
        std::vector<std::pair<double, double>> points;
    };
    std::vector<Series> series;
    double x_lo = kInfinity;
    double x_hi = -kInfinity;
    double y_lo = 0.0;
    double y_hi = -kInfinity;
    for (const Table& t : tables) {
        const auto xi = std::find(t.columns.begin(), t.columns.end(), x);
        const auto yi = std::find(t.columns.begin(), t.columns.end(), y);
        if (xi == t.columns.end() || yi == t.columns.end()) {
            continue;
        }
        Series s{t.name, {}};
        for (const auto& row : t.rows) {
            const double px = row[static_cast<std::size_t>(xi - t.columns.begin())];
            const double py = row[static_cast<std::size_t>(yi - t.columns.begin())];
            if (!std::isfinite(px) || !std::isfinite(py)) {
                continue;
            }
            s.points.emplace_back(px, py);
            x_lo = std::min(x_lo, px);
            x_hi = std::max(x_hi, px);
            y_lo = std::min(y_lo, py);
            y_hi = std::max(y_hi, py);
        }
        series.push_back(std::move(s));
    }
    if (series.empty() || !(x_hi > x_lo) || !(y_hi > y_lo)) {
        throw std::invalid_argument("nothing to plot for " + y + " against " + x);
    }
    auto sx = [&](double v) { return margin + (v - x_lo) / (x_hi - x_lo) * (width - 2 * margin); };
    auto sy = [&](double v) { return height - margin - (v - y_lo) / (y_hi - y_lo) * (height - 2 * margin); };

    std::string out = fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\">\n"
        "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        "<text x=\"{2}\" y=\"30\" font-family=\"sans-serif\" font-size=\"16\">{3}</text>\n",
        width, height, margin, title);
    out += fmt::format("<polyline fill=\"none\" stroke=\"black\" points=\"{},{} {},{} {},{}\"/>\n", margin, margin,
                       margin, height - margin, width - margin, height - margin);
    for (int k = 0; k <= 4; ++k) {
        const double xv = x_lo + (x_hi - x_lo) * k / 4.0;
        const double yv = y_lo + (y_hi - y_lo) * k / 4.0;
        out += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-family=\"sans-serif\" font-size=\"11\" "
                           "text-anchor=\"middle\">{:.3g}</text>\n",
                           sx(xv), height - margin + 18, xv);
        out += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-family=\"sans-serif\" font-size=\"11\" "
                           "text-anchor=\"end\">{:.3g}</text>\n",
                           margin - 6, sy(yv) + 4, yv);
    }
    out += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-family=\"sans-serif\" font-size=\"12\" "
                       "text-anchor=\"middle\">{}</text>\n",
                       width / 2, height - 15, x);
    out += fmt::format("<text x=\"15\" y=\"{:.2f}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n",
                       margin - 20, y);
    for (std::size_t i = 0; i < series.size(); ++i) {
        const char* colour = palette[i % std::size(palette)];
        std::string pts;
        for (const auto& [px, py] : series[i].points) {
            pts += fmt::format("{:.2f},{:.2f} ", sx(px), sy(py));
        }
        out += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>\n", colour,
                           pts);
        out += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-family=\"sans-serif\" font-size=\"11\" "
                           "fill=\"{}\">{}</text>\n",
                           width - margin - 150, margin + 16.0 * static_cast<double>(i + 1), colour, series[i].name);
    }
    out += "</svg>\n";
    return out;
}

// ---------------------------------------------------------------------------
// Commands

inline const std::vector<std::string>& trajectory_columns()
{
    static const std::vector<std::string> cols = {"t_over_tau", "xi_squared", "gamma_xx", "gamma_yy", "gamma_zz", "eta"};
    return cols;
}

inline Table trajectory_table(const std::string& name, const Trajectory& traj)
{
    Table t{name, trajectory_columns(), {}};
    for (const TrajectoryRow& r : traj.rows) {
        t.rows.push_back({r.t_total, r.xi_squared, r.gamma_xx, r.gamma_yy, r.gamma_zz, r.eta});
    }
    return t;
}

/// Exact-model dots for the first (Jx) segment from the up/down state.
inline Table exact_dots_table(const ExperimentConfig& config)
{
    const EnsembleParams e = config.ensemble();
    const auto two_group = exact::TwoGroupState::balanced(e.atom_count(), e.two_j());
    const double J = two_group.collective_spin();
    Table t{"exact_updown", trajectory_columns(), {}};
    for (int k = 0; k < config.exact_points; ++k) {
        const double time = config.kappa_per_segment * k / (config.exact_points - 1);
        const double var_x = time == 0.0 ? two_group.prior_variance() : exact::var_jx_exact(two_group, time);
        t.rows.push_back({time, exact::xi_exact(two_group, time), var_x / J, two_group.transverse_variance() / J,
                          0.0, 0.0});
    }
    return t;
}

/// Every trace of the squeezing-dynamics figure.
inline std::vector<Table> fig2_tables(const ExperimentConfig& config)
{
    const EnsembleParams e = config.ensemble();
    std::vector<Table> tables;
    const PulseParams lossless = config.pulse();
    tables.push_back(
        trajectory_table("mixed_lossless", run_sequence(make_completely_mixed(e, lossless), config.schedule())));
    if (e.atom_count() % 2 == 0) {
        tables.push_back(
            trajectory_table("updown_lossless", run_sequence(make_product_updown(e, lossless), config.schedule())));
    }
    for (double alpha : config.alphas) {
        const PulseParams p = config.pulse(alpha);
        tables.push_back(trajectory_table(fmt::format("mixed_alpha{}", format_value(alpha)),
                                          run_sequence(make_completely_mixed(e, p), config.schedule(alpha))));
    }
    if (e.atom_count() % 2 == 0 && (e.atom_count() / 2 * e.two_j()) % 2 == 0) {
        tables.push_back(exact_dots_table(config));
    }
    return tables;
}

inline Table postselect_table(const std::vector<double>& ratios)
{
    Table t{"postselect", {"threshold_ratio", "q", "mu", "q_cubed"}, {}};
    for (double r : ratios) {
        const PostSelectionRule rule = make_rule(r);
        t.rows.push_back({r, rule.retained_fraction, rule.variance_ratio, overall_retention(rule, 3)});
    }
    return t;
}

inline const std::vector<std::string>& sweep_parameters()
{
    static const std::vector<std::string> names = {"alpha", "S0", "N", "j", "kappa_per_segment", "threshold_ratio"};
    return names;
}

/// Final xi^2 and per-axis variances of the thermal-state sequence, one row per value.
/// Finite alpha sweeps use the lossy model; all other parameters use the lossless one.
inline Table sweep_table(const ExperimentConfig& base, const std::string& param, const std::vector<double>& values)
{
    bool known = false;
    for (const auto& n : sweep_parameters()) {
        known = known || n == param;
    }
    if (!known) {
        throw ConfigError("unknown sweep parameter '" + param + "'");
    }
    Table t{"sweep_" + param, {param, "xi_squared", "gamma_xx", "gamma_yy", "gamma_zz"}, {}};
    for (double v : values) {
        ExperimentConfig c = base;
        double alpha = kInfinity;
        try {
            if (param == "alpha") {
                alpha = v;
            } else if (param == "S0") {
                c.stokes_number = v;
            } else if (param == "N") {
                c.atoms = static_cast<std::int64_t>(std::llround(v));
            } else if (param == "j") {
                c.spin = v;
            } else if (param == "kappa_per_segment") {
                c.kappa_per_segment = v;
            } else if (param == "threshold_ratio") {
                c.feedback = "postselect";
                c.threshold_ratio = v;
            }
            const EnsembleParams e = c.ensemble();
            const GaussianState start = make_completely_mixed(e, c.pulse(alpha));
            const Trajectory traj = run_sequence(start, c.schedule(alpha));
            const GaussianState& f = traj.final_state;
            t.rows.push_back({v, xi_squared(f).xi_squared, f.cov(kJx, kJx), f.cov(kJy, kJy), f.cov(kJz, kJz)});
        } catch (const std::invalid_argument& err) {
            throw ConfigError(fmt::format("sweep {} = {}: {}", param, format_value(v), err.what()));
        }
    }
    return t;
}

/// Exact model against the Gaussian model over the first segment, and the
/// small-N oracle against the Gaussian closed form.
inline std::vector<Table> exact_compare_tables(const ExperimentConfig& config)
{
    const EnsembleParams e = config.ensemble();
    const auto two_group = exact::TwoGroupState::balanced(e.atom_count(), e.two_j());
    const double J = two_group.collective_spin();
    const GaussianState start = make_product_updown(e, config.pulse());

    Table curve{"exact_vs_gaussian", {"t_over_tau", "xi_exact", "xi_gaussian", "gamma_xx_exact", "gamma_xx_gaussian"}, {}};
    for (int k = 1; k < config.exact_points; ++k) {
        const double time = config.kappa_per_segment * k / (config.exact_points - 1);
        const GaussianState g = measure_sy(evolve(start, time)).state;
        curve.rows.push_back({time, exact::xi_exact(two_group, time), xi_squared(g).xi_squared,
                              exact::var_jx_exact(two_group, time) / J, g.cov(kJx, kJx)});
    }

    Table grid{"oracle_grid",
               {"atoms", "light_levels", "kappa", "var_x_oracle", "var_x_gaussian", "relative_error",
                "transverse_change"},
               {}};
    for (int n : {2, 4, 6}) {
        for (double kappa : {0.5, 1.0, 2.0}) {
            for (int levels : {21, 41, 81}) {
                const auto r = oracle::brute_force_oracle({n, levels, kappa});
                const double gauss = oracle::gaussian_var_jx(n, kappa);
                const double transverse0 = 0.25 * n;
                grid.rows.push_back({double(n), double(levels), kappa, r.var_x, gauss,
                                     std::abs(r.var_x - gauss) / gauss,
                                     std::abs(r.var_y + r.var_z - transverse0) / transverse0});
            }
        }
    }
    return {curve, grid};
}

} // namespace singlet
