#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "singlet/experiment.hpp"

using namespace singlet;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<std::string> split_lines(const std::string& text)
{
    std::vector<std::string> lines;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) {
        lines.push_back(line);
    }
    return lines;
}

const Table& find_table(const std::vector<Table>& tables, const std::string& name)
{
    for (const Table& t : tables) {
        if (t.name == name) {
            return t;
        }
    }
    throw std::runtime_error("missing table " + name);
}

} // namespace

TEST(Config, DefaultsAreValid)
{
    const ExperimentConfig c;
    EXPECT_NO_THROW(c.validate());
    EXPECT_DOUBLE_EQ(c.resolved_level_factor(), 8.0 / 9.0);
    EXPECT_EQ(c.schedule().segments.size(), 3u);
    EXPECT_EQ(c.schedule().segments[0].grid.size(), 64u);
}

TEST(Config, RoundTrip)
{
    ExperimentConfig c;
    c.atoms = 1234;
    c.spin = 0.5;
    c.level_factor = 0.75;
    c.axes = {"z", "x"};
    c.alphas = {10.0, 20.0};
    c.feedback = "postselect";
    c.threshold_ratio = 0.9;
    c.format = OutputFormat::both;
    c.seed = 99;
    EXPECT_EQ(config_from_json(to_json(c)), c);
    EXPECT_EQ(config_from_json(to_json(ExperimentConfig{})), ExperimentConfig{});
    EXPECT_EQ(config_from_json(nlohmann::json::parse(to_json(c).dump())), c);
}

TEST(Config, StrictKeys)
{
    nlohmann::json j = to_json(ExperimentConfig{});
    j["ensemble"]["colour"] = 1;
    EXPECT_THROW(config_from_json(j), ConfigError);
    nlohmann::json top = to_json(ExperimentConfig{});
    top["extra"] = true;
    EXPECT_THROW(config_from_json(top), ConfigError);
}

TEST(Config, RejectsBadValues)
{
    nlohmann::json j = to_json(ExperimentConfig{});
    j["schedule"]["grid_points"] = 1;
    EXPECT_THROW(config_from_json(j), ConfigError);
    j = to_json(ExperimentConfig{});
    j["ensemble"]["atoms"] = -5;
    EXPECT_THROW(config_from_json(j), ConfigError);
    j = to_json(ExperimentConfig{});
    j["ensemble"]["spin"] = "one";
    EXPECT_THROW(config_from_json(j), ConfigError);
    j = to_json(ExperimentConfig{});
    j["feedback"]["mode"] = "postselect";
    EXPECT_THROW(config_from_json(j), ConfigError); // no threshold
    j = to_json(ExperimentConfig{});
    j["ensemble"]["spin"] = 1.5;
    EXPECT_THROW(config_from_json(j), ConfigError); // no default Q
    j["pulse"]["level_factor"] = 0.8;
    EXPECT_NO_THROW(config_from_json(j));
}

TEST(Config, PartialConfigKeepsDefaults)
{
    const ExperimentConfig c = config_from_json(nlohmann::json::parse(R"({"ensemble": {"atoms": 1000}})"));
    EXPECT_EQ(c.atoms, 1000);
    EXPECT_DOUBLE_EQ(c.kappa_per_segment, 2.0);
}

TEST(Fig2, TracesAndEndpoints)
{
    const std::vector<Table> tables = fig2_tables(ExperimentConfig{});
    ASSERT_EQ(tables.size(), 6u);
    EXPECT_NEAR(find_table(tables, "mixed_lossless").rows.back()[1], 0.3158, 1e-4);
    EXPECT_NEAR(find_table(tables, "updown_lossless").rows.back()[1], 0.2, 1e-9);
    EXPECT_NEAR(find_table(tables, "mixed_alpha50").rows.back()[1], 0.7370, 5e-4);
    EXPECT_NEAR(find_table(tables, "mixed_alpha75").rows.back()[1], 0.6088, 5e-4);
    EXPECT_NEAR(find_table(tables, "mixed_alpha100").rows.back()[1], 0.5403, 5e-4);
    const Table& dots = find_table(tables, "exact_updown");
    EXPECT_EQ(dots.rows.size(), 16u);
    EXPECT_DOUBLE_EQ(dots.rows.front()[1], 1.0);
    // At t = 2 tau the exact model and the Gaussian up/down trace coincide.
    EXPECT_NEAR(dots.rows.back()[1], find_table(tables, "updown_lossless").rows[63][1], 1e-9);
}

TEST(Fig2, ExactTraceApproachesOneHalf)
{
    ExperimentConfig c;
    c.kappa_per_segment = 1e4; // 10 sqrt(J)
    const Table dots = exact_dots_table(c);
    EXPECT_NEAR(dots.rows.back()[1], 0.5, 0.01);
}

TEST(Tables, RenderedSchemaIsSelfDescribing)
{
    const ExperimentConfig c;
    for (const Table& t : fig2_tables(c)) {
        const auto lines = split_lines(render_table(t, c));
        std::size_t i = 0;
        while (i < lines.size() && lines[i].rfind("#", 0) == 0) {
            ++i;
        }
        ASSERT_LT(i, lines.size());
        const std::size_t header_cols = std::count(lines[i].begin(), lines[i].end(), ',') + 1;
        EXPECT_EQ(header_cols, t.columns.size());
        for (std::size_t k = i + 1; k < lines.size(); ++k) {
            EXPECT_EQ(static_cast<std::size_t>(std::count(lines[k].begin(), lines[k].end(), ',')) + 1, header_cols);
        }
        EXPECT_EQ(lines.size() - i - 1, t.rows.size());
    }
}

TEST(Tables, CommentBlockRecordsConfig)
{
    const ExperimentConfig c;
    const std::string text = render_table(postselect_table({0.678}), c);
    const auto lines = split_lines(text);
    ASSERT_GE(lines.size(), 3u);
    EXPECT_NE(lines[0].find(kVersion), std::string::npos);
    const std::string prefix = "# config: ";
    ASSERT_EQ(lines[2].rfind(prefix, 0), 0u);
    EXPECT_EQ(config_from_json(nlohmann::json::parse(lines[2].substr(prefix.size()))), c);
}

TEST(Tables, FormatValue)
{
    EXPECT_EQ(format_value(kInf), "inf");
    EXPECT_EQ(format_value(0.5), "0.5");
    EXPECT_EQ(format_value(6.0 / 19.0), "0.315789473684");
}

TEST(Postselect, Table)
{
    const Table t = postselect_table({0.678, 1.150, kInf});
    EXPECT_NEAR(t.rows[0][1], 0.50, 0.005);
    EXPECT_NEAR(t.rows[0][2], 0.14, 0.005);
    EXPECT_NEAR(t.rows[1][1], 0.75, 0.005);
    EXPECT_NEAR(t.rows[1][2], 0.37, 0.005);
    EXPECT_EQ(t.rows[2][1], 1.0);
    EXPECT_EQ(t.rows[2][2], 1.0);
    EXPECT_NEAR(t.rows[0][3], std::pow(t.rows[0][1], 3), 1e-15);
}

TEST(Sweep, Alpha)
{
    const Table t = sweep_table(ExperimentConfig{}, "alpha", {50.0, 75.0, 100.0, kInf});
    EXPECT_NEAR(t.rows[0][1], 0.737, 5e-4);
    EXPECT_NEAR(t.rows[1][1], 0.609, 5e-4);
    EXPECT_NEAR(t.rows[2][1], 0.540, 5e-4);
    EXPECT_NEAR(t.rows[3][1], 0.3158, 1e-4);
}

TEST(Sweep, SpinUsesDefaultLevelFactors)
{
    const Table t = sweep_table(ExperimentConfig{}, "j", {0.5, 1.0});
    // Per axis v u / (u + kappa^2 v) at kappa = 2, u = 1/2.
    auto closed = [](double v) { return 3.0 * v * 0.5 / (0.5 + 4.0 * v); };
    EXPECT_NEAR(t.rows[0][1], closed(0.5), 1e-12);
    EXPECT_NEAR(t.rows[1][1], closed(2.0 / 3.0), 1e-12);
}

TEST(Sweep, ThresholdAndErrors)
{
    const Table t = sweep_table(ExperimentConfig{}, "threshold_ratio", {0.678, kInf});
    // Without feedback the unselected mean spread stays in the ensemble variance.
    EXPECT_NEAR(t.rows[1][1], 2.0, 1e-9);
    EXPECT_LT(t.rows[0][1], t.rows[1][1]);
    EXPECT_GT(t.rows[0][1], 6.0 / 19.0);
    EXPECT_THROW(sweep_table(ExperimentConfig{}, "colour", {1.0}), ConfigError);
    EXPECT_THROW(sweep_table(ExperimentConfig{}, "N", {-3.0}), ConfigError);
}

TEST(Sweep, RowsAreReproducible)
{
    const ExperimentConfig c;
    const std::string a = render_table(sweep_table(c, "S0", {1e6, 5e7}), c);
    const std::string b = render_table(sweep_table(c, "S0", {1e6, 5e7}), c);
    EXPECT_EQ(a, b);
}

TEST(Output, WritesFilesAndReportsBadPaths)
{
    const auto dir = std::filesystem::temp_directory_path() / "singlet_experiment_test";
    std::filesystem::remove_all(dir);
    write_text(dir / "nested" / "x.csv", "a\n");
    EXPECT_TRUE(std::filesystem::exists(dir / "nested" / "x.csv"));
    write_text(dir / "blocker", "x");
    EXPECT_THROW(write_text(dir / "blocker" / "y.csv", "a"), IoError);
    std::filesystem::remove_all(dir);
}

TEST(Output, SvgIsDeterministic)
{
    const std::vector<Table> tables = fig2_tables(ExperimentConfig{});
    const std::string a = render_svg(tables, "t_over_tau", "xi_squared", "xi");
    EXPECT_EQ(a, render_svg(tables, "t_over_tau", "xi_squared", "xi"));
    EXPECT_EQ(a.rfind("<svg", 0), 0u);
    EXPECT_THROW(render_svg(tables, "nope", "xi_squared", "xi"), std::invalid_argument);
}
