#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include "test_support.hpp"

using namespace popctl;
using namespace popctl::testing;

namespace fs = std::filesystem;

namespace {

std::string benchmark_path() { return std::string(POPCTL_SOURCE_DIR) + "/configs/benchmark.ini"; }

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string benchmark_text() { return slurp(benchmark_path()); }

/// Replaces the value of `key` in the benchmark text.
std::string with(std::string text, const std::string& key, const std::string& value) {
    const std::regex re("(^|\n)" + key + " = [^\n]*");
    std::string out = std::regex_replace(text, re, "$1" + key + " = " + value, std::regex_constants::format_first_only);
    EXPECT_NE(out, text) << key;
    return out;
}

/// Benchmark configuration on a coarse grid, for the end-to-end runs.
ExperimentConfig coarse_config() {
    std::string t = benchmark_text();
    t = with(t, "nx", "30");
    t = with(t, "nt", "12");
    t = with(t, "na", "30");
    t = with(t, "observability_trials", "3");
    t = with(t, "carleman_trials", "2");
    t = with(t, "hardy_trials", "3");
    t = with(t, "s_count", "2");
    return parse_config_text(t);
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("popctl_test_" + name);
    fs::remove_all(p);
    return p;
}

std::vector<std::string> config_errors(const std::string& text) {
    try {
        parse_config_text(text);
    } catch (const ConfigError& e) {
        return e.errors();
    }
    return {};
}

bool mentions(const std::vector<std::string>& errs, const std::string& needle) {
    for (const auto& e : errs)
        if (e.find(needle) != std::string::npos) return true;
    return false;
}

}  // namespace

TEST(Config, ParsesBenchmark) {
    const auto c = parse_config(benchmark_path());
    EXPECT_EQ(c.model.k, "power_law");
    EXPECT_EQ(c.model.alpha, 0.5);
    EXPECT_EQ(c.model.x0, 0.5);
    EXPECT_EQ(c.geometry.x0, 0.5);
    EXPECT_EQ(c.model.mu, 0.1);
    EXPECT_EQ(c.geometry.T, 0.4);
    EXPECT_EQ(c.geometry.A, 1.0);
    EXPECT_EQ(c.geometry.delta, 0.5);
    EXPECT_EQ(c.geometry.omega.lo, 0.3);
    EXPECT_EQ(c.geometry.omega.hi, 0.7);
    EXPECT_EQ(c.geometry.nx, 100u);
    EXPECT_EQ(c.geometry.nt, 40u);
    EXPECT_EQ(c.geometry.na, 100u);
    EXPECT_FALSE(c.weights.c1.has_value());
    EXPECT_FALSE(c.weights.c2.has_value());
    EXPECT_EQ(c.weights.kappa, 1e-8);
    EXPECT_EQ(c.control.epsilon_sweep, (std::vector<double>{1e-2, 1e-3, 1e-4, 1e-5}));
    EXPECT_EQ(c.s_values(), (std::vector<double>{5, 14, 23, 32, 41, 50}));
    EXPECT_EQ(c.lab.seed, 20240101u);
}

TEST(Config, AutoWeightsResolveAboveMinima) {
    const auto c = parse_config(benchmark_path());
    const auto w = c.weight_config();
    const double c2min = min_c2(c.dispersion(), c.model.gamma, c.model.x0);
    EXPECT_NEAR(c2min, 0.23570226, 1e-7);
    EXPECT_NEAR(w.c2, 1.05 * c2min, 1e-15);
    EXPECT_GT(w.c1, 0.0);
    EXPECT_NO_THROW(Weights(c.dispersion(), c.grid(), w));
}

TEST(Config, RejectsHorizonBeyondDelta) {
    const auto errs = config_errors(with(benchmark_text(), "T", "0.6"));
    ASSERT_FALSE(errs.empty());
    EXPECT_TRUE(mentions(errs, "[geometry]"));
    EXPECT_TRUE(mentions(errs, "T"));
}

TEST(Config, RejectsControlRegionWithoutDegeneracy) {
    const auto errs = config_errors(with(benchmark_text(), "omega", "0.6, 0.8"));
    ASSERT_FALSE(errs.empty());
    EXPECT_TRUE(mentions(errs, "omega"));
}

TEST(Config, RejectsUnknownKeyAndSection) {
    const std::string text = benchmark_text();
    auto errs = config_errors(with(text, "mu", "0.1\nmortality = 3"));
    EXPECT_TRUE(mentions(errs, "mortality"));
    errs = config_errors(text + "\n[extras]\nfoo = 1\n");
    EXPECT_TRUE(mentions(errs, "[extras]"));
}

TEST(Config, CollectsEveryError) {
    std::string t = with(benchmark_text(), "mu", "-1");
    t = with(t, "kappa", "0");
    t = with(t, "epsilon", "-3");
    const auto errs = config_errors(t);
    EXPECT_TRUE(mentions(errs, "mu"));
    EXPECT_TRUE(mentions(errs, "kappa"));
    EXPECT_TRUE(mentions(errs, "epsilon"));
    EXPECT_GE(errs.size(), 3u);
}

TEST(Config, RejectsMalformedValuesAndCoefficients) {
    EXPECT_TRUE(mentions(config_errors(with(benchmark_text(), "nx", "many")), "nx"));
    EXPECT_TRUE(mentions(config_errors(with(benchmark_text(), "c2", "0.1")), "c2"));
    EXPECT_TRUE(mentions(config_errors(with(benchmark_text(), "alpha", "1.5")), "alpha"));
    EXPECT_TRUE(mentions(config_errors(with(benchmark_text(), "beta", "cubic")), "beta"));
    EXPECT_THROW(parse_config("/nonexistent/file.ini"), ConfigError);
}

TEST(Config, SnapshotRoundTrip) {
    const auto c = parse_config(benchmark_path());
    const std::string ini = config_to_ini(c);
    const auto back = parse_config_text(ini);
    EXPECT_EQ(config_to_ini(back), ini);
    EXPECT_EQ(back.weight_config().c1, c.weight_config().c1);
    EXPECT_EQ(back.weight_config().c2, c.weight_config().c2);
}

TEST(Csv, FormatDoubleRoundTrips) {
    FourierEnsemble e(4);
    for (int k = 0; k < 1000; ++k) {
        const double v = (e.uniform() - 0.5) * std::pow(10.0, 40.0 * e.uniform() - 20.0);
        double back = 0.0;
        ASSERT_TRUE(parse_double(format_double(v), back));
        ASSERT_EQ(back, v);
    }
    double out;
    EXPECT_FALSE(parse_double("", out));
    EXPECT_FALSE(parse_double("1.0x", out));
    EXPECT_TRUE(parse_double(" +2.5 ", out));
    EXPECT_EQ(out, 2.5);
}

TEST(Csv, FieldRoundTripExact) {
    const auto g = bench_grid(12, 10);
    const fs::path dir = scratch("csv");
    fs::create_directories(dir);
    FourierEnsemble e(21);
    const Field traj = e.trajectory(g);
    const Field slice = e.age_space(g);
    const Field zero = Field::trajectory(g);
    Field ts = Field::time_space(g);
    for (std::size_t n = 0; n <= g.nt(); ++n)
        for (std::size_t i = 0; i <= g.nx(); ++i) ts(n, i) = e.uniform();
    write_field_csv(traj, g, (dir / "traj.csv").string());
    write_field_csv(slice, g, (dir / "slice.csv").string(), g.T());
    write_field_csv(zero, g, (dir / "zero.csv").string());
    write_field_csv(ts, g, (dir / "ts.csv").string());
    EXPECT_EQ(read_field_csv((dir / "traj.csv").string(), g, FieldShape::trajectory), traj);
    EXPECT_EQ(read_field_csv((dir / "slice.csv").string(), g, FieldShape::age_space), slice);
    EXPECT_EQ(read_field_csv((dir / "zero.csv").string(), g, FieldShape::trajectory), zero);
    EXPECT_EQ(read_field_csv((dir / "ts.csv").string(), g, FieldShape::time_space), ts);
    fs::remove_all(dir);
}

TEST(Csv, ReadErrorsNameTheProblem) {
    const auto g = bench_grid(4, 5);
    const fs::path dir = scratch("csv_err");
    fs::create_directories(dir);
    const Field f = Field::age_space(g);
    const std::string good = (dir / "good.csv").string();
    write_field_csv(f, g, good);
    std::string text = slurp(good);
    auto expect_error = [&](const std::string& body, const std::string& needle) {
        const std::string p = (dir / "bad.csv").string();
        std::ofstream(p, std::ios::binary) << body;
        try {
            read_field_csv(p, g, FieldShape::age_space);
            ADD_FAILURE() << "no error for " << needle;
        } catch (const std::runtime_error& e) {
            EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
        }
    };
    const std::size_t last = text.rfind('\n', text.size() - 2);
    expect_error(text.substr(0, last + 1), "missing grid point");
    expect_error(text + text.substr(text.find('\n') + 1, text.find('\n', text.find('\n') + 1) - text.find('\n')),
                 "duplicate point");
    expect_error(text + "0,0,0,abc\n", "non-numeric");
    expect_error(text + "0,0.13,0,1\n", "not a grid coordinate");
    expect_error("x,y\n", "header");
    expect_error(text + "0,0,0\n", "4 columns");
    EXPECT_THROW(read_field_csv((dir / "absent.csv").string(), g, FieldShape::age_space), std::runtime_error);
    fs::remove_all(dir);
}

TEST(Experiment, ValidateWritesSummaryAndManifest) {
    const auto cfg = coarse_config();
    const fs::path dir = scratch("validate");
    const auto art = run_experiment(cfg, "validate", dir.string());
    EXPECT_TRUE(art.summary["validation"]["degeneracy"]["passed"].get<bool>());
    EXPECT_TRUE(art.summary["validation"]["hardy_poincare_hypothesis"]["passed"].get<bool>());
    EXPECT_TRUE(art.summary["validation"]["rates"]["passed"].get<bool>());
    EXPECT_EQ(art.summary["weights"]["psi_negative_nodes"].get<std::size_t>(), cfg.geometry.nx + 1);
    EXPECT_EQ(art.summary["weights"]["phi_le_Phi_nodes"].get<std::size_t>(), cfg.geometry.nx + 1);
    for (const auto& f : art.files) EXPECT_TRUE(fs::exists(dir / f)) << f;
    const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
    EXPECT_EQ(manifest["command"], "validate");
    EXPECT_EQ(nlohmann::json::parse(slurp(dir / "summary.json")), art.summary);
    fs::remove_all(dir);
}

TEST(Experiment, ControlReachesTargetOnCoarseGrid) {
    const auto cfg = coarse_config();
    const fs::path dir = scratch("control");
    const auto art = run_experiment(cfg, "control", dir.string());
    const auto& c = art.summary["control"];
    EXPECT_FALSE(c["iteration_cap_hit"].get<bool>());
    EXPECT_LE(c["relative_terminal_norm"].get<double>(), 0.05);
    const auto g = cfg.grid();
    const Field ctl = read_field_csv((dir / "control.csv").string(), g, FieldShape::trajectory);
    EXPECT_EQ(control_outside_omega(ctl, g), 0u);
    EXPECT_GT(ctl.max_abs(), 0.0);
    fs::remove_all(dir);
}

TEST(Experiment, DeterministicOutputs) {
    const auto cfg = coarse_config();
    const fs::path a = scratch("det_a"), b = scratch("det_b");
    for (const std::string cmd : {"adjoint", "inequalities"}) {
        const auto ra = run_experiment(cfg, cmd, a.string());
        const auto rb = run_experiment(cfg, cmd, b.string());
        EXPECT_EQ(ra.summary, rb.summary) << cmd;
        for (const auto& f : ra.files) {
            if (f == "timings.json") continue;
            EXPECT_EQ(slurp(a / f), slurp(b / f)) << cmd << " " << f;
        }
    }
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST(Experiment, SnapshotReproducesRun) {
    const auto cfg = coarse_config();
    const fs::path a = scratch("snap_a"), b = scratch("snap_b");
    const auto first = run_experiment(cfg, "simulate", a.string());
    const auto again = parse_config((a / "config.ini").string());
    const auto second = run_experiment(again, "simulate", b.string());
    EXPECT_EQ(first.summary, second.summary);
    EXPECT_EQ(slurp(a / "trajectory.csv"), slurp(b / "trajectory.csv"));
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST(Experiment, SeedChangesEnsembles) {
    auto cfg = coarse_config();
    const fs::path a = scratch("seed_a"), b = scratch("seed_b");
    const auto ra = run_experiment(cfg, "adjoint", a.string());
    cfg.lab.seed += 1;
    const auto rb = run_experiment(cfg, "adjoint", b.string());
    EXPECT_NE(slurp(a / "terminal_data.csv"), slurp(b / "terminal_data.csv"));
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST(Experiment, UnknownCommandAndStageFailure) {
    const auto cfg = coarse_config();
    const fs::path dir = scratch("bad");
    EXPECT_THROW(run_experiment(cfg, "bogus", dir.string()), std::invalid_argument);
    auto broken = cfg;
    broken.control.maxit = 0;
    try {
        run_experiment(broken, "control", dir.string());
        ADD_FAILURE() << "expected a stage error";
    } catch (const StageError& e) {
        EXPECT_EQ(e.stage(), "control");
        EXPECT_TRUE(nlohmann::json::parse(slurp(dir / "summary.json")).contains("error"));
    }
    fs::remove_all(dir);
}

TEST(Experiment, CommandList) {
    EXPECT_EQ(experiment_commands(),
              (std::vector<std::string>{"validate", "simulate", "adjoint", "control", "inequalities", "sweep"}));
}
