#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "popctl/adjoint.hpp"
#include "popctl/config.hpp"
#include "popctl/csv.hpp"
#include "popctl/ensemble.hpp"
#include "popctl/forward.hpp"
#include "popctl/hum.hpp"
#include "popctl/inequality.hpp"
#include "popctl/validation.hpp"
#include "popctl/weights.hpp"

namespace popctl {

inline const std::vector<std::string>& experiment_commands() {
    static const std::vector<std::string> c{"validate", "simulate", "adjoint", "control", "inequalities", "sweep"};
    return c;
}

struct RunArtifact {
    std::string command;
    std::string config_snapshot;
    std::vector<std::string> files;  // relative to the output directory
    nlohmann::json summary;
    std::vector<std::pair<std::string, double>> stage_seconds;
};

class StageError : public std::runtime_error {
public:
    StageError(const std::string& stage, const std::string& what)
        : std::runtime_error("stage '" + stage + "' failed: " + what), stage_(stage) {}
    [[nodiscard]] const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

/// y0(a,x) = sin(πx)·a(A−a)/A².
inline Field benchmark_initial(const SpaceTimeGrid& g) {
    Field y0 = Field::age_space(g);
    for (std::size_t j = 0; j <= g.na(); ++j)
        for (std::size_t i = 1; i < g.nx(); ++i)
            y0(j, i) = std::sin(std::numbers::pi * g.x(i)) * g.a(j) * (g.A() - g.a(j)) / (g.A() * g.A());
    return y0;
}

inline Field initial_data(const ExperimentConfig& cfg, const SpaceTimeGrid& g) {
    return cfg.model.y0 == "zero" ? Field::age_space(g) : benchmark_initial(g);
}

namespace detail {

inline nlohmann::json to_json(const ValidationReport& r) {
    nlohmann::json v = nlohmann::json::array();
    for (const auto& x : r.violations) v.push_back({{"location", x.location}, {"lhs", x.lhs}, {"rhs", x.rhs}, {"what", x.what}});
    nlohmann::json j{{"name", r.name}, {"passed", r.passed}, {"fitted_gamma", r.fitted_gamma}, {"violations", v}};
    j["fitted_theta"] = r.fitted_theta ? nlohmann::json(*r.fitted_theta) : nlohmann::json(nullptr);
    return j;
}

inline nlohmann::json to_json(const InequalityReport& r) {
    nlohmann::json by_s = nlohmann::json::array();
    for (const auto& [s, v] : r.fitted_by_s()) by_s.push_back({{"s", s}, {"fitted", v}});
    return {{"name", r.name},
            {"fitted_constant", r.fitted_constant},
            {"all_finite", r.all_finite()},
            {"ensemble_size", r.ensemble_size},
            {"trivial_trials", r.trivial_trials},
            {"empirical_s0", r.empirical_s0()},
            {"fitted_by_s", by_s},
            {"grid", r.grid_signature}};
}

inline double relative_l2(const Field& a, const Field& b, const SpaceTimeGrid& g,
                          const Restriction& r = {}) {
    const double den = norm_sq(b, g, r);
    const Field d = a - b;
    const double num = norm_sq(d, g, r);
    return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

class Runner {
public:
    Runner(const ExperimentConfig& cfg, std::filesystem::path dir) : cfg_(cfg), dir_(std::move(dir)) {}

    RunArtifact run(const std::string& command) {
        art_.command = command;
        art_.config_snapshot = config_to_ini(cfg_);
        std::filesystem::create_directories(dir_);
        write_text("config.ini", art_.config_snapshot);
        art_.summary["command"] = command;
        try {
            if (command == "validate") validate();
            else if (command == "simulate") simulate();
            else if (command == "adjoint") adjoint();
            else if (command == "control") control();
            else if (command == "inequalities") inequalities();
            else if (command == "sweep") sweep();
            else throw std::invalid_argument("unknown command '" + command + "'");
        } catch (const StageError& e) {
            art_.summary["error"] = e.what();
            finish();
            throw;
        }
        finish();
        return art_;
    }

private:
    template <class F>
    void stage(const std::string& name, F&& f) {
        const auto t0 = std::chrono::steady_clock::now();
        try {
            f();
        } catch (const StageError&) {
            throw;
        } catch (const std::exception& e) {
            throw StageError(name, e.what());
        }
        art_.stage_seconds.emplace_back(name, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }

    std::string path(const std::string& name) { return (dir_ / name).string(); }
    void record(const std::string& name) { art_.files.push_back(name); }
    void write_text(const std::string& name, const std::string& text) {
        std::ofstream out(path(name), std::ios::binary);
        out << text;
        if (!out) throw std::runtime_error("cannot write " + path(name));
        record(name);
    }
    void write_field(const Field& f, const SpaceTimeGrid& g, const std::string& name, double slice = 0.0) {
        write_field_csv(f, g, path(name), slice);
        record(name);
    }
    void write_report(const InequalityReport& r, const std::string& name) {
        CsvWriter w(path(name), {"trial", "s", "lhs", "rhs", "ratio"});
        for (const auto& t : r.trials) w.row({static_cast<double>(t.trial), t.s, t.lhs, t.rhs, t.ratio});
        w.close();
        record(name);
    }

    void finish() {
        write_text("summary.json", art_.summary.dump(2) + "\n");
        nlohmann::json tj = nlohmann::json::array();
        for (const auto& [n, s] : art_.stage_seconds) tj.push_back({{"stage", n}, {"seconds", s}});
        write_text("timings.json", tj.dump(2) + "\n");
        nlohmann::json m{{"command", art_.command}, {"files", art_.files}};
        m["files"].push_back("manifest.json");
        std::ofstream out(path("manifest.json"), std::ios::binary);
        out << m.dump(2) << "\n";
        art_.files.push_back("manifest.json");
    }

    FourierEnsemble ensemble(std::uint64_t stream) const {
        return FourierEnsemble(cfg_.lab.seed * 1000003ULL + stream, cfg_.lab.fourier_modes, cfg_.lab.fourier_decay);
    }

    void validate() {
        stage("validate", [&] {
            const auto g = cfg_.grid();
            const auto c = cfg_.coefficients();
            nlohmann::json v;
            if (!c.diagnostic) {
                v["degeneracy"] = to_json(validate_degeneracy(c.k, cfg_.model.gamma, g));
                v["hardy_poincare_hypothesis"] = to_json(validate_hp(c.k, cfg_.model.theta, cfg_.model.gamma, g));
            }
            v["rates"] = to_json(validate_rates(c, g));
            art_.summary["validation"] = v;
        });
        if (cfg_.coefficients().diagnostic) return;
        stage("weights", [&] {
            const auto g = cfg_.grid();
            const auto wc = cfg_.weight_config();
            const Weights W(cfg_.dispersion(), g, wc);
            std::size_t psi_neg = 0, phi_le = 0;
            for (std::size_t i = 0; i <= g.nx(); ++i) {
                if (W.psi_node(i) < 0.0) ++psi_neg;
                if (W.psi_node(i) <= W.Psi_node(i)) ++phi_le;
            }
            nlohmann::json sup = nlohmann::json::array();
            for (int d = 1; d <= 3; ++d) {
                const auto sc = weight_sup_check(W, d);
                sup.push_back({{"d", d}, {"value", sc.value}, {"finite", std::isfinite(sc.value)},
                               {"strictly_inside", sc.strictly_inside}});
            }
            art_.summary["weights"] = {{"c1", wc.c1}, {"c2", wc.c2}, {"kappa", wc.kappa}, {"s", wc.s},
                                       {"sigma_rho", W.sigma().rho}, {"sigma_sup", W.sigma().sup_norm},
                                       {"min_c2", min_c2(W.dispersion(), wc.gamma, g.x0())},
                                       {"psi_negative_nodes", psi_neg}, {"phi_le_Phi_nodes", phi_le},
                                       {"nodes", g.nx() + 1}, {"p_over_k_max", W.p_over_k_max()}, {"sup_check", sup}};
            CsvWriter wx(path("weights_x.csv"), {"x", "psi", "Psi", "p", "sigma"});
            for (std::size_t i = 0; i <= g.nx(); ++i)
                wx.row({g.x(i), W.psi_node(i), W.Psi_node(i), W.p_node(i), W.sigma()(g.x(i))});
            wx.close();
            record("weights_x.csv");
            CsvWriter wt(path("theta_ta.csv"), {"t", "a", "theta"});
            for (std::size_t n = 1; n < g.nt(); ++n)
                for (std::size_t j = 1; j <= g.na(); ++j) wt.row({g.t(n), g.a(j), W.theta_node(n, j)});
            wt.close();
            record("theta_ta.csv");
        });
    }

    void simulate() {
        stage("simulate", [&] {
            const auto g = cfg_.grid();
            const Model m(cfg_.coefficients(), g);
            const Field y0 = initial_data(cfg_, g);
            const Field y = solve_forward(m, y0);
            const auto e = energy_report(y, m, y0);
            art_.summary["energy"] = {{"sup_t_norm", e.sup_t_norm}, {"sup_a_norm", e.sup_a_norm},
                                      {"hk_dissipation", e.hk_dissipation}, {"bound_rhs", e.bound_rhs}, {"ratio", e.ratio}};
            art_.summary["terminal_band_norm_sq"] = norm_sq(y.time_level(g.nt()), g, Restriction::band(g));
            write_field(y, g, "trajectory.csv");
            write_field(y.time_level(g.nt()), g, "terminal.csv", g.T());
        });
    }

    void adjoint() {
        stage("adjoint", [&] {
            const auto g = cfg_.grid();
            const Model m(cfg_.coefficients(), g);
            auto ens = ensemble(1);
            const Field wT = ens.age_space(g);
            const Field y0 = ens.age_space(g);
            const Field ctl = ens.trajectory(g);
            const Field w = solve_adjoint(m, wT);
            const Field trace = trace_age_zero(m, wT);
            Field row0 = Field::time_space(g);
            for (std::size_t n = 0; n <= g.nt(); ++n) {
                auto src = w.row(n, 0);
                std::copy(src.begin(), src.end(), row0.row(n).begin());
            }
            const Field y = solve_forward(m, y0, &ctl);
            const Field wband = solve_adjoint(m, ens.band(g), nullptr, true);
            double band_trace = 0.0;
            for (std::size_t n = 0; n <= g.nt(); ++n)
                for (double v : wband.row(n, 0)) band_trace = std::max(band_trace, std::abs(v));
            // Duhamel check at the first-case point nearest the middle of its region.
            const std::size_t n = g.nt() / 2;
            const std::size_t j = std::min(g.na(), n + (g.na() - g.nt()) + (g.nt() - n) / 2 + 1);
            const auto duh = duhamel_first_case(m, trace, n, j);
            const auto sol = w.row(n, j);
            double num = 0.0, den = 0.0;
            for (std::size_t i = 0; i <= g.nx(); ++i) {
                num += (duh[i] - sol[i]) * (duh[i] - sol[i]);
                den += sol[i] * sol[i];
            }
            art_.summary["adjoint"] = {
                {"trace_vs_row_relative_l2", relative_l2(trace, row0, g)},
                {"duality_residual", duality_residual(y, w, &ctl, y0, wT, g)},
                {"band_data_trace_max_abs", band_trace},
                {"duhamel_point", {{"t", g.t(n)}, {"a", g.a(j)}}},
                {"duhamel_relative_l2", den > 0.0 ? std::sqrt(num / den) : std::sqrt(num)}};
            write_field(w, g, "adjoint_trajectory.csv");
            write_field(trace, g, "trace_formula.csv");
            write_field(row0, g, "trace_solver.csv");
            write_field(wT, g, "terminal_data.csv", g.T());
        });
    }

    static nlohmann::json solution_json(const ControlSolution& s, const NullReachReport& r, double target, double opt) {
        return {{"epsilon", s.epsilon},
                {"cg_iterations", s.cg_iterations},
                {"cg_residual", s.cg_residual},
                {"iteration_cap_hit", s.iteration_cap_hit},
                {"y_final_norm_sq", s.y_final_norm_sq},
                {"control_cost", s.control_cost},
                {"cost_value", s.cost_value},
                {"relative_terminal_norm", r.relative_terminal_norm},
                {"terminal_constant", r.terminal_constant},
                {"cost_constant", r.cost_constant},
                {"optimality_defect", opt},
                {"meets_null_reach_target", r.relative_terminal_norm <= target}};
    }

    void control() {
        stage("control", [&] {
            const auto g = cfg_.grid();
            const Model m(cfg_.coefficients(), g);
            const Field y0 = initial_data(cfg_, g);
            const auto sol = solve_control(m, y0, cfg_.control.epsilon, {cfg_.control.tol, cfg_.control.maxit});
            const auto r = verify_null_reach(sol, y0, g);
            art_.summary["control"] = solution_json(sol, r, cfg_.control.null_reach_target, optimality_defect(sol, g));
            art_.summary["control"]["null_reach_target"] = cfg_.control.null_reach_target;
            write_field(sol.control, g, "control.csv");
            write_field(sol.trajectory.time_level(g.nt()), g, "controlled_terminal.csv", g.T());
            write_field(sol.terminal_adjoint, g, "terminal_adjoint.csv", g.T());
            CsvWriter h(path("cg_history.csv"), {"iteration", "relative_residual", "energy"});
            for (std::size_t k = 0; k < sol.residual_history.size(); ++k)
                h.row({static_cast<double>(k), sol.residual_history[k], sol.energy_history[k]});
            h.close();
            record("cg_history.csv");
        });
    }

    void inequalities() {
        const auto g = cfg_.grid();
        const Model m(cfg_.coefficients(), g);
        stage("observability", [&] {
            auto ens = ensemble(2);
            std::vector<Field> wTs;
            for (std::size_t t = 0; t < cfg_.lab.observability_trials; ++t) wTs.push_back(ens.band(g));
            const auto rep = observability_check(m, wTs);
            art_.summary["observability"] = to_json(rep);
            write_report(rep, "ineq_observability.csv");
        });
        stage("carleman", [&] {
            const Weights W(cfg_.dispersion(), g, cfg_.weight_config());
            auto ens = ensemble(3);
            std::vector<Field> wTs, hs;
            for (std::size_t t = 0; t < cfg_.lab.carleman_trials; ++t) wTs.push_back(ens.band(g));
            for (std::size_t t = 0; t < cfg_.lab.carleman_trials; ++t) hs.push_back(ens.trajectory(g));
            const auto res = carleman_lab(m, W, wTs, hs, cfg_.s_values());
            art_.summary["carleman_main"] = to_json(res.main);
            art_.summary["carleman_intermediate"] = to_json(res.intermediate);
            art_.summary["carleman_intermediate"]["min_boundary_right"] = res.min_boundary_right;
            art_.summary["carleman_intermediate"]["max_boundary_left"] = res.max_boundary_left;
            art_.summary["caccioppoli"] = to_json(res.caccioppoli);
            write_report(res.main, "ineq_carleman_main.csv");
            write_report(res.intermediate, "ineq_carleman_intermediate.csv");
            write_report(res.caccioppoli, "ineq_caccioppoli.csv");
        });
        stage("hardy_poincare", [&] {
            auto ens = ensemble(4);
            std::vector<std::vector<double>> nus;
            for (std::size_t t = 0; t < cfg_.lab.hardy_trials; ++t) nus.push_back(ens.space_function(g.nx()));
            const auto rep = hardy_poincare_check(nus, cfg_.dispersion(), g);
            art_.summary["hardy_poincare"] = to_json(rep);
            write_report(rep, "ineq_hardy_poincare.csv");
        });
        stage("weight_sup", [&] {
            const Weights W(cfg_.dispersion(), g, cfg_.weight_config());
            CsvWriter w(path("weight_sup.csv"), {"s", "d", "value", "n", "j", "i", "strictly_inside"});
            nlohmann::json j = nlohmann::json::array();
            for (double s : cfg_.s_values())
                for (int d = 1; d <= 3; ++d) {
                    const auto sc = weight_sup_check(W.with_s(s), d);
                    w.row({s, static_cast<double>(d), sc.value, static_cast<double>(sc.n), static_cast<double>(sc.j),
                           static_cast<double>(sc.i), sc.strictly_inside ? 1.0 : 0.0});
                    j.push_back({{"s", s}, {"d", d}, {"value", sc.value}, {"strictly_inside", sc.strictly_inside}});
                }
            w.close();
            record("weight_sup.csv");
            art_.summary["weight_sup"] = j;
        });
    }

    void sweep() {
        const auto g = cfg_.grid();
        const Model m(cfg_.coefficients(), g);
        stage("epsilon_sweep", [&] {
            const Field y0 = initial_data(cfg_, g);
            const auto sols = epsilon_sweep(m, y0, cfg_.control.epsilon_sweep, {cfg_.control.tol, cfg_.control.maxit});
            CsvWriter w(path("sweep_epsilon.csv"), {"epsilon", "cg_iterations", "cg_residual", "y_final_norm_sq",
                                                    "control_cost", "terminal_constant", "cost_constant"});
            nlohmann::json runs = nlohmann::json::array();
            std::vector<double> eps, yf;
            for (const auto& s : sols) {
                const auto r = verify_null_reach(s, y0, g);
                w.row({s.epsilon, static_cast<double>(s.cg_iterations), s.cg_residual, s.y_final_norm_sq, s.control_cost,
                       r.terminal_constant, r.cost_constant});
                runs.push_back(solution_json(s, r, cfg_.control.null_reach_target, optimality_defect(s, g)));
                if (s.y_final_norm_sq > 0.0) {
                    eps.push_back(s.epsilon);
                    yf.push_back(s.y_final_norm_sq);
                }
            }
            w.close();
            record("sweep_epsilon.csv");
            art_.summary["epsilon_sweep"] = {{"runs", runs}};
            art_.summary["epsilon_sweep"]["loglog_slope"] =
                eps.size() >= 2 ? nlohmann::json(loglog_slope(eps, yf)) : nlohmann::json(nullptr);
        });
        stage("s_sweep", [&] {
            const Weights W(cfg_.dispersion(), g, cfg_.weight_config());
            auto ens = ensemble(3);
            std::vector<Field> wTs, hs;
            for (std::size_t t = 0; t < cfg_.lab.carleman_trials; ++t) wTs.push_back(ens.band(g));
            for (std::size_t t = 0; t < cfg_.lab.carleman_trials; ++t) hs.push_back(ens.trajectory(g));
            const auto res = carleman_lab(m, W, wTs, hs, cfg_.s_values());
            const auto fm = res.main.fitted_by_s(), fi = res.intermediate.fitted_by_s(), fc = res.caccioppoli.fitted_by_s();
            CsvWriter w(path("sweep_s.csv"), {"s", "carleman_main", "carleman_intermediate", "caccioppoli"});
            nlohmann::json j = nlohmann::json::array();
            for (double s : cfg_.s_values()) {
                const auto get = [s](const std::map<double, double>& mm) {
                    auto it = mm.find(s);
                    return it == mm.end() ? 0.0 : it->second;
                };
                w.row({s, get(fm), get(fi), get(fc)});
                j.push_back({{"s", s}, {"carleman_main", get(fm)}, {"carleman_intermediate", get(fi)}, {"caccioppoli", get(fc)}});
            }
            w.close();
            record("sweep_s.csv");
            art_.summary["s_sweep"] = j;
        });
    }

    const ExperimentConfig& cfg_;
    std::filesystem::path dir_;
    RunArtifact art_;
};

}  // namespace detail

/// Runs one pipeline and writes its CSVs, summary.json, timings.json, manifest.json and config.ini into `out_dir`.
inline RunArtifact run_experiment(const ExperimentConfig& cfg, const std::string& command, const std::string& out_dir) {
    return detail::Runner(cfg, out_dir).run(command);
}

}  // namespace popctl
