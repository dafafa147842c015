#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "popctl/coefficients.hpp"
#include "popctl/csv.hpp"
#include "popctl/grid.hpp"
#include "popctl/weights.hpp"

namespace popctl {

/// All problems found while loading a configuration, one message per offending key.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<std::string> errors)
        : std::runtime_error(join(errors)), errors_(std::move(errors)) {}
    [[nodiscard]] const std::vector<std::string>& errors() const { return errors_; }

private:
    static std::string join(const std::vector<std::string>& e) {
        std::string s = "invalid configuration:";
        for (const auto& m : e) s += "\n  " + m;
        return s;
    }
    std::vector<std::string> errors_;
};

struct ModelBlock {
    std::string k = "power_law";  // power_law | constant
    double alpha = 0.5;
    double k_scale = 1.0;
    double k_value = 1.0;         // for k = constant
    double x0 = 0.5;
    double mu = 0.1;              // constant mortality
    std::string beta = "quadratic";  // zero | quadratic | gated
    double beta_scale = 4.0;      // quadratic: scale·a(A−a)/A², gated: same, zero for a ≤ onset
    double beta_onset = 0.0;
    std::string y0 = "benchmark";    // benchmark | zero
    double gamma = 0.5;
    double theta = 0.5;
};

struct WeightsBlock {
    std::optional<double> c1;  // empty means auto
    std::optional<double> c2;
    double kappa = 1e-8;
    double s = 20.0;
    double s_min = 5.0;
    double s_max = 50.0;
    std::size_t s_count = 6;
};

struct ControlBlock {
    double epsilon = 1e-4;
    std::vector<double> epsilon_sweep{1e-2, 1e-3, 1e-4, 1e-5};
    double tol = 1e-6;
    std::size_t maxit = 500;
    double null_reach_target = 0.05;
};

struct LabBlock {
    std::size_t observability_trials = 50;
    std::size_t carleman_trials = 20;
    std::size_t hardy_trials = 20;
    std::size_t fourier_modes = 4;
    double fourier_decay = 1.5;
    std::uint64_t seed = 20240101;
};

struct OutputBlock {
    std::string directory = "out";
    std::string formats = "csv";
};

struct ExperimentConfig {
    ModelBlock model;
    GridParams geometry;
    WeightsBlock weights;
    ControlBlock control;
    LabBlock lab;
    OutputBlock output;

    [[nodiscard]] SpaceTimeGrid grid() const { return SpaceTimeGrid::create(geometry); }

    [[nodiscard]] Dispersion dispersion() const {
        return model.k == "constant" ? Dispersion::constant(model.k_value, model.x0)
                                     : Dispersion::power_law(model.x0, model.alpha, model.k_scale);
    }

    [[nodiscard]] CoefficientSet coefficients() const {
        CoefficientSet c;
        c.k = dispersion();
        c.diagnostic = model.k == "constant";
        c.mu = Rate::constant(model.mu);
        const double A = geometry.A, sc = model.beta_scale, onset = model.beta_onset;
        if (model.beta == "zero") c.beta = Rate::zero();
        else if (model.beta == "quadratic")
            c.beta = Rate::age_profile([A, sc](double a) { return sc * a * (A - a) / (A * A); });
        else
            c.beta = Rate::age_profile([A, sc, onset](double a) { return a <= onset ? 0.0 : sc * a * (A - a) / (A * A); });
        return c;
    }

    /// Weight parameters with "auto" entries resolved.
    [[nodiscard]] WeightConfig weight_config() const {
        WeightConfig w;
        w.kappa = weights.kappa;
        w.s = weights.s;
        w.gamma = model.gamma;
        w.theta = model.theta;
        w.c2 = weights.c2.value_or(0.0);
        w.c1 = weights.c1.value_or(0.0);
        return resolve_auto(w, dispersion(), grid(), !weights.c2, !weights.c1);
    }

    [[nodiscard]] std::vector<double> s_values() const {
        std::vector<double> s;
        if (weights.s_count == 1) return {weights.s_min};
        for (std::size_t k = 0; k < weights.s_count; ++k)
            s.push_back(weights.s_min +
                        (weights.s_max - weights.s_min) * static_cast<double>(k) / static_cast<double>(weights.s_count - 1));
        return s;
    }
};

namespace detail {

inline std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
}

/// Reads the keys of one section into typed targets and records unknown or malformed ones.
class SectionReader {
public:
    SectionReader(const boost::property_tree::ptree* node, std::string name, std::vector<std::string>& errors)
        : node_(node), name_(std::move(name)), errors_(errors) {}

    void real(const std::string& key, double& out) {
        if (auto v = take(key)) {
            if (!parse_double(*v, out) || !std::isfinite(out)) error(key, "expected a real number, got '" + *v + "'");
        }
    }
    void count(const std::string& key, std::size_t& out) {
        if (auto v = take(key)) {
            double d = 0;
            if (!parse_double(*v, d) || d < 0 || d != std::floor(d) || d > 1e9) error(key, "expected a nonnegative integer");
            else out = static_cast<std::size_t>(d);
        }
    }
    void seed(const std::string& key, std::uint64_t& out) {
        if (auto v = take(key)) {
            try {
                std::size_t pos = 0;
                out = std::stoull(*v, &pos);
                if (pos != v->size()) throw std::invalid_argument("trailing");
            } catch (const std::exception&) {
                error(key, "expected an unsigned integer");
            }
        }
    }
    void text(const std::string& key, std::string& out, const std::set<std::string>& allowed = {}) {
        if (auto v = take(key)) {
            if (!allowed.empty() && !allowed.count(*v)) {
                std::string list;
                for (const auto& a : allowed) list += (list.empty() ? "" : "|") + a;
                error(key, "expected one of " + list + ", got '" + *v + "'");
            } else {
                out = *v;
            }
        }
    }
    void interval(const std::string& key, Interval& out) {
        if (auto v = take(key)) {
            const auto parts = split(*v);
            if (parts.size() != 2 || !parse_double(parts[0], out.lo) || !parse_double(parts[1], out.hi))
                error(key, "expected 'lo, hi'");
        }
    }
    void real_list(const std::string& key, std::vector<double>& out) {
        if (auto v = take(key)) {
            std::vector<double> vals;
            for (const auto& p : split(*v)) {
                double d = 0;
                if (!parse_double(p, d)) {
                    error(key, "expected a comma-separated list of reals");
                    return;
                }
                vals.push_back(d);
            }
            out = std::move(vals);
        }
    }
    void real_or_auto(const std::string& key, std::optional<double>& out) {
        if (auto v = take(key)) {
            if (*v == "auto") {
                out.reset();
                return;
            }
            double d = 0;
            if (!parse_double(*v, d)) error(key, "expected a real number or 'auto'");
            else out = d;
        }
    }
    void finish() {
        if (!node_) return;
        for (const auto& [k, v] : *node_)
            if (!used_.count(k)) errors_.push_back("[" + name_ + "] " + k + ": unknown key");
    }

private:
    std::optional<std::string> take(const std::string& key) {
        used_.insert(key);
        if (!node_) return std::nullopt;
        auto it = node_->find(key);
        if (it == node_->not_found()) return std::nullopt;
        return trim(it->second.data());
    }
    void error(const std::string& key, const std::string& what) { errors_.push_back("[" + name_ + "] " + key + ": " + what); }
    static std::vector<std::string> split(const std::string& s) {
        std::vector<std::string> out;
        std::stringstream ss(s);
        std::string item;
        while (std::getline(ss, item, ',')) out.push_back(trim(item));
        return out;
    }

    const boost::property_tree::ptree* node_;
    std::string name_;
    std::vector<std::string>& errors_;
    std::set<std::string> used_;
};

}  // namespace detail

/// Parses INI text; throws ConfigError listing every offending key.
inline ExperimentConfig parse_config_text(const std::string& text) {
    boost::property_tree::ptree tree;
    try {
        std::istringstream in(text);
        boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError({std::string("syntax: ") + e.message() + " (line " + std::to_string(e.line()) + ")"});
    }
    std::vector<std::string> errors;
    const std::set<std::string> sections{"model", "geometry", "weights", "control", "lab", "output"};
    for (const auto& [name, node] : tree) {
        if (!sections.count(name)) errors.push_back("[" + name + "]: unknown section");
        else if (node.empty() && !node.data().empty()) errors.push_back(name + ": key outside any section");
    }
    auto section = [&](const std::string& n) -> const boost::property_tree::ptree* {
        auto it = tree.find(n);
        return it == tree.not_found() ? nullptr : &it->second;
    };

    ExperimentConfig c;
    {
        detail::SectionReader r(section("model"), "model", errors);
        r.text("k", c.model.k, {"power_law", "constant"});
        r.real("alpha", c.model.alpha);
        r.real("k_scale", c.model.k_scale);
        r.real("k_value", c.model.k_value);
        r.real("x0", c.model.x0);
        r.real("mu", c.model.mu);
        r.text("beta", c.model.beta, {"zero", "quadratic", "gated"});
        r.real("beta_scale", c.model.beta_scale);
        r.real("beta_onset", c.model.beta_onset);
        r.text("y0", c.model.y0, {"benchmark", "zero"});
        r.real("gamma", c.model.gamma);
        r.real("theta", c.model.theta);
        r.finish();
    }
    {
        detail::SectionReader r(section("geometry"), "geometry", errors);
        r.real("T", c.geometry.T);
        r.real("A", c.geometry.A);
        r.real("delta", c.geometry.delta);
        r.interval("omega", c.geometry.omega);
        r.interval("omega0", c.geometry.omega0);
        r.interval("omega_prime", c.geometry.omega_prime);
        r.count("nx", c.geometry.nx);
        r.count("nt", c.geometry.nt);
        r.count("na", c.geometry.na);
        r.finish();
    }
    {
        detail::SectionReader r(section("weights"), "weights", errors);
        r.real_or_auto("c1", c.weights.c1);
        r.real_or_auto("c2", c.weights.c2);
        r.real("kappa", c.weights.kappa);
        r.real("s", c.weights.s);
        r.real("s_min", c.weights.s_min);
        r.real("s_max", c.weights.s_max);
        r.count("s_count", c.weights.s_count);
        r.finish();
    }
    {
        detail::SectionReader r(section("control"), "control", errors);
        r.real("epsilon", c.control.epsilon);
        r.real_list("epsilon_sweep", c.control.epsilon_sweep);
        r.real("tol", c.control.tol);
        r.count("maxit", c.control.maxit);
        r.real("null_reach_target", c.control.null_reach_target);
        r.finish();
    }
    {
        detail::SectionReader r(section("lab"), "lab", errors);
        r.count("observability_trials", c.lab.observability_trials);
        r.count("carleman_trials", c.lab.carleman_trials);
        r.count("hardy_trials", c.lab.hardy_trials);
        r.count("fourier_modes", c.lab.fourier_modes);
        r.real("fourier_decay", c.lab.fourier_decay);
        r.seed("seed", c.lab.seed);
        r.finish();
    }
    {
        detail::SectionReader r(section("output"), "output", errors);
        r.text("directory", c.output.directory);
        r.text("formats", c.output.formats, {"csv"});
        r.finish();
    }
    if (!errors.empty()) throw ConfigError(errors);
    c.geometry.x0 = c.model.x0;

    // Invariants, each message naming the inequality that failed.
    try {
        (void)c.grid();
    } catch (const std::invalid_argument& e) {
        errors.emplace_back(std::string("[geometry] ") + e.what());
    }
    if (!(c.model.alpha >= 0.0 && c.model.alpha < 1.0)) errors.push_back("[model] alpha: requires 0 <= alpha < 1");
    if (!(c.model.gamma >= 0.0 && c.model.gamma < 1.0)) errors.push_back("[model] gamma: requires 0 <= gamma < 1");
    if (!(c.model.theta > 0.0 && c.model.theta <= c.model.gamma))
        errors.push_back("[model] theta: requires 0 < theta <= gamma");
    if (!(c.model.mu >= 0.0)) errors.push_back("[model] mu: requires mu >= 0");
    if (!(c.model.beta_scale >= 0.0)) errors.push_back("[model] beta_scale: requires beta >= 0");
    if (!(c.model.k_scale > 0.0) || !(c.model.k_value > 0.0)) errors.push_back("[model] k_scale/k_value: must be positive");
    if (!(c.weights.kappa > 0.0)) errors.push_back("[weights] kappa: requires kappa > 0");
    if (!(c.weights.s > 0.0)) errors.push_back("[weights] s: requires s > 0");
    if (!(c.weights.s_min > 0.0 && c.weights.s_min <= c.weights.s_max) || c.weights.s_count == 0)
        errors.push_back("[weights] s_min/s_max/s_count: requires 0 < s_min <= s_max and s_count >= 1");
    if (!(c.control.epsilon > 0.0)) errors.push_back("[control] epsilon: requires epsilon > 0");
    for (double e : c.control.epsilon_sweep)
        if (!(e > 0.0)) errors.push_back("[control] epsilon_sweep: every entry must be positive");
    if (!(c.control.tol > 0.0)) errors.push_back("[control] tol: requires tol > 0");
    if (c.control.maxit == 0) errors.push_back("[control] maxit: requires maxit >= 1");
    if (c.lab.observability_trials == 0 || c.lab.carleman_trials == 0 || c.lab.hardy_trials == 0)
        errors.push_back("[lab] *_trials: ensembles must be nonempty");
    if (!errors.empty()) throw ConfigError(errors);

    if (c.model.k == "power_law") {
        const Dispersion k = c.dispersion();
        const double c2min = min_c2(k, c.model.gamma, c.model.x0);
        if (c.weights.c2 && !(*c.weights.c2 > c2min))
            errors.push_back("[weights] c2: requires c2 > min_c2 = max{(1-x0)^2/(k(1)(2-gamma)), x0^2/(k(0)(2-gamma))} = " +
                             format_double(c2min));
        else {
            const double c2 = c.weights.c2.value_or(1.05 * c2min);
            const double c1min = min_c1(k, c.model.gamma, c.model.x0, c2, c.weights.kappa, build_sigma(c.grid()));
            if (c.weights.c1 && !(*c.weights.c1 >= c1min))
                errors.push_back("[weights] c1: requires c1 >= min_c1 = " + format_double(c1min) + " so that phi <= Phi");
        }
    }
    if (!errors.empty()) throw ConfigError(errors);
    return c;
}

inline ExperimentConfig parse_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError({"cannot open " + path});
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

/// Normalized INI text; parsing it back yields the same configuration.
inline std::string config_to_ini(const ExperimentConfig& c) {
    std::ostringstream o;
    auto iv = [](const Interval& i) { return format_double(i.lo) + ", " + format_double(i.hi); };
    auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string("auto"); };
    o << "[model]\n"
      << "k = " << c.model.k << "\nalpha = " << format_double(c.model.alpha) << "\nk_scale = " << format_double(c.model.k_scale)
      << "\nk_value = " << format_double(c.model.k_value) << "\nx0 = " << format_double(c.model.x0)
      << "\nmu = " << format_double(c.model.mu) << "\nbeta = " << c.model.beta
      << "\nbeta_scale = " << format_double(c.model.beta_scale) << "\nbeta_onset = " << format_double(c.model.beta_onset)
      << "\ny0 = " << c.model.y0 << "\ngamma = " << format_double(c.model.gamma) << "\ntheta = " << format_double(c.model.theta)
      << "\n\n[geometry]\n"
      << "T = " << format_double(c.geometry.T) << "\nA = " << format_double(c.geometry.A)
      << "\ndelta = " << format_double(c.geometry.delta)
      << "\nomega = " << iv(c.geometry.omega) << "\nomega0 = " << iv(c.geometry.omega0)
      << "\nomega_prime = " << iv(c.geometry.omega_prime) << "\nnx = " << c.geometry.nx << "\nnt = " << c.geometry.nt
      << "\nna = " << c.geometry.na << "\n\n[weights]\n"
      << "c1 = " << opt(c.weights.c1) << "\nc2 = " << opt(c.weights.c2) << "\nkappa = " << format_double(c.weights.kappa)
      << "\ns = " << format_double(c.weights.s) << "\ns_min = " << format_double(c.weights.s_min)
      << "\ns_max = " << format_double(c.weights.s_max) << "\ns_count = " << c.weights.s_count << "\n\n[control]\n"
      << "epsilon = " << format_double(c.control.epsilon) << "\nepsilon_sweep = ";
    for (std::size_t k = 0; k < c.control.epsilon_sweep.size(); ++k)
        o << (k ? ", " : "") << format_double(c.control.epsilon_sweep[k]);
    o << "\ntol = " << format_double(c.control.tol) << "\nmaxit = " << c.control.maxit
      << "\nnull_reach_target = " << format_double(c.control.null_reach_target) << "\n\n[lab]\n"
      << "observability_trials = " << c.lab.observability_trials << "\ncarleman_trials = " << c.lab.carleman_trials
      << "\nhardy_trials = " << c.lab.hardy_trials << "\nfourier_modes = " << c.lab.fourier_modes
      << "\nfourier_decay = " << format_double(c.lab.fourier_decay) << "\nseed = " << c.lab.seed << "\n\n[output]\n"
      << "directory = " << c.output.directory << "\nformats = " << c.output.formats << "\n";
    return o.str();
}

}  // namespace popctl
