#include "sheat/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <locale>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "sheat/errors.hpp"

namespace sheat {

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os.imbue(std::locale::classic());
    os << std::setprecision(17) << v;
    return os.str();
}

double parse_double(const std::string& key, const std::string& s) {
    std::istringstream is(boost::trim_copy(s));
    is.imbue(std::locale::classic());
    double v = 0;
    if (!(is >> v) || !is.eof()) throw ConfigError(key + ": expected a number, got '" + s + "'");
    return v;
}

long long parse_int(const std::string& key, const std::string& s) {
    const double v = parse_double(key, s);
    if (v != std::floor(v) || std::abs(v) > 9.0e15) throw ConfigError(key + ": expected an integer, got '" + s + "'");
    return static_cast<long long>(v);
}

std::uint64_t parse_uint(const std::string& key, const std::string& s) {
    const std::string t = boost::trim_copy(s);
    if (t.empty() || t.find_first_not_of("0123456789") != std::string::npos) {
        throw ConfigError(key + ": expected a nonnegative integer, got '" + s + "'");
    }
    try {
        return std::stoull(t);
    } catch (const std::exception&) {
        throw ConfigError(key + ": integer out of range: '" + s + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& s) {
    const std::string t = boost::to_lower_copy(boost::trim_copy(s));
    if (t == "true" || t == "1" || t == "yes") return true;
    if (t == "false" || t == "0" || t == "no") return false;
    throw ConfigError(key + ": expected true or false, got '" + s + "'");
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> parts;
    const std::string t = boost::trim_copy(s);
    if (t.empty()) return parts;
    boost::split(parts, t, boost::is_any_of(","));
    for (auto& p : parts) boost::trim(p);
    return parts;
}

std::vector<double> parse_doubles(const std::string& key, const std::string& s) {
    std::vector<double> out;
    for (const auto& p : split_list(s)) out.push_back(parse_double(key, p));
    return out;
}

std::string join_doubles(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + fmt(v[i]);
    return out;
}

std::string join_strings(const std::vector<std::string>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
    return out;
}

struct Key {
    std::string name; // section.key
    std::function<void(ExperimentConfig&, const std::string&)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

#define SHEAT_DOUBLE(NAME, FIELD) \
    Key{NAME, [](ExperimentConfig& c, const std::string& v) { c.FIELD = parse_double(NAME, v); }, \
        [](const ExperimentConfig& c) { return fmt(c.FIELD); }}
#define SHEAT_INT(NAME, FIELD) \
    Key{NAME, [](ExperimentConfig& c, const std::string& v) { c.FIELD = static_cast<int>(parse_int(NAME, v)); }, \
        [](const ExperimentConfig& c) { return std::to_string(c.FIELD); }}
#define SHEAT_UINT(NAME, FIELD) \
    Key{NAME, [](ExperimentConfig& c, const std::string& v) { c.FIELD = parse_uint(NAME, v); }, \
        [](const ExperimentConfig& c) { return std::to_string(c.FIELD); }}
#define SHEAT_STRING(NAME, FIELD) \
    Key{NAME, [](ExperimentConfig& c, const std::string& v) { c.FIELD = boost::trim_copy(v); }, \
        [](const ExperimentConfig& c) { return c.FIELD; }}
#define SHEAT_DOUBLES(NAME, FIELD) \
    Key{NAME, [](ExperimentConfig& c, const std::string& v) { c.FIELD = parse_doubles(NAME, v); }, \
        [](const ExperimentConfig& c) { return join_doubles(c.FIELD); }}

const std::vector<Key>& registry() {
    static const std::vector<Key> keys = {
        SHEAT_DOUBLE("model.nu", nu),
        Key{"model.boundary",
            [](ExperimentConfig& c, const std::string& v) {
                try {
                    c.boundary = boundary_from_string(boost::trim_copy(v));
                } catch (const DomainError& e) {
                    throw ConfigError(std::string("model.boundary: ") + e.what());
                }
            },
            [](const ExperimentConfig& c) { return std::string(to_string(c.boundary)); }},
        SHEAT_STRING("model.sigma", sigma),
        SHEAT_DOUBLE("model.sigma_c", sigma_c),
        SHEAT_DOUBLE("model.sigma_d", sigma_d),
        SHEAT_DOUBLES("model.lambdas", lambdas),
        SHEAT_STRING("model.u0", u0),
        SHEAT_DOUBLE("model.u0_gamma", u0_gamma),
        SHEAT_INT("model.u0_mode", u0_mode),
        SHEAT_DOUBLE("model.u0_amplitude", u0_amplitude),
        SHEAT_INT("grid.n_interior", n_interior),
        SHEAT_DOUBLE("grid.dt", dt),
        SHEAT_DOUBLE("grid.horizon", horizon),
        Key{"simulation.scheme",
            [](ExperimentConfig& c, const std::string& v) {
                try {
                    c.scheme = scheme_from_string(boost::trim_copy(v));
                } catch (const DomainError& e) {
                    throw ConfigError(std::string("simulation.scheme: ") + e.what());
                }
            },
            [](const ExperimentConfig& c) { return std::string(to_string(c.scheme)); }},
        SHEAT_INT("simulation.n_modes", n_modes),
        SHEAT_UINT("simulation.n_samples", n_samples),
        SHEAT_UINT("simulation.master_seed", master_seed),
        SHEAT_UINT("simulation.block_size", block_size),
        SHEAT_DOUBLES("simulation.observation_times", observation_times),
        SHEAT_INT("simulation.observation_count", observation_count),
        SHEAT_UINT("simulation.sample_index", sample_index),
        SHEAT_DOUBLES("moments.p", p),
        Key{"moments.functionals",
            [](ExperimentConfig& c, const std::string& v) { c.functionals = split_list(v); },
            [](const ExperimentConfig& c) { return join_strings(c.functionals); }},
        SHEAT_DOUBLE("moments.x", x),
        SHEAT_STRING("oracle.backend", backend),
        SHEAT_INT("oracle.panels", panels),
        Key{"oracle.error_estimate",
            [](ExperimentConfig& c, const std::string& v) { c.error_estimate = parse_bool("oracle.error_estimate", v); },
            [](const ExperimentConfig& c) { return std::string(c.error_estimate ? "true" : "false"); }},
        SHEAT_INT("oracle.t_points", t_points),
        SHEAT_DOUBLE("analysis.window_start", window_start),
        SHEAT_DOUBLE("analysis.confidence", confidence),
        SHEAT_DOUBLE("analysis.excitation_time", excitation_time),
        SHEAT_DOUBLE("kernel.tol", kernel_tol),
        SHEAT_DOUBLE("kernel.gamma", gamma),
        SHEAT_DOUBLE("regularity.p", grr_p),
        SHEAT_DOUBLE("regularity.delta", grr_delta),
        SHEAT_DOUBLE("regularity.epsilon", grr_epsilon),
        SHEAT_DOUBLE("regularity.time", grr_time),
        SHEAT_DOUBLE("bounds.alpha", alpha),
        SHEAT_DOUBLES("bounds.betas", betas),
        SHEAT_STRING("output.dir", output_dir),
        SHEAT_INT("run.workers", workers),
    };
    return keys;
}

#undef SHEAT_DOUBLE
#undef SHEAT_INT
#undef SHEAT_UINT
#undef SHEAT_STRING
#undef SHEAT_DOUBLES

const Key& find_key(const std::string& name) {
    for (const auto& k : registry()) {
        if (k.name == name) return k;
    }
    throw ConfigError("unknown configuration key '" + name + "'");
}

} // namespace

std::vector<std::string> config_keys() {
    std::vector<std::string> out;
    for (const auto& k : registry()) out.push_back(k.name);
    return out;
}

void set_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    find_key(key).set(cfg, value);
}

void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("override must be section.key=value: '" + assignment + "'");
    set_value(cfg, boost::trim_copy(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

ExperimentConfig parse_config(const std::string& ini_text) {
    boost::property_tree::ptree tree;
    std::istringstream is(ini_text);
    try {
        boost::property_tree::ini_parser::read_ini(is, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
    ExperimentConfig cfg;
    for (const auto& [section, body] : tree) {
        if (body.empty()) throw ConfigError("key '" + section + "' must belong to a section");
        for (const auto& [key, node] : body) set_value(cfg, section + "." + key, node.data());
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string to_ini(const ExperimentConfig& cfg) {
    std::string out;
    std::string current;
    for (const auto& k : registry()) {
        const auto dot = k.name.find('.');
        const std::string section = k.name.substr(0, dot);
        if (section != current) {
            out += (current.empty() ? "" : "\n") + std::string("[") + section + "]\n";
            current = section;
        }
        out += k.name.substr(dot + 1) + " = " + k.get(cfg) + "\n";
    }
    return out;
}

void resolve_seed(ExperimentConfig& cfg, std::optional<std::uint64_t> flag_seed) {
    if (flag_seed) {
        cfg.master_seed = *flag_seed;
        return;
    }
    if (const char* env = std::getenv("SHEAT_SEED"); env != nullptr && *env != '\0') {
        cfg.master_seed = parse_uint("SHEAT_SEED", env);
    }
}

std::vector<double> ExperimentConfig::resolved_times() const {
    std::vector<double> ts;
    const long steps = std::lround(horizon / dt);
    if (!observation_times.empty()) {
        for (double t : observation_times) {
            const long k = std::lround(t / dt);
            if (std::abs(k * dt - t) > 1e-9 * dt || k <= 0 || k > steps) {
                throw ConfigError("simulation.observation_times: " + fmt(t) + " is not a positive multiple of dt within the horizon");
            }
            ts.push_back(t);
        }
    } else {
        // Nominal values where they sit on the grid, so 0.1 prints as 0.1.
        for (int i = 1; i <= observation_count; ++i) {
            const double nominal = horizon * i / observation_count;
            const long k = std::lround(static_cast<double>(steps) * i / observation_count);
            const double t = std::abs(k * dt - nominal) <= 1e-9 * dt ? nominal : static_cast<double>(k) * dt;
            if (k > 0 && (ts.empty() || t > ts.back())) ts.push_back(t);
        }
    }
    for (std::size_t i = 1; i < ts.size(); ++i) {
        if (!(ts[i] > ts[i - 1])) throw ConfigError("simulation.observation_times must be strictly increasing");
    }
    return ts;
}

SigmaSpec ExperimentConfig::sigma_spec() const {
    if (sigma == "linear") return SigmaSpec::linear(sigma_c);
    if (sigma == "linear_plus_sine") return SigmaSpec::linear_plus_sine(sigma_c, sigma_d);
    throw ConfigError("model.sigma must be linear or linear_plus_sine");
}

InitialData ExperimentConfig::initial_data() const {
    if (u0 == "bump") return InitialData::bump(u0_gamma, u0_amplitude);
    if (u0 == "sine") return InitialData::sine_mode(u0_mode, u0_amplitude);
    throw ConfigError("model.u0 must be bump or sine");
}

KernelSpec ExperimentConfig::kernel_spec() const {
    KernelSpec k;
    k.boundary = boundary;
    k.nu = nu;
    k.tol = kernel_tol;
    return k;
}

GrrParams ExperimentConfig::grr_params() const { return {grr_p, grr_delta, grr_epsilon}; }

std::vector<Functional> ExperimentConfig::functional_list() const {
    std::vector<Functional> out;
    for (double q : p) {
        for (const auto& name : functionals) {
            if (name == "pointwise") {
                out.push_back(Functional::pointwise(x, q));
            } else if (name == "lp_norm") {
                out.push_back(Functional::lp_norm(q));
            } else if (name == "sup_norm") {
                out.push_back(Functional::sup_norm(q));
            } else {
                throw ConfigError("moments.functionals: unknown functional '" + name + "'");
            }
        }
    }
    return out;
}

SimulationConfig ExperimentConfig::simulation(double lambda) const {
    SimulationConfig s;
    s.params.nu = nu;
    s.params.lambda = lambda;
    s.params.sigma = sigma_spec();
    s.params.grid.n_interior = n_interior;
    s.params.grid.dt = dt;
    s.params.grid.horizon = horizon;
    s.params.boundary = boundary;
    s.u0 = initial_data();
    s.observation_times = resolved_times();
    s.scheme = scheme;
    s.n_modes = n_modes;
    s.master_seed = master_seed;
    return s;
}

OracleConfig ExperimentConfig::oracle(double lambda) const {
    if (sigma != "linear") throw ConfigError("the oracle backend needs model.sigma = linear");
    OracleConfig o;
    o.u0 = initial_data();
    o.nu = nu;
    o.lambda = lambda;
    o.k_sigma = sigma_c;
    o.boundary = boundary;
    o.n_interior = n_interior;
    o.panels = panels;
    o.error_estimate = error_estimate;
    for (int i = 0; i <= t_points; ++i) o.t_grid.push_back(horizon * i / t_points);
    return o;
}

void ExperimentConfig::validate() const {
    auto require = [](bool ok, const std::string& msg) {
        if (!ok) throw ConfigError(msg);
    };
    require(nu > 0.0 && std::isfinite(nu), "model.nu must be positive");
    require(!lambdas.empty(), "model.lambdas must list at least one value");
    for (double l : lambdas) require(l >= 0.0 && std::isfinite(l), "model.lambdas must be nonnegative");
    require(n_interior >= 3, "grid.n_interior must be at least 3");
    require(dt > 0.0 && horizon > 0.0, "grid.dt and grid.horizon must be positive");
    require(dt <= 1.0 / (n_interior + 1) + 1e-15, "grid.dt must not exceed dx = 1 / (n_interior + 1)");
    require(n_samples >= 1, "simulation.n_samples must be at least 1");
    require(block_size >= 1, "simulation.block_size must be at least 1");
    require(observation_count >= 1, "simulation.observation_count must be at least 1");
    require(!p.empty(), "moments.p must list at least one order");
    for (double q : p) require(q >= 2.0 && std::isfinite(q), "moments.p entries must be >= 2");
    require(x >= 0.0 && x <= 1.0, "moments.x must lie in [0, 1]");
    require(backend == "oracle" || backend == "mc", "oracle.backend must be oracle or mc");
    require(panels >= 2 && t_points >= 2, "oracle.panels and oracle.t_points must be at least 2");
    require(window_start >= 0.0 && window_start < 1.0, "analysis.window_start must lie in [0, 1)");
    require(confidence > 0.0 && confidence < 1.0, "analysis.confidence must lie in (0, 1)");
    require(excitation_time > 0.0, "analysis.excitation_time must be positive");
    require(kernel_tol > 0.0, "kernel.tol must be positive");
    require(gamma > 0.0 && gamma < 0.5, "kernel.gamma must lie in (0, 1/2)");
    require(grr_time >= 0.0 && grr_time <= horizon, "regularity.time must lie in [0, horizon]");
    require(alpha > 0.0 && alpha < 1.0, "bounds.alpha must lie in (0, 1)");
    require(workers >= 0, "run.workers must be >= 0");
    require(!output_dir.empty(), "output.dir must not be empty");
    try {
        sigma_spec();
        initial_data().validate();
        grr_params().validate();
        functional_list();
        resolved_times();
        if (scheme == Scheme::Spectral) {
            require(boundary == Boundary::Dirichlet, "simulation.scheme = spectral needs Dirichlet boundary");
        }
        require(n_modes >= 0 && n_modes <= n_interior, "simulation.n_modes must lie in [0, n_interior]");
    } catch (const DomainError& e) {
        throw ConfigError(e.what());
    }
}

} // namespace sheat
