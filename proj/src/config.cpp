#include "bsre/config.hpp"

#include "bsre/errors.hpp"
#include "bsre/expression.hpp"
#include "bsre/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace bsre {

using nlohmann::json;

namespace {

// Object reader that rejects keys nobody asked for.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw InvalidConfiguration(where() + " must be an object");
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key) && !j_.at(key).is_null();
    }

    const json& at(const std::string& key) {
        if (!has(key)) throw InvalidConfiguration(where(key) + " is required");
        return j_.at(key);
    }

    double number(const std::string& key) {
        const json& v = at(key);
        if (!v.is_number()) throw InvalidConfiguration(where(key) + " must be a number");
        const double d = v.get<double>();
        if (!std::isfinite(d)) throw InvalidConfiguration(where(key) + " must be finite");
        return d;
    }
    double number(const std::string& key, double fallback) { return has(key) ? number(key) : fallback; }
    std::optional<double> optional_number(const std::string& key) {
        return has(key) ? std::optional<double>(number(key)) : std::nullopt;
    }

    std::uint64_t count(const std::string& key) {
        const json& v = at(key);
        if (!v.is_number_unsigned()) {
            throw InvalidConfiguration(where(key) + " must be a non-negative integer");
        }
        return v.get<std::uint64_t>();
    }
    std::uint64_t count(const std::string& key, std::uint64_t fallback) { return has(key) ? count(key) : fallback; }

    std::string text(const std::string& key) {
        const json& v = at(key);
        if (!v.is_string()) throw InvalidConfiguration(where(key) + " must be a string");
        return v.get<std::string>();
    }

    bool flag(const std::string& key, bool fallback) {
        if (!has(key)) return fallback;
        const json& v = at(key);
        if (!v.is_boolean()) throw InvalidConfiguration(where(key) + " must be true or false");
        return v.get<bool>();
    }

    std::vector<double> numbers(const std::string& key) {
        const json& v = at(key);
        if (!v.is_array()) throw InvalidConfiguration(where(key) + " must be an array of numbers");
        std::vector<double> out;
        for (const auto& e : v) {
            if (!e.is_number() || !std::isfinite(e.get<double>())) {
                throw InvalidConfiguration(where(key) + " must contain finite numbers only");
            }
            out.push_back(e.get<double>());
        }
        return out;
    }

    std::vector<std::string> strings(const std::string& key) {
        const json& v = at(key);
        std::vector<std::string> out;
        if (v.is_string()) {
            out.push_back(v.get<std::string>());
            return out;
        }
        if (!v.is_array()) throw InvalidConfiguration(where(key) + " must be an expression or an array of them");
        for (const auto& e : v) {
            if (!e.is_string()) throw InvalidConfiguration(where(key) + " must contain expression strings only");
            out.push_back(e.get<std::string>());
        }
        return out;
    }

    Section child(const std::string& key) { return Section(at(key), where(key)); }

    void finish() const {
        for (const auto& [key, value] : j_.items()) {
            if (!seen_.count(key)) throw InvalidConfiguration("unknown key " + where(key));
        }
    }

    std::string where(const std::string& key = {}) const {
        if (key.empty()) return path_.empty() ? "config" : "'" + path_ + "'";
        return "'" + (path_.empty() ? key : path_ + "." + key) + "'";
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

ModelVariant parse_variant(const std::string& name) {
    for (ModelVariant v : {ModelVariant::ConstantDiagonal, ModelVariant::DeterministicSchedule,
                           ModelVariant::ScalarRandomField}) {
        if (to_string(v) == name) return v;
    }
    throw InvalidConfiguration("unknown model variant '" + name +
                               "' (expected constant-diagonal, deterministic-schedule or scalar-random-field)");
}

void check_length(const std::vector<double>& v, std::size_t n, const std::string& name) {
    if (v.size() != 1 && v.size() != n) {
        throw InvalidConfiguration("'model." + name + "' must have length 1 or N = " + std::to_string(n));
    }
}

void check_length(const std::vector<std::string>& v, std::size_t n, const std::string& name) {
    if (v.size() != 1 && v.size() != n) {
        throw InvalidConfiguration("'model." + name + "' must have length 1 or N = " + std::to_string(n));
    }
}

void check_single(const std::vector<std::string>& v, const std::string& name) {
    if (v.size() != 1) throw InvalidConfiguration("'model." + name + "' must be a single expression");
}

void check_rho(double rho) {
    if (!(rho > 0.25 && rho < 0.5)) {
        std::ostringstream os;
        os.precision(17);
        os << "'model.rho' = " << rho << " must lie in the open interval (1/4, 1/2)";
        throw InvalidConfiguration(os.str());
    }
}

ModelSpec parse_model(Section sec) {
    ModelSpec m;
    m.variant = parse_variant(sec.text("variant"));
    m.n = sec.count("N");
    if (m.n == 0) throw InvalidConfiguration("'model.N' must be at least 1");
    m.rho = sec.number("rho");
    check_rho(m.rho);
    m.horizon = sec.number("T");
    if (!(m.horizon > 0.0)) throw InvalidConfiguration("'model.T' must be positive");
    m.steps = sec.count("steps");
    if (m.steps == 0) throw InvalidConfiguration("'model.steps' must be at least 1");
    if (sec.has("bounds")) {
        Section b = sec.child("bounds");
        ModelBounds bounds;
        bounds.m_c = b.number("M_C");
        bounds.m_b = b.number("M_B");
        bounds.m_s = b.optional_number("M_S");
        b.finish();
        if (bounds.m_c < 0.0 || bounds.m_b < 0.0 || (bounds.m_s && *bounds.m_s < 0.0)) {
            throw InvalidConfiguration("'model.bounds' entries must be non-negative");
        }
        m.bounds = bounds;
    }
    m.m = sec.numbers("m");
    check_length(m.m, m.n, "m");
    switch (m.variant) {
        case ModelVariant::ConstantDiagonal:
            m.c = sec.numbers("c");
            m.b = sec.numbers("b");
            m.s = sec.numbers("s");
            check_length(m.c, m.n, "c");
            check_length(m.b, m.n, "b");
            check_length(m.s, m.n, "s");
            break;
        case ModelVariant::DeterministicSchedule:
            m.c_expr = sec.strings("c");
            m.b_expr = sec.strings("b");
            m.s_expr = sec.strings("s");
            check_length(m.c_expr, m.n, "c");
            check_length(m.b_expr, m.n, "b");
            check_length(m.s_expr, m.n, "s");
            break;
        case ModelVariant::ScalarRandomField:
            m.c_expr = sec.strings("c");
            m.s_expr = sec.strings("s");
            check_single(m.c_expr, "c");
            check_single(m.s_expr, "s");
            m.b = sec.numbers("b");
            check_length(m.b, m.n, "b");
            if (sec.has("profile")) m.profile = sec.text("profile");
            if (!m.bounds) throw InvalidConfiguration("'model.bounds' is required for scalar-random-field models");
            break;
    }
    sec.finish();
    return m;
}

SolverSpec parse_solver(Section sec) {
    SolverSpec s;
    if (sec.has("backend")) s.backend = parse_backend(sec.text("backend"));
    s.delta = sec.optional_number("delta");
    if (s.delta && !(*s.delta > 0.0)) throw InvalidConfiguration("'solver.delta' must be positive");
    s.tol = sec.number("tol", s.tol);
    if (!(s.tol > 0.0)) throw InvalidConfiguration("'solver.tol' must be positive");
    s.max_iter = sec.count("max_iter", s.max_iter);
    if (s.max_iter == 0) throw InvalidConfiguration("'solver.max_iter' must be at least 1");
    s.max_halvings = sec.count("max_halvings", s.max_halvings);
    s.radius = sec.optional_number("radius");
    if (s.radius && !(*s.radius > 0.0)) throw InvalidConfiguration("'solver.radius' must be positive");
    s.regression.degree = sec.count("regression_degree", s.regression.degree);
    if (s.regression.degree > kMaxRegressionDegree) {
        throw InvalidConfiguration("'solver.regression_degree' must not exceed " +
                                   std::to_string(kMaxRegressionDegree));
    }
    s.regression.ridge = sec.number("ridge", s.regression.ridge);
    if (s.regression.ridge < 0.0) throw InvalidConfiguration("'solver.ridge' must be non-negative");
    s.n_paths = sec.count("n_paths", s.n_paths);
    if (s.backend == Backend::MonteCarlo && s.n_paths < 100) {
        throw InvalidConfiguration("'solver.n_paths' must be at least 100 for the monte-carlo backend");
    }
    s.psd_tol = sec.number("psd_tol", s.psd_tol);
    if (s.psd_tol < 0.0) throw InvalidConfiguration("'solver.psd_tol' must be non-negative");
    s.c2_paths = sec.count("c2_paths", s.c2_paths);
    if (s.c2_paths < 1000) throw InvalidConfiguration("'solver.c2_paths' must be at least 1000");
    sec.finish();
    return s;
}

VerificationSpec parse_verification(Section sec, const ModelSpec& model) {
    VerificationSpec v;
    v.n_paths = sec.count("n_paths", v.n_paths);
    if (v.n_paths < 1000) throw InvalidConfiguration("'verification.n_paths' must be at least 1000");
    if (sec.has("x")) {
        v.x = sec.numbers("x");
        if (v.x.size() != model.n) {
            throw InvalidConfiguration("'verification.x' must have N = " + std::to_string(model.n) + " entries");
        }
    }
    if (sec.has("audits")) {
        v.audits = sec.strings("audits");
        for (const auto& a : v.audits) {
            const auto& known = known_audits();
            if (std::find(known.begin(), known.end(), a) == known.end()) {
                throw InvalidConfiguration("unknown audit '" + a + "'");
            }
        }
    }
    v.challenger_amplitude = sec.number("challenger_amplitude", v.challenger_amplitude);
    if (sec.has("jn_ns")) v.jn_ns = sec.numbers("jn_ns");
    for (double n : v.jn_ns) {
        if (!(n > 0.0)) throw InvalidConfiguration("'verification.jn_ns' entries must be positive");
    }
    v.jn_epsilon = sec.number("jn_epsilon", v.jn_epsilon);
    v.jn_delta = sec.optional_number("jn_delta");
    const double jn_delta = v.jn_delta.value_or(model.horizon);
    if (!(v.jn_epsilon >= 0.0 && v.jn_epsilon < jn_delta && jn_delta <= model.horizon)) {
        throw InvalidConfiguration("J_n audit window needs 0 <= jn_epsilon < jn_delta <= T");
    }
    if (sec.has("apriori_deltas")) v.apriori_deltas = sec.numbers("apriori_deltas");
    for (double d : v.apriori_deltas) {
        if (!(d > 0.0 && d <= model.horizon)) {
            throw InvalidConfiguration("'verification.apriori_deltas' entries must lie in (0, T]");
        }
    }
    sec.finish();
    return v;
}

json numbers_json(const std::vector<double>& v) { return json(v); }

json exprs_json(const std::vector<std::string>& v, bool single) {
    if (single) return json(v.front());
    return json(v);
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<Expression> to_exprs(const std::vector<std::string>& v) {
    std::vector<Expression> out;
    for (const auto& s : v) out.push_back(Expression::parse(s));
    return out;
}

}  // namespace

const std::vector<std::string>& known_audits() {
    static const std::vector<std::string> names{
        "symmetry-psd", "contraction", "oracle",     "closed-form", "backend-agreement", "moments",
        "value",        "optimality",  "completion", "smoothing",   "jn-properties",     "jn-stability",
        "apriori",      "weak-source", "k-norm"};
    return names;
}

ExperimentConfig parse_config(const json& j) {
    Section root(j, "");
    ExperimentConfig c;
    c.model = parse_model(root.child("model"));
    if (root.has("solver")) c.solver = parse_solver(root.child("solver"));
    if (root.has("verification")) {
        c.verification = parse_verification(root.child("verification"), c.model);
    } else {
        c.verification = parse_verification(Section(json::object(), "verification"), c.model);
    }
    if (root.has("output")) {
        Section out = root.child("output");
        if (out.has("directory")) c.output.directory = out.text("directory");
        c.output.dump_costs = out.flag("dump_costs", c.output.dump_costs);
        out.finish();
    }
    c.seed = root.count("seed", c.seed);
    c.workers = root.count("workers", c.workers);
    if (c.workers == 0) throw InvalidConfiguration("'workers' must be at least 1");
    c.memory_budget = root.count("memory_budget", c.memory_budget);
    root.finish();
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidConfiguration("cannot open config file '" + path.string() + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw InvalidConfiguration("config file '" + path.string() + "' is not valid JSON: " + e.what());
    }
    return parse_config(j);
}

json to_json(const ExperimentConfig& c) {
    json model;
    const ModelSpec& m = c.model;
    model["variant"] = to_string(m.variant);
    model["N"] = m.n;
    model["rho"] = m.rho;
    model["T"] = m.horizon;
    model["steps"] = m.steps;
    if (m.bounds) {
        json b{{"M_C", m.bounds->m_c}, {"M_B", m.bounds->m_b}};
        if (m.bounds->m_s) b["M_S"] = *m.bounds->m_s;
        model["bounds"] = b;
    }
    model["m"] = numbers_json(m.m);
    switch (m.variant) {
        case ModelVariant::ConstantDiagonal:
            model["c"] = numbers_json(m.c);
            model["b"] = numbers_json(m.b);
            model["s"] = numbers_json(m.s);
            break;
        case ModelVariant::DeterministicSchedule:
            model["c"] = exprs_json(m.c_expr, false);
            model["b"] = exprs_json(m.b_expr, false);
            model["s"] = exprs_json(m.s_expr, false);
            break;
        case ModelVariant::ScalarRandomField:
            model["c"] = exprs_json(m.c_expr, true);
            model["s"] = exprs_json(m.s_expr, true);
            model["b"] = numbers_json(m.b);
            if (m.profile) model["profile"] = *m.profile;
            break;
    }

    const SolverSpec& s = c.solver;
    json solver{{"backend", to_string(s.backend)},
                {"tol", s.tol},
                {"max_iter", s.max_iter},
                {"max_halvings", s.max_halvings},
                {"regression_degree", s.regression.degree},
                {"ridge", s.regression.ridge},
                {"n_paths", s.n_paths},
                {"psd_tol", s.psd_tol},
                {"c2_paths", s.c2_paths}};
    if (s.delta) solver["delta"] = *s.delta;
    if (s.radius) solver["radius"] = *s.radius;

    const VerificationSpec& v = c.verification;
    json verification{{"n_paths", v.n_paths},
                      {"challenger_amplitude", v.challenger_amplitude},
                      {"jn_ns", v.jn_ns},
                      {"jn_epsilon", v.jn_epsilon},
                      {"apriori_deltas", v.apriori_deltas}};
    if (!v.x.empty()) verification["x"] = v.x;
    if (!v.audits.empty()) verification["audits"] = v.audits;
    if (v.jn_delta) verification["jn_delta"] = *v.jn_delta;

    return json{{"model", model},
                {"solver", solver},
                {"verification", verification},
                {"output", {{"directory", c.output.directory}, {"dump_costs", c.output.dump_costs}}},
                {"seed", c.seed},
                {"workers", c.workers},
                {"memory_budget", c.memory_budget}};
}

CoefficientModel build_model(const ModelSpec& spec) {
    check_rho(spec.rho);
    BasisPtr basis = laplacian_basis(spec.n, spec.rho);
    const TimeGrid grid(spec.horizon, spec.steps);
    // m is the diagonal of M; broadcast a single entry.
    Eigen::VectorXd m = to_vector(spec.m);
    if (m.size() == 1) m = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(spec.n), m(0));
    switch (spec.variant) {
        case ModelVariant::ConstantDiagonal:
            return CoefficientModel::constant_diagonal(basis, grid, to_vector(spec.c), to_vector(spec.b),
                                                       to_vector(spec.s), m, spec.bounds);
        case ModelVariant::DeterministicSchedule:
            return CoefficientModel::deterministic_schedule(basis, grid, to_exprs(spec.c_expr),
                                                            to_exprs(spec.b_expr), to_exprs(spec.s_expr), m,
                                                            spec.bounds);
        case ModelVariant::ScalarRandomField: {
            if (!spec.bounds) throw InvalidConfiguration("scalar-random-field models need declared bounds");
            Eigen::VectorXd b = to_vector(spec.b);
            if (b.size() == 1) b = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(spec.n), b(0));
            std::optional<Expression> profile;
            if (spec.profile) profile = Expression::parse(*spec.profile);
            return CoefficientModel::scalar_random_field(basis, grid, Expression::parse(spec.c_expr.front()),
                                                         Expression::parse(spec.s_expr.front()), b, m,
                                                         *spec.bounds, profile);
        }
    }
    throw InvalidConfiguration("unknown model variant");
}

SolverOptions solver_options(const ExperimentConfig& config) {
    SolverOptions o;
    o.backend = config.solver.backend;
    o.n_paths = config.solver.n_paths;
    o.seed = config.seed;
    o.workers = config.workers;
    o.regression = config.solver.regression;
    o.psd_tol = config.solver.psd_tol;
    return o;
}

PicardOptions picard_options(const ExperimentConfig& config) {
    PicardOptions p;
    p.delta = config.solver.delta;
    p.tol = config.solver.tol;
    p.max_iter = config.solver.max_iter;
    p.max_halvings = config.solver.max_halvings;
    return p;
}

RiccatiConfig riccati_config(const ExperimentConfig& config) {
    RiccatiConfig r;
    r.radius = config.solver.radius;
    r.delta = config.solver.delta;
    r.tol = config.solver.tol;
    r.max_iter = config.solver.max_iter;
    r.max_halvings = config.solver.max_halvings;
    r.c2_paths = config.solver.c2_paths;
    return r;
}

Eigen::VectorXd initial_state(const ExperimentConfig& config) {
    if (!config.verification.x.empty()) return to_vector(config.verification.x);
    Eigen::VectorXd x(static_cast<Eigen::Index>(config.model.n));
    for (Eigen::Index k = 0; k < x.size(); ++k) x(k) = std::ldexp(1.0, -static_cast<int>(k));
    return x;
}

}  // namespace bsre
