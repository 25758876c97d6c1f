// config.cpp: JSON experiment configuration.

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "brwre/harness.hpp"

namespace brwre {

using nlohmann::json;

namespace {

// Reads one JSON object, tracking which keys were consumed so that unknown
// keys (usually typos) are reported with their full path.
class ObjectReader {
public:
    ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
    }

    std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    const std::string& path() const { return path_; }

    bool has(const std::string& key) {
        used_.insert(key);
        return j_.contains(key);
    }

    const json& at(const std::string& key) {
        if (!has(key)) throw ConfigError(child(key), "missing required field");
        return j_.at(key);
    }

    double number(const std::string& key) {
        const json& v = at(key);
        if (!v.is_number()) throw ConfigError(child(key), "expected a number");
        const double x = v.get<double>();
        if (!std::isfinite(x)) throw ConfigError(child(key), "expected a finite number");
        return x;
    }
    double number(const std::string& key, double fallback) { return has(key) ? number(key) : fallback; }

    std::uint64_t unsigned_integer(const std::string& key) {
        const json& v = at(key);
        if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
            throw ConfigError(child(key), "expected a nonnegative integer");
        }
        return v.get<std::uint64_t>();
    }
    std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) {
        return has(key) ? unsigned_integer(key) : fallback;
    }

    bool boolean(const std::string& key, bool fallback) {
        if (!has(key)) return fallback;
        const json& v = j_.at(key);
        if (!v.is_boolean()) throw ConfigError(child(key), "expected true or false");
        return v.get<bool>();
    }

    std::string string(const std::string& key) {
        const json& v = at(key);
        if (!v.is_string()) throw ConfigError(child(key), "expected a string");
        return v.get<std::string>();
    }
    std::string string(const std::string& key, const std::string& fallback) {
        return has(key) ? string(key) : fallback;
    }

    std::vector<double> numbers(const std::string& key) {
        const json& v = at(key);
        if (!v.is_array()) throw ConfigError(child(key), "expected an array of numbers");
        std::vector<double> out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number() || !std::isfinite(v[i].get<double>())) {
                throw ConfigError(child(key) + "[" + std::to_string(i) + "]", "expected a finite number");
            }
            out.push_back(v[i].get<double>());
        }
        return out;
    }

    std::vector<std::size_t> sizes(const std::string& key) {
        const json& v = at(key);
        if (!v.is_array()) throw ConfigError(child(key), "expected an array of integers");
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number_unsigned()) {
                throw ConfigError(child(key) + "[" + std::to_string(i) + "]", "expected a nonnegative integer");
            }
            out.push_back(v[i].get<std::size_t>());
        }
        return out;
    }

    void finish() const {
        for (const auto& item : j_.items()) {
            if (!used_.count(item.key())) throw ConfigError(child(item.key()), "unknown field");
        }
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> used_;
};

// Library constructors throw on invalid parameters; attach the config path.
template <class Fn>
auto at_path(const std::string& path, Fn&& fn) {
    try {
        return fn();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(path, e.what());
    }
}

OffspringLaw parse_offspring(const json& j, const std::string& path) {
    ObjectReader r(j, path);
    const std::string family = r.string("family");
    OffspringLaw law = at_path(path, [&]() -> OffspringLaw {
        if (family == "explicit_pmf") return OffspringLaw::explicit_pmf(r.numbers("pmf"));
        if (family == "poisson_truncated") return OffspringLaw::poisson_truncated(r.number("rate"), r.unsigned_integer("cap"));
        if (family == "geometric") return OffspringLaw::geometric(r.number("p"), r.unsigned_integer("cap"));
        throw ConfigError(r.child("family"), "unknown offspring family '" + family +
                                                 "' (explicit_pmf, poisson_truncated, geometric)");
    });
    r.finish();
    return law;
}

MovingLaw parse_moving(const json& j, const std::string& path) {
    ObjectReader r(j, path);
    const std::string family = r.string("family");
    MovingLaw law = at_path(path, [&]() -> MovingLaw {
        if (family == "gaussian") return MovingLaw::gaussian(r.number("mean"), r.number("sd"));
        if (family == "uniform") return MovingLaw::uniform(r.number("a"), r.number("b"));
        if (family == "shifted_exponential") return MovingLaw::shifted_exponential(r.number("rate"), r.number("shift", 0.0));
        if (family == "two_point") return MovingLaw::two_point(r.number("x1"), r.number("p"), r.number("x2"));
        throw ConfigError(r.child("family"), "unknown moving family '" + family +
                                                 "' (gaussian, uniform, shifted_exponential, two_point)");
    });
    r.finish();
    return law;
}

EnvironmentModel parse_model_json(const json& j, const std::string& path) {
    ObjectReader r(j, path);
    const json& states = r.at("states");
    if (!states.is_array() || states.empty()) throw ConfigError(r.child("states"), "expected a nonempty array");
    std::vector<WeightedState> parsed;
    for (std::size_t i = 0; i < states.size(); ++i) {
        const std::string sp = r.child("states") + "[" + std::to_string(i) + "]";
        ObjectReader s(states[i], sp);
        const double p = s.number("probability");
        OffspringLaw off = parse_offspring(s.at("offspring"), s.child("offspring"));
        MovingLaw mov = parse_moving(s.at("moving"), s.child("moving"));
        s.finish();
        parsed.push_back({p, EnvState{std::move(off), mov}});
    }
    r.finish();
    return at_path(r.child("states"), [&] { return EnvironmentModel(std::move(parsed)); });
}

json parse_text(const std::string& text, const std::string& source) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        std::size_t line = 1;
        std::size_t col = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw ConfigError(source + ":" + std::to_string(line) + ":" + std::to_string(col), "JSON syntax error");
    }
}

void require(bool ok, const std::string& where, const std::string& what) {
    if (!ok) throw ConfigError(where, what);
}

const char* provider_name(CdfProviderKind k) {
    switch (k) {
        case CdfProviderKind::exact_gaussian: return "exact_gaussian";
        case CdfProviderKind::edgeworth: return "edgeworth";
        case CdfProviderKind::oracle: return "oracle";
    }
    return "?";
}

json offspring_json(const OffspringLaw& law) {
    switch (law.family()) {
        case OffspringFamily::explicit_pmf: return {{"family", "explicit_pmf"}, {"pmf", law.pmf()}};
        case OffspringFamily::poisson_truncated:
            return {{"family", "poisson_truncated"}, {"rate", law.params()[0]}, {"cap", law.params()[1]}};
        case OffspringFamily::geometric:
            return {{"family", "geometric"}, {"p", law.params()[0]}, {"cap", law.params()[1]}};
    }
    return {};
}

json moving_json(const MovingLaw& law) {
    const auto& p = law.params();
    switch (law.family()) {
        case MovingFamily::gaussian: return {{"family", "gaussian"}, {"mean", p[0]}, {"sd", p[1]}};
        case MovingFamily::uniform: return {{"family", "uniform"}, {"a", p[0]}, {"b", p[1]}};
        case MovingFamily::shifted_exponential:
            return {{"family", "shifted_exponential"}, {"rate", p[0]}, {"shift", p[1]}};
        case MovingFamily::two_point: return {{"family", "two_point"}, {"x1", p[0]}, {"p", p[1]}, {"x2", p[2]}};
    }
    return {};
}

}  // namespace

EnvironmentModel parse_model(const std::string& json_text, const std::string& source) {
    const json root = parse_text(json_text, source);
    ObjectReader r(root, "");
    return parse_model_json(r.at("model"), "model");
}

ExperimentConfig parse_config(const std::string& json_text, const std::string& source) {
    const json root = parse_text(json_text, source);
    ObjectReader r(root, "");
    ExperimentConfig cfg;
    cfg.model = std::make_shared<const EnvironmentModel>(parse_model_json(r.at("model"), "model"));

    if (r.has("experiment")) {
        ObjectReader e(root.at("experiment"), "experiment");
        cfg.name = e.string("name", cfg.name);
        cfg.seed = e.unsigned_integer("seed", cfg.seed);
        cfg.replicas = e.unsigned_integer("replicas", cfg.replicas);
        cfg.n_max = e.unsigned_integer("n_max", cfg.n_max);
        cfg.particle_cap = e.unsigned_integer("particle_cap", cfg.particle_cap);
        if (e.has("n_list")) cfg.n_list = e.sizes("n_list");
        if (e.has("t_grid")) cfg.t_grid = e.numbers("t_grid");
        cfg.beta = e.number("beta", cfg.beta);
        cfg.order_max = static_cast<int>(e.unsigned_integer("order_max", static_cast<std::uint64_t>(cfg.order_max)));
        cfg.batches = e.unsigned_integer("batches", cfg.batches);
        cfg.gate_n = e.unsigned_integer("gate_n", cfg.gate_n);
        cfg.compute_ab = e.boolean("compute_ab", cfg.compute_ab);
        if (e.has("ab_provider")) {
            const std::string p = e.string("ab_provider");
            if (p == "exact_gaussian") cfg.ab_provider = CdfProviderKind::exact_gaussian;
            else if (p == "edgeworth") cfg.ab_provider = CdfProviderKind::edgeworth;
            else if (p == "oracle") cfg.ab_provider = CdfProviderKind::oracle;
            else throw ConfigError(e.child("ab_provider"), "expected exact_gaussian, edgeworth or oracle");
        }
        cfg.output_dir = e.string("output_dir", cfg.output_dir);
        e.finish();

        require(cfg.replicas >= 1, e.child("replicas"), "must be >= 1");
        require(cfg.n_max >= 1 && cfg.n_max <= kMaxGenerations, e.child("n_max"), "must lie in [1, 64]");
        require(cfg.particle_cap >= 1, e.child("particle_cap"), "must be >= 1");
        require(!cfg.n_list.empty(), e.child("n_list"), "must not be empty");
        for (auto n : cfg.n_list) require(n >= 1 && n <= kMaxGenerations, e.child("n_list"), "entries must lie in [1, 64]");
        require(!cfg.t_grid.empty(), e.child("t_grid"), "must not be empty");
        require(cfg.beta > 0.0 && cfg.beta < 0.5, e.child("beta"), "must lie in (0, 0.5)");
        require(cfg.order_max >= 0 && cfg.order_max <= kMaxExpansionOrder, e.child("order_max"), "must lie in [0, 3]");
        require(cfg.batches >= 1, e.child("batches"), "must be >= 1");
    }

    if (r.has("oracle")) {
        ObjectReader o(root.at("oracle"), "oracle");
        const std::string method = o.string("method", "grid");
        if (method == "grid") {
            GridConvolutionOracle g;
            g.step_fraction = o.number("step_fraction", g.step_fraction);
            g.half_width = o.number("half_width", g.half_width);
            g.richardson = o.boolean("richardson", g.richardson);
            require(g.step_fraction > 0.0 && g.step_fraction <= 1.0 / 200.0, o.child("step_fraction"),
                    "must lie in (0, 1/200]");
            require(g.half_width >= 6.0, o.child("half_width"), "must be >= 6");
            cfg.oracle = g;
        } else if (method == "monte_carlo") {
            MonteCarloOracle m;
            m.samples = o.unsigned_integer("samples", m.samples);
            m.seed = o.unsigned_integer("seed", m.seed);
            require(m.samples >= 100000, o.child("samples"), "must be >= 100000");
            cfg.oracle = m;
        } else {
            throw ConfigError(o.child("method"), "expected grid or monte_carlo");
        }
        o.finish();
    }

    if (r.has("edgeworth")) {
        ObjectReader w(root.at("edgeworth"), "edgeworth");
        auto& st = cfg.edgeworth;
        if (w.has("lengths")) st.lengths = w.sizes("lengths");
        st.x_min = w.number("x_min", st.x_min);
        st.x_max = w.number("x_max", st.x_max);
        st.x_points = w.unsigned_integer("x_points", st.x_points);
        st.order = static_cast<int>(w.unsigned_integer("order", static_cast<std::uint64_t>(st.order)));
        const std::string src = w.string("window_source", "sampled");
        if (src == "sampled") st.source = WindowSource::sampled;
        else if (src == "homogeneous") st.source = WindowSource::homogeneous;
        else throw ConfigError(w.child("window_source"), "expected sampled or homogeneous");
        st.homogeneous_state = w.unsigned_integer("homogeneous_state", st.homogeneous_state);
        w.finish();

        require(!st.lengths.empty(), w.child("lengths"), "must not be empty");
        for (auto l : st.lengths) require(l >= 1 && l <= 4096, w.child("lengths"), "entries must lie in [1, 4096]");
        require(st.x_min < st.x_max, w.child("x_max"), "must exceed x_min");
        require(st.x_points >= 2, w.child("x_points"), "must be >= 2");
        require(st.order >= 3 && st.order <= 6, w.child("order"), "must lie in [3, 6]");
        require(st.homogeneous_state < cfg.model->size(), w.child("homogeneous_state"), "no such state");
    }
    r.finish();
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(path, "cannot open configuration file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path);
}

std::string canonical_config(const ExperimentConfig& cfg) {
    json states = json::array();
    for (const auto& ws : cfg.model->states()) {
        states.push_back({{"probability", ws.probability},
                          {"offspring", offspring_json(ws.state.offspring)},
                          {"moving", moving_json(ws.state.moving)}});
    }
    json oracle;
    if (const auto* g = std::get_if<GridConvolutionOracle>(&cfg.oracle)) {
        oracle = {{"method", "grid"}, {"step_fraction", g->step_fraction}, {"half_width", g->half_width},
                  {"richardson", g->richardson}};
    } else {
        const auto& m = std::get<MonteCarloOracle>(cfg.oracle);
        oracle = {{"method", "monte_carlo"}, {"samples", m.samples}, {"seed", m.seed}};
    }
    const auto& st = cfg.edgeworth;
    json root = {
        {"model", {{"states", states}}},
        {"experiment",
         {{"name", cfg.name},
          {"seed", cfg.seed},
          {"replicas", cfg.replicas},
          {"n_max", cfg.n_max},
          {"particle_cap", cfg.particle_cap},
          {"n_list", cfg.n_list},
          {"t_grid", cfg.t_grid},
          {"beta", cfg.beta},
          {"order_max", cfg.order_max},
          {"batches", cfg.batches},
          {"gate_n", cfg.gate_n},
          {"compute_ab", cfg.compute_ab},
          {"ab_provider", provider_name(cfg.ab_provider)}}},
        {"oracle", oracle},
        {"edgeworth",
         {{"lengths", st.lengths},
          {"x_min", st.x_min},
          {"x_max", st.x_max},
          {"x_points", st.x_points},
          {"order", st.order},
          {"window_source", st.source == WindowSource::sampled ? "sampled" : "homogeneous"},
          {"homogeneous_state", st.homogeneous_state}}},
    };
    return root.dump();
}

std::string config_hash(const ExperimentConfig& cfg) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : canonical_config(cfg)) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace brwre
