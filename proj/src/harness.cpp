// harness.cpp: validate, simulate, verify-edgeworth and verify-expansion.

#include "brwre/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "brwre/martingales.hpp"
#include "brwre/numerics.hpp"
#include "brwre/rng.hpp"

namespace brwre {

using nlohmann::json;
namespace fs = std::filesystem;

unsigned resolve_workers(unsigned flag_value) {
    if (const char* env = std::getenv("BRWRE_WORKERS")) {
        char* end = nullptr;
        const unsigned long v = std::strtoul(env, &end, 10);
        if (end != env && *end == '\0' && v > 0 && v <= 1024) return static_cast<unsigned>(v);
    }
    return std::max(1u, flag_value);
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
    return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

struct Resolved {
    ExperimentConfig cfg;
    unsigned workers = 1;
    fs::path out;
};

Resolved resolve(const std::string& config_path, const RunOptions& opts) {
    Resolved r{load_config(config_path), resolve_workers(opts.workers), {}};
    if (opts.seed) r.cfg.seed = *opts.seed;
    if (opts.replicas) {
        if (*opts.replicas == 0) throw ConfigError("--replicas", "must be >= 1");
        r.cfg.replicas = *opts.replicas;
    }
    r.out = opts.out_dir ? fs::path(*opts.out_dir) : fs::path(r.cfg.output_dir);
    std::error_code ec;
    fs::create_directories(r.out, ec);
    if (ec || !fs::is_directory(r.out)) throw ConfigError(r.out.string(), "output directory is not writable");
    return r;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << content;
    if (!f) throw std::runtime_error("write failed: " + path.string());
}

std::string json_text(const json& j) { return j.dump(2) + "\n"; }

// Values that are not finite go to JSON as null.
json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json manifest(const Resolved& r, const std::string& command, const std::string& config_path, const json& records,
              const json& timings) {
    return {{"tool", "brwre"},
            {"version", kVersion},
            {"command", command},
            {"config_path", config_path},
            {"config_hash", config_hash(r.cfg)},
            {"master_seed", r.cfg.seed},
            {"seed_derivation", "replica_seed = derive_seed(master, replica); environment = derive_seed(replica_seed, 0); "
                                "tree = derive_seed(replica_seed, 1); generator SplitMix64"},
            {"records", records},
            {"execution", {{"workers", r.workers}, {"timings_ms", timings}}}};
}

// Error handling shared by all commands.
template <class Fn>
int guarded(std::ostream& err, Fn&& fn) {
    try {
        return fn();
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const OracleBudgetExceeded& e) {
        err << "error: oracle budget exceeded: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    }
}

const char* level_name(FindingLevel l) {
    switch (l) {
        case FindingLevel::pass: return "PASS";
        case FindingLevel::warn: return "WARN";
        case FindingLevel::fail: return "FAIL";
    }
    return "?";
}

std::string csv_join(std::initializer_list<std::string> cells) {
    std::string out;
    bool first = true;
    for (const auto& c : cells) {
        if (!first) out += ',';
        out += c;
        first = false;
    }
    out += '\n';
    return out;
}

std::string f17(double v) { return format_double(v); }

struct Verdict {
    std::string name;
    bool pass = false;
    std::string detail;
};

json verdicts_json(const std::vector<Verdict>& vs) {
    json out = json::array();
    for (const auto& v : vs) out.push_back({{"name", v.name}, {"pass", v.pass}, {"detail", v.detail}});
    return out;
}

void print_verdicts(std::ostream& out, const std::vector<Verdict>& vs) {
    for (const auto& v : vs) out << (v.pass ? "PASS " : "FAIL ") << v.name << ": " << v.detail << "\n";
}

bool all_pass(const std::vector<Verdict>& vs) {
    return std::all_of(vs.begin(), vs.end(), [](const Verdict& v) { return v.pass; });
}

}  // namespace

// ------------------------------------------------------------------ validate

int cmd_validate(const std::string& config_path, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto cfg = load_config(config_path);
        const auto report = validate_model(*cfg.model);
        for (std::size_t i = 0; i < cfg.model->size(); ++i) {
            const auto& ws = (*cfg.model)[i];
            out << "state " << i << ": p=" << ws.probability << " offspring " << ws.state.offspring.describe()
                << ", moving " << ws.state.moving.describe() << "\n";
        }
        for (const auto& f : report.findings) out << "[" << level_name(f.level) << "] " << f.code << ": " << f.message << "\n";
        out << (report.passed() ? "model valid" : "model invalid") << (report.has_warnings() ? " (with warnings)" : "")
            << "\n";
        return report.passed() ? kExitOk : kExitFailed;
    });
}

// ------------------------------------------------------------------ simulate

namespace {

struct SimReplica {
    std::string rows;
    std::string dump_rows;
    json sidecar;
    Termination termination;
    std::vector<double> w;  // W_n for n = 0..last
};

SimReplica simulate_replica(const ExperimentConfig& cfg, std::size_t replica, bool dump) {
    const std::uint64_t replica_seed = derive_seed(cfg.seed, replica);
    auto env = std::make_shared<const RealizedEnvironment>(
        sample_environment(cfg.model, cfg.n_max, derive_seed(replica_seed, 0)));
    SimConfig sim;
    sim.n_max = cfg.n_max;
    sim.particle_cap = cfg.particle_cap;
    sim.seed = derive_seed(replica_seed, 1);
    const Trajectory traj = simulate(env, sim);
    const auto series = compute_series(traj);

    SimReplica out;
    out.termination = traj.termination();
    const std::string rep = std::to_string(replica);
    for (std::size_t n = 0; n <= series.last_generation(); ++n) {
        const auto& v = series.values[n];
        const auto tr = compute_truncated(traj, n);
        out.rows += csv_join({rep, std::to_string(n), std::to_string(traj.snapshot(n).count()), f17(v.w), f17(v.n1),
                              f17(v.n2), f17(v.n3), f17(tr.w), f17(tr.n1), f17(tr.n2), f17(tr.n3)});
        out.w.push_back(v.w);
    }
    if (dump) {
        for (std::size_t n = 0; n <= traj.last_generation(); ++n) {
            const auto& snap = traj.snapshot(n);
            for (std::size_t i = 0; i < snap.count(); ++i) {
                const std::string parent = n == 0 ? "-1" : std::to_string(snap.parent_ids[i]);
                out.dump_rows += csv_join({rep, std::to_string(n), std::to_string(i), parent, f17(snap.positions[i])});
            }
        }
        out.sidecar = {{"replica", replica},
                       {"replica_seed", replica_seed},
                       {"environment", env->sequence()},
                       {"termination", traj.termination().describe()}};
    }
    return out;
}

}  // namespace

int cmd_simulate(const std::string& config_path, const RunOptions& opts, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto t0 = Clock::now();
        const Resolved r = resolve(config_path, opts);
        const auto& cfg = r.cfg;

        std::vector<SimReplica> reps(cfg.replicas);
        const auto t_sim = Clock::now();
        parallel_for(cfg.replicas, r.workers,
                     [&](std::size_t i) { reps[i] = simulate_replica(cfg, i, opts.dump_trajectories); });
        const double sim_ms = elapsed_ms(t_sim);

        const auto t_write = Clock::now();
        std::string csv = "replica,n,population,W,N1,N2,N3,Wbar,N1bar,N2bar,N3bar\n";
        std::size_t rows = 0;
        std::size_t completed = 0, extinct = 0, capped = 0;
        json terminations = json::array();
        for (const auto& rep : reps) {
            csv += rep.rows;
            rows += rep.w.size();
            switch (rep.termination.kind) {
                case TerminationKind::completed: ++completed; break;
                case TerminationKind::extinct: ++extinct; break;
                case TerminationKind::cap_exceeded: ++capped; break;
            }
            terminations.push_back(rep.termination.describe());
        }
        write_file(r.out / "martingales.csv", csv);

        // Annealed mean of W_n over replicas that reached generation n.
        json mean_w = json::array();
        for (std::size_t n = 0; n <= cfg.n_max; ++n) {
            std::vector<double> w;
            for (const auto& rep : reps) {
                if (n < rep.w.size()) w.push_back(rep.w[n]);
            }
            if (w.empty()) break;
            mean_w.push_back({{"n", n},
                              {"replicas", w.size()},
                              {"mean", number(mean(w))},
                              {"standard_error", number(w.size() > 1 ? standard_error(w) : NAN)}});
        }
        const double cap_fraction = static_cast<double>(capped) / static_cast<double>(cfg.replicas);
        json summary = {{"config_hash", config_hash(cfg)},
                        {"seed", cfg.seed},
                        {"replicas", cfg.replicas},
                        {"n_max", cfg.n_max},
                        {"completed", completed},
                        {"extinct", extinct},
                        {"cap_exceeded", capped},
                        {"cap_exceeded_fraction", cap_fraction},
                        {"mean_W", mean_w},
                        {"terminations", terminations}};
        write_file(r.out / "simulate_summary.json", json_text(summary));

        json records = {{"martingales.csv", rows}, {"replicas", cfg.replicas}};
        if (opts.dump_trajectories) {
            std::string dump = "replica,generation,particle,parent,position\n";
            json sidecar = json::array();
            std::size_t particles = 0;
            for (const auto& rep : reps) {
                dump += rep.dump_rows;
                sidecar.push_back(rep.sidecar);
                particles += static_cast<std::size_t>(std::count(rep.dump_rows.begin(), rep.dump_rows.end(), '\n'));
            }
            write_file(r.out / "trajectories.csv", dump);
            write_file(r.out / "trajectories.json", json_text({{"config_hash", config_hash(cfg)}, {"replicas", sidecar}}));
            records["trajectories.csv"] = particles;
        }
        const double write_ms = elapsed_ms(t_write);
        write_file(r.out / "manifest.json",
                   json_text(manifest(r, "simulate", config_path, records,
                                      {{"simulate", sim_ms}, {"write", write_ms}, {"total", elapsed_ms(t0)}})));

        out << "simulate: " << cfg.replicas << " replicas, n_max " << cfg.n_max << ": " << completed << " completed, "
            << extinct << " extinct, " << capped << " capped -> " << r.out.string() << "\n";
        if (cap_fraction > 0.5) {
            err << "warning: " << capped << " of " << cfg.replicas
                << " replicas exceeded the particle cap; lower n_max or the mean offspring number\n";
            return kExitAdvisory;
        }
        return kExitOk;
    });
}

// ---------------------------------------------------------- verify-edgeworth

namespace {

double triangular_cdf(double s) {
    if (s <= -2.0) return 0.0;
    if (s >= 2.0) return 1.0;
    return s <= 0.0 ? (2.0 + s) * (2.0 + s) / 8.0 : 1.0 - (2.0 - s) * (2.0 - s) / 8.0;
}

RealizedEnvironment homogeneous_window(const MovingLaw& law, std::size_t length) {
    auto model = std::make_shared<const EnvironmentModel>(
        EnvironmentModel({{1.0, EnvState{OffspringLaw::explicit_pmf({0, 0, 1}), law}}}));
    return RealizedEnvironment(model, std::vector<std::size_t>(length, 0));
}

Verdict check_gaussian_exactness() {
    const auto env = homogeneous_window(MovingLaw::gaussian(0.3, 1.7), 8);
    const CumulantWindow w(env, 0, 8);
    const auto corr = edgeworth_correction(w, 6);
    const WindowSumCdf oracle(w, GridConvolutionOracle{});
    double corr_max = 0.0, oracle_max = 0.0;
    for (int i = 0; i <= 80; ++i) {
        const double x = -4.0 + 0.1 * i;
        corr_max = std::max(corr_max, std::abs(corr(x)));
        oracle_max = std::max(oracle_max, std::abs(oracle(x).value - std_normal_cdf(x)));
    }
    std::ostringstream d;
    d << "max |correction| " << corr_max << ", max |oracle - Phi| " << oracle_max;
    return {"gaussian_exactness", corr_max <= 1e-15 && oracle_max <= 5e-8, d.str()};
}

Verdict check_triangular() {
    const auto env = homogeneous_window(MovingLaw::uniform(-1, 1), 2);
    const CumulantWindow w(env, 0, 2);
    const WindowSumCdf oracle(w, GridConvolutionOracle{});
    double worst = 0.0;
    for (int i = 0; i <= 80; ++i) {
        const double x = -3.0 + 0.075 * i;
        worst = std::max(worst, std::abs(oracle(x).value - triangular_cdf(x * w.scale())));
    }
    std::ostringstream d;
    d << "max |oracle - triangular| " << worst;
    return {"triangular_oracle", worst <= 5e-8, d.str()};
}

}  // namespace

int cmd_verify_edgeworth(const std::string& config_path, const RunOptions& opts, std::ostream& out,
                         std::ostream& err) {
    return guarded(err, [&] {
        const auto t0 = Clock::now();
        const Resolved r = resolve(config_path, opts);
        const auto& cfg = r.cfg;
        const auto& st = cfg.edgeworth;

        for (std::size_t i = 0; i < cfg.model->size(); ++i) {
            if ((*cfg.model)[i].state.moving.is_lattice()) {
                err << "warning: state " << i << " has a lattice moving law; Edgeworth main terms need not "
                    << "approach its distribution function\n";
            }
        }

        std::vector<double> xs(st.x_points);
        for (std::size_t i = 0; i < st.x_points; ++i) {
            xs[i] = st.x_min + (st.x_max - st.x_min) * static_cast<double>(i) / static_cast<double>(st.x_points - 1);
        }
        const int orders = st.order - 2;  // edgeworth orders 3..order

        struct LengthResult {
            std::string rows;
            double sup_phi = 0.0;
            std::vector<double> sup_edge;
        };
        std::vector<LengthResult> results(st.lengths.size());
        parallel_for(st.lengths.size(), r.workers, [&](std::size_t li) {
            const std::size_t len = st.lengths[li];
            const RealizedEnvironment env =
                st.source == WindowSource::homogeneous
                    ? RealizedEnvironment(cfg.model, std::vector<std::size_t>(len, st.homogeneous_state))
                    : sample_environment(cfg.model, len, derive_seed(cfg.seed, len));
            const CumulantWindow w(env, 0, len);
            const WindowSumCdf oracle(w, cfg.oracle);
            std::vector<HermitePhiSeries> corr;
            for (int k = 3; k <= st.order; ++k) corr.push_back(edgeworth_correction(w, k));
            auto& res = results[li];
            res.sup_edge.assign(static_cast<std::size_t>(orders), 0.0);
            for (double x : xs) {
                const auto g = oracle(x);
                const double phi = std_normal_cdf(x);
                res.sup_phi = std::max(res.sup_phi, std::abs(phi - g.value));
                std::string row = std::to_string(len) + "," + f17(x) + "," + f17(g.value) + "," + f17(g.uncertainty) +
                                  "," + f17(phi);
                for (int k = 0; k < orders; ++k) {
                    const double e = phi + corr[static_cast<std::size_t>(k)](x);
                    res.sup_edge[static_cast<std::size_t>(k)] =
                        std::max(res.sup_edge[static_cast<std::size_t>(k)], std::abs(e - g.value));
                    row += "," + f17(e);
                }
                res.rows += row + "\n";
            }
        });

        std::string csv = "L,x,oracle,oracle_uncertainty,phi";
        for (int k = 3; k <= st.order; ++k) csv += ",edgeworth" + std::to_string(k);
        csv += "\n";
        json per_length = json::array();
        std::vector<double> lens;
        std::vector<std::vector<double>> sup(static_cast<std::size_t>(orders));
        bool beats = true;
        for (std::size_t li = 0; li < st.lengths.size(); ++li) {
            const auto& res = results[li];
            csv += res.rows;
            json sups = json::object();
            for (int k = 0; k < orders; ++k) {
                sups["order" + std::to_string(k + 3)] = res.sup_edge[static_cast<std::size_t>(k)];
                sup[static_cast<std::size_t>(k)].push_back(res.sup_edge[static_cast<std::size_t>(k)]);
            }
            beats = beats && res.sup_edge.back() <= res.sup_phi;
            lens.push_back(static_cast<double>(st.lengths[li]));
            per_length.push_back({{"L", st.lengths[li]}, {"sup_error_phi", res.sup_phi}, {"sup_error_edgeworth", sups}});
        }
        json slopes = json::object();
        for (int k = 0; k < orders; ++k) {
            slopes["order" + std::to_string(k + 3)] = number(loglog_slope(lens, sup[static_cast<std::size_t>(k)]));
        }
        const double top_slope = loglog_slope(lens, sup.back());

        std::vector<Verdict> verdicts{check_gaussian_exactness(), check_triangular()};
        verdicts.push_back({"edgeworth_beats_phi", beats,
                            "order-" + std::to_string(st.order) + " sup error <= Phi sup error at every L"});
        if (lens.size() >= 2) {
            verdicts.push_back({"decay_slope", std::isfinite(top_slope) && top_slope <= -1.0,
                                "order-" + std::to_string(st.order) + " slope " + f17(top_slope) + " (gate <= -1)"});
        }

        write_file(r.out / "edgeworth.csv", csv);
        json summary = {{"config_hash", config_hash(cfg)}, {"order", st.order},     {"lengths", per_length},
                        {"slopes", slopes},                {"verdicts", verdicts_json(verdicts)},
                        {"pass", all_pass(verdicts)}};
        write_file(r.out / "edgeworth_summary.json", json_text(summary));
        write_file(r.out / "manifest.json",
                   json_text(manifest(r, "verify-edgeworth", config_path,
                                      {{"edgeworth.csv", st.lengths.size() * st.x_points}}, {{"total", elapsed_ms(t0)}})));
        print_verdicts(out, verdicts);
        return all_pass(verdicts) ? kExitOk : kExitFailed;
    });
}

// ---------------------------------------------------------- verify-expansion

namespace {

std::shared_ptr<const EnvironmentModel> gaussianized(const EnvironmentModel& model) {
    std::vector<WeightedState> states;
    for (std::size_t i = 0; i < model.size(); ++i) {
        const auto& ws = model[i];
        const auto& m = model.moments(i);
        states.push_back({ws.probability,
                          EnvState{ws.state.offspring, MovingLaw::gaussian(m.mean_step, std::sqrt(m.central[2]))}});
    }
    return std::make_shared<const EnvironmentModel>(EnvironmentModel(std::move(states)));
}

Verdict check_gaussian_reduction(const ExperimentConfig& cfg) {
    const std::size_t n = *std::max_element(cfg.n_list.begin(), cfg.n_list.end());
    const auto env = sample_environment(gaussianized(*cfg.model), n, derive_seed(cfg.seed, 0x6a));
    const ExpansionTerms terms(env, n);
    SplitMix64 rng(derive_seed(cfg.seed, 0x6b));
    double q_max = 0.0, rel = 0.0;
    const double s = env.s(n);
    for (double t : cfg.t_grid) {
        for (int nu = 1; nu <= 3; ++nu) q_max = std::max(q_max, std::abs(terms.q(nu)(t)));
        LimitEstimates lim;
        lim.w = 2.0 * rng.uniform();
        lim.v1 = rng.normal();
        lim.v2 = 3.0 * rng.normal();
        lim.v3 = 5.0 * rng.normal();
        const double ph = std_normal_pdf(t);
        const double cor = std_normal_cdf(t) * lim.w - ph * lim.v1 / s - t * ph * lim.v2 / (2 * s * s) -
                           (t * t - 1) * ph * lim.v3 / (6 * s * s * s);
        rel = std::max(rel, std::abs(terms.rhs(3, t, lim) - cor) / std::max(1e-300, std::abs(cor)));
    }
    std::ostringstream d;
    d << "max |q| " << q_max << ", max relative deviation from the Wiener form " << rel;
    return {"gaussian_reduction", q_max <= 1e-15 && rel <= 1e-12, d.str()};
}

Verdict check_derivative_terms(const ExperimentConfig& cfg) {
    const std::size_t n = *std::max_element(cfg.n_list.begin(), cfg.n_list.end());
    const auto env = sample_environment(cfg.model, n, derive_seed(cfg.seed, 0x6c));
    const ExpansionTerms terms(env, n);
    double worst = 0.0;
    for (double t : cfg.t_grid) {
        for (int nu = 1; nu <= 3; ++nu) {
            const auto& q = terms.q(nu);
            const double h = 1e-4;
            worst = std::max(worst, std::abs(terms.q(nu, 1)(t) - (q(t + h) - q(t - h)) / (2 * h)));
        }
        const auto& q1 = terms.q(1);
        const double h2 = 1e-3;
        worst = std::max(worst, std::abs(terms.q(1, 2)(t) - (q1(t + h2) - 2 * q1(t) + q1(t - h2)) / (h2 * h2)));
    }
    return {"derivative_terms", worst <= 1e-6, "max |analytic - finite difference| " + f17(worst)};
}

std::vector<double> pooled_medians(const std::vector<ResidualRecord>& recs, const std::vector<double>& ns, int order) {
    std::vector<double> med;
    for (double n : ns) {
        std::vector<double> v;
        for (const auto& rec : recs) {
            if (rec.usable && static_cast<double>(rec.n) == n) v.push_back(std::abs(rec.residual[static_cast<std::size_t>(order)]));
        }
        med.push_back(v.empty() ? NAN : median(std::move(v)));
    }
    return med;
}

}  // namespace

int cmd_verify_expansion(const std::string& config_path, const RunOptions& opts, std::ostream& out,
                         std::ostream& err) {
    return guarded(err, [&] {
        const auto t0 = Clock::now();
        const Resolved r = resolve(config_path, opts);
        const auto& cfg = r.cfg;
        if (*std::max_element(cfg.n_list.begin(), cfg.n_list.end()) < kMinLimitGeneration) {
            throw ConfigError("experiment.n_list", "largest n must be >= 8 for limit estimates");
        }
        if (std::find(cfg.n_list.begin(), cfg.n_list.end(), cfg.gate_n) == cfg.n_list.end()) {
            throw ConfigError("experiment.gate_n", "must be one of experiment.n_list");
        }
        if (cfg.ab_provider == CdfProviderKind::oracle && !std::holds_alternative<GridConvolutionOracle>(cfg.oracle)) {
            throw ConfigError("experiment.ab_provider", "the oracle provider needs oracle.method = grid");
        }

        ResidualConfig rc;
        rc.n_list = cfg.n_list;
        rc.t_grid = cfg.t_grid;
        rc.replicas = cfg.replicas;
        rc.seed = cfg.seed;
        rc.beta = cfg.beta;
        rc.particle_cap = cfg.particle_cap;
        rc.compute_ab = cfg.compute_ab;
        rc.ab_provider.kind = cfg.ab_provider;
        if (const auto* g = std::get_if<GridConvolutionOracle>(&cfg.oracle)) rc.ab_provider.grid = *g;
        rc.workers = r.workers;

        const auto t_suite = Clock::now();
        std::vector<ResidualRecord> all;
        json batches = json::array();
        std::size_t monotone_batches = 0;
        std::size_t usable = 0, extinct = 0, capped = 0;
        double max_identity = 0.0;
        const int gated = std::min(cfg.order_max, 2);
        for (std::size_t b = 0; b < cfg.batches; ++b) {
            rc.first_replica = b * cfg.replicas;
            auto res = residual_suite(*cfg.model, rc);
            usable += res.usable_replicas;
            extinct += res.extinct_replicas;
            capped += res.capped_replicas;
            max_identity = std::max(max_identity, res.max_ab_identity_error);
            json med = json::array();
            json slopes = json::array();
            bool monotone = true;
            for (int k = 0; k <= kMaxExpansionOrder; ++k) {
                const double m = res.median_abs_residual(k, cfg.gate_n);
                med.push_back(number(m));
                slopes.push_back(number(res.fits[static_cast<std::size_t>(k)].slope));
                if (k >= 1 && k <= gated) monotone = monotone && m <= res.median_abs_residual(k - 1, cfg.gate_n);
            }
            if (monotone) ++monotone_batches;
            batches.push_back({{"batch", b},
                               {"first_replica", rc.first_replica},
                               {"usable", res.usable_replicas},
                               {"extinct", res.extinct_replicas},
                               {"cap_exceeded", res.capped_replicas},
                               {"median_abs_residual_at_gate_n", med},
                               {"slopes", slopes},
                               {"monotone", monotone}});
            all.insert(all.end(), std::make_move_iterator(res.records.begin()), std::make_move_iterator(res.records.end()));
        }
        const double suite_ms = elapsed_ms(t_suite);

        std::string csv = "replica,n,t,lhs,rhs0,rhs1,rhs2,rhs3,res0,res1,res2,res3,A,B,termination\n";
        for (const auto& rec : all) {
            csv += csv_join({std::to_string(rec.replica), std::to_string(rec.n), f17(rec.t), f17(rec.lhs),
                             f17(rec.rhs[0]), f17(rec.rhs[1]), f17(rec.rhs[2]), f17(rec.rhs[3]), f17(rec.residual[0]),
                             f17(rec.residual[1]), f17(rec.residual[2]), f17(rec.residual[3]), f17(rec.a), f17(rec.b),
                             rec.termination.describe()});
        }
        write_file(r.out / "expansion.csv", csv);

        std::vector<double> ns(cfg.n_list.begin(), cfg.n_list.end());
        std::sort(ns.begin(), ns.end());
        ns.erase(std::unique(ns.begin(), ns.end()), ns.end());
        json pooled = json::array();
        std::array<double, kMaxExpansionOrder + 1> slope{};
        for (int k = 0; k <= kMaxExpansionOrder; ++k) {
            const auto med = pooled_medians(all, ns, k);
            slope[static_cast<std::size_t>(k)] = loglog_slope(ns, med);
            json m = json::array();
            for (double v : med) m.push_back(number(v));
            pooled.push_back({{"order", k}, {"n", ns}, {"median_abs_residual", m},
                              {"slope", number(slope[static_cast<std::size_t>(k)])}});
        }

        std::vector<Verdict> verdicts{check_gaussian_reduction(cfg), check_derivative_terms(cfg)};
        if (cfg.compute_ab) {
            verdicts.push_back({"ab_identity", max_identity <= 1e-12, "max |A + B - lhs| / (1 + |lhs|) " + f17(max_identity)});
        }
        if (gated >= 1) {
            const double frac = static_cast<double>(monotone_batches) / static_cast<double>(cfg.batches);
            verdicts.push_back({"order_monotonicity", frac >= 0.8,
                                std::to_string(monotone_batches) + " of " + std::to_string(cfg.batches) +
                                    " batches nonincreasing in order 0.." + std::to_string(gated) + " at n = " +
                                    std::to_string(cfg.gate_n) + " (gate 80%)"});
            verdicts.push_back({"slope_improvement", std::isfinite(slope[0]) && slope[1] <= slope[0] - 0.3,
                                "slope order 1 " + f17(slope[1]) + " vs order 0 " + f17(slope[0]) + " (gate: <= -0.3 apart)"});
        }

        const std::size_t total = cfg.replicas * cfg.batches;
        const double cap_fraction = static_cast<double>(capped) / static_cast<double>(total);
        json summary = {{"config_hash", config_hash(cfg)},
                        {"seed", cfg.seed},
                        {"replicas_per_batch", cfg.replicas},
                        {"batches", batches},
                        {"usable", usable},
                        {"extinct", extinct},
                        {"cap_exceeded", capped},
                        {"gate_n", cfg.gate_n},
                        {"pooled", pooled},
                        {"max_ab_identity_error", max_identity},
                        {"verdicts", verdicts_json(verdicts)},
                        {"pass", all_pass(verdicts)}};
        write_file(r.out / "expansion_summary.json", json_text(summary));
        write_file(r.out / "manifest.json",
                   json_text(manifest(r, "verify-expansion", config_path, {{"expansion.csv", all.size()}, {"replicas", total}},
                                      {{"residual_suite", suite_ms}, {"total", elapsed_ms(t0)}})));
        print_verdicts(out, verdicts);
        if (cap_fraction > 0.5) {
            err << "warning: " << capped << " of " << total << " replicas exceeded the particle cap\n";
            return kExitAdvisory;
        }
        return all_pass(verdicts) ? kExitOk : kExitFailed;
    });
}

}  // namespace brwre
