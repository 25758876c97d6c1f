// expansion.cpp

#include "brwre/expansion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "brwre/numerics.hpp"
#include "brwre/rng.hpp"

namespace brwre {

// ------------------------------------------------------------ right-hand side

ExpansionTerms::ExpansionTerms(const RealizedEnvironment& env, std::size_t n) : n_(n), s_(0.0) {
    if (n == 0 || n > env.length()) throw std::out_of_range("expansion: n outside [1, length]");
    s_ = env.s(n);
    if (!(s_ > 0.0)) throw DegenerateWindow("expansion: s_n = 0");
    for (int nu = 1; nu <= 3; ++nu) {
        const auto base = q_closed_series(nu, env, n);
        auto& slot = q_[static_cast<std::size_t>(nu - 1)];
        slot[0] = base;
        slot[1] = base.derivative(1);
        slot[2] = base.derivative(2);
    }
    const HermitePhiSeries phi({{0, 1.0}});
    phi_ = {phi, phi.derivative(1), phi.derivative(2)};
}

const HermitePhiSeries& ExpansionTerms::q(int nu, int derivative) const {
    if (nu < 1 || nu > 3 || derivative < 0 || derivative > 2) throw std::out_of_range("expansion term index");
    return q_[static_cast<std::size_t>(nu - 1)][static_cast<std::size_t>(derivative)];
}

double ExpansionTerms::increment(int order, double t, const LimitEstimates& lim) const {
    const double s = s_;
    switch (order) {
        case 0:
            return std_normal_cdf(t) * lim.w;
        case 1:
            return q(1)(t) * lim.w - phi_[0](t) * lim.v1 / s;
        case 2:
            return q(2)(t) * lim.w - q(1, 1)(t) * lim.v1 / s + phi_[1](t) * lim.v2 / (2.0 * s * s);
        case 3:
            return q(3)(t) * lim.w - q(2, 1)(t) * lim.v1 / s + q(1, 2)(t) * lim.v2 / (2.0 * s * s) -
                   phi_[2](t) * lim.v3 / (6.0 * s * s * s);
        default:
            throw std::out_of_range("expansion order must lie in [0, 3]");
    }
}

double ExpansionTerms::rhs(int order, double t, const LimitEstimates& limits) const {
    if (order < 0 || order > kMaxExpansionOrder) throw std::out_of_range("expansion order must lie in [0, 3]");
    double total = 0.0;
    for (int k = 0; k <= order; ++k) total += increment(k, t, limits);
    return total;
}

std::array<double, kMaxExpansionOrder + 1> ExpansionTerms::rhs_all(double t, const LimitEstimates& limits) const {
    std::array<double, kMaxExpansionOrder + 1> out{};
    double total = 0.0;
    for (int k = 0; k <= kMaxExpansionOrder; ++k) {
        total += increment(k, t, limits);
        out[static_cast<std::size_t>(k)] = total;
    }
    return out;
}

double rhs(int order, double t, std::size_t n, const RealizedEnvironment& env, const LimitEstimates& limits) {
    return ExpansionTerms(env, n).rhs(order, t, limits);
}

std::size_t split_generation(std::size_t n, double beta) {
    // Nudge guards exact integer powers against pow() rounding just below.
    return static_cast<std::size_t>(std::floor(std::pow(static_cast<double>(n), beta) * (1.0 + 1e-14)));
}

// ---------------------------------------------------------------- A + B split

double ABDecomposition::identity_error() const { return std::abs(a + b - lhs_check) / (1.0 + std::abs(lhs_check)); }

ABDecomposer::ABDecomposer(const Trajectory& traj, std::size_t n, std::size_t k, const CdfProvider& provider)
    : traj_(&traj), n_(n), k_(k), provider_(provider) {
    if (k >= n) throw std::invalid_argument("A/B split requires k < n");
    const auto& snap_n = traj.snapshot(n);
    const auto& snap_k = traj.snapshot(k);
    window_.emplace(traj.env(), k, n);

    switch (provider.kind) {
        case CdfProviderKind::exact_gaussian: break;
        case CdfProviderKind::edgeworth: edgeworth_ = edgeworth_correction(*window_, provider.edgeworth_order); break;
        case CdfProviderKind::oracle: oracle_.emplace(*window_, provider.grid); break;
    }

    const auto ancestors = traj.ancestor_ids(n, k);
    group_offsets_.assign(snap_k.count() + 1, 0);
    for (auto id : ancestors) ++group_offsets_[id + 1];
    std::partial_sum(group_offsets_.begin(), group_offsets_.end(), group_offsets_.begin());
    grouped_positions_.resize(snap_n.count());
    std::vector<std::size_t> fill(group_offsets_.begin(), group_offsets_.end() - 1);
    for (std::size_t i = 0; i < snap_n.count(); ++i) grouped_positions_[fill[ancestors[i]]++] = snap_n.positions[i];
    for (std::size_t u = 0; u < snap_k.count(); ++u) {
        std::sort(grouped_positions_.begin() + static_cast<std::ptrdiff_t>(group_offsets_[u]),
                  grouped_positions_.begin() + static_cast<std::ptrdiff_t>(group_offsets_[u + 1]));
    }
}

double ABDecomposer::window_cdf(double x) const {
    switch (provider_.kind) {
        case CdfProviderKind::exact_gaussian: return std_normal_cdf(x);
        case CdfProviderKind::edgeworth: return std_normal_cdf(x) + edgeworth_(x);
        case CdfProviderKind::oracle: return (*oracle_)(x).value;
    }
    return 0.0;
}

ABDecomposition ABDecomposer::operator()(double t) const {
    const auto& env = traj_->env();
    const auto& snap_k = traj_->snapshot(k_);
    ABDecomposition out;
    out.n = n_;
    out.k = k_;
    out.t = t;
    out.lhs_check = normalized_lhs(*traj_, n_, t);
    if (snap_k.count() == 0) return out;

    const double threshold = env.ell(n_) + env.s(n_) * t;
    // Pi_{n-k}(theta^k xi) = Pi_n / Pi_k.
    const double subtree_norm = env.pi(n_) / env.pi(k_);
    const double b_scale = window_->scale();
    CompensatedSum a_sum;
    CompensatedSum b_sum;
    for (std::size_t u = 0; u < snap_k.count(); ++u) {
        const auto first = grouped_positions_.begin() + static_cast<std::ptrdiff_t>(group_offsets_[u]);
        const auto last = grouped_positions_.begin() + static_cast<std::ptrdiff_t>(group_offsets_[u + 1]);
        const auto count = static_cast<double>(std::upper_bound(first, last, threshold) - first);
        const double subtree = count / subtree_norm;
        // Remaining steps sum to <= threshold - S_u; centered by ell_n - ell_k.
        const double x = (env.ell(k_) + env.s(n_) * t - snap_k.positions[u]) / b_scale;
        const double f = window_cdf(x);
        a_sum += subtree - f;
        b_sum += f;
    }
    out.a = a_sum.value() / env.pi(k_);
    out.b = b_sum.value() / env.pi(k_);
    return out;
}

ABDecomposition ab_decompose(const Trajectory& traj, std::size_t n, std::size_t k, double t,
                             const CdfProvider& provider) {
    return ABDecomposer(traj, n, k, provider)(t);
}

// -------------------------------------------------------------- residual suite

double ResidualSuiteResult::median_abs_residual(int order, std::size_t n) const {
    const auto& fit = fits.at(static_cast<std::size_t>(order));
    for (std::size_t i = 0; i < fit.n.size(); ++i) {
        if (fit.n[i] == static_cast<double>(n)) return fit.median_abs_residual[i];
    }
    return std::numeric_limits<double>::quiet_NaN();
}

namespace {

struct ReplicaOutput {
    std::vector<ResidualRecord> records;
    Termination termination;
    double max_identity_error = 0.0;
};

ReplicaOutput run_replica(const std::shared_ptr<const EnvironmentModel>& model, const ResidualConfig& cfg,
                          std::size_t replica) {
    const std::size_t n_max = *std::max_element(cfg.n_list.begin(), cfg.n_list.end());
    const std::uint64_t replica_seed = derive_seed(cfg.seed, replica);
    auto env = std::make_shared<const RealizedEnvironment>(sample_environment(model, n_max, derive_seed(replica_seed, 0)));
    SimConfig sim;
    sim.n_max = n_max;
    sim.particle_cap = cfg.particle_cap;
    sim.seed = derive_seed(replica_seed, 1);
    const Trajectory traj = simulate(env, sim);

    ReplicaOutput out;
    out.termination = traj.termination();
    const bool capped = traj.termination().kind == TerminationKind::cap_exceeded;
    const bool extinct = traj.termination().kind == TerminationKind::extinct;
    const double nan = std::numeric_limits<double>::quiet_NaN();

    std::optional<LimitEstimates> limits;
    if (!capped) limits = estimate_limits(compute_series(traj));

    for (std::size_t n : cfg.n_list) {
        std::optional<ExpansionTerms> terms;
        std::optional<ABDecomposer> ab;
        if (limits) {
            terms.emplace(*env, n);
            if (cfg.compute_ab) ab.emplace(traj, n, split_generation(n, cfg.beta), cfg.ab_provider);
        }
        for (double t : cfg.t_grid) {
            ResidualRecord rec;
            rec.replica = replica;
            rec.n = n;
            rec.t = t;
            rec.termination = traj.termination();
            rec.usable = !capped && !extinct;
            if (!limits) {
                rec.lhs = nan;
                rec.rhs.fill(nan);
                rec.residual.fill(nan);
                rec.a = rec.b = nan;
            } else {
                rec.lhs = normalized_lhs(traj, n, t);
                rec.rhs = terms->rhs_all(t, *limits);
                for (std::size_t o = 0; o < rec.rhs.size(); ++o) rec.residual[o] = rec.lhs - rec.rhs[o];
                if (ab) {
                    const auto d = (*ab)(t);
                    rec.a = d.a;
                    rec.b = d.b;
                    out.max_identity_error = std::max(out.max_identity_error, d.identity_error());
                } else {
                    rec.a = rec.b = nan;
                }
            }
            out.records.push_back(rec);
        }
    }
    return out;
}

}  // namespace

ResidualSuiteResult residual_suite(const EnvironmentModel& model, const ResidualConfig& cfg) {
    if (cfg.n_list.empty() || cfg.t_grid.empty()) throw std::invalid_argument("residual suite needs n and t grids");
    if (cfg.replicas == 0) throw std::invalid_argument("residual suite needs >= 1 replica");
    const std::size_t n_max = *std::max_element(cfg.n_list.begin(), cfg.n_list.end());
    if (n_max < kMinLimitGeneration) throw InsufficientData("residual suite needs max(n) >= 8");
    const auto shared_model = std::make_shared<const EnvironmentModel>(model);

    std::vector<ReplicaOutput> outputs(cfg.replicas);
    parallel_for(cfg.replicas, cfg.workers,
                 [&](std::size_t r) { outputs[r] = run_replica(shared_model, cfg, cfg.first_replica + r); });

    ResidualSuiteResult result;
    for (auto& o : outputs) {
        switch (o.termination.kind) {
            case TerminationKind::completed: ++result.usable_replicas; break;
            case TerminationKind::extinct: ++result.extinct_replicas; break;
            case TerminationKind::cap_exceeded: ++result.capped_replicas; break;
        }
        result.max_ab_identity_error = std::max(result.max_ab_identity_error, o.max_identity_error);
        result.records.insert(result.records.end(), o.records.begin(), o.records.end());
    }

    std::vector<std::size_t> ns = cfg.n_list;
    std::sort(ns.begin(), ns.end());
    ns.erase(std::unique(ns.begin(), ns.end()), ns.end());
    for (int order = 0; order <= kMaxExpansionOrder; ++order) {
        OrderFit& fit = result.fits[static_cast<std::size_t>(order)];
        fit.order = order;
        for (std::size_t n : ns) {
            std::vector<double> abs_res;
            for (const auto& rec : result.records) {
                if (rec.usable && rec.n == n) abs_res.push_back(std::abs(rec.residual[static_cast<std::size_t>(order)]));
            }
            if (abs_res.empty()) continue;
            fit.n.push_back(static_cast<double>(n));
            fit.median_abs_residual.push_back(median(std::move(abs_res)));
        }
        fit.slope = loglog_slope(fit.n, fit.median_abs_residual);
    }
    return result;
}

}  // namespace brwre
