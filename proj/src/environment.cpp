// environment.cpp

#include "brwre/environment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "brwre/numerics.hpp"
#include "brwre/special_functions.hpp"

namespace brwre {

namespace {

constexpr double kPmfTolerance = 1e-9;
constexpr double kMixtureTolerance = 1e-12;

// Central moments of Exp(1): the derangement numbers !nu.
constexpr std::array<double, 7> kExpCentral = {1.0, 0.0, 1.0, 2.0, 9.0, 44.0, 265.0};

void require(bool ok, const std::string& what) {
    if (!ok) throw InvalidModel(what);
}

void check_order(int nu) {
    if (nu < 2 || nu > kMaxMomentOrder) {
        throw std::out_of_range("moment order " + std::to_string(nu) + " outside [2, 6]");
    }
}

std::vector<double> cumulate(const std::vector<double>& pmf) {
    std::vector<double> c(pmf.size());
    std::partial_sum(pmf.begin(), pmf.end(), c.begin());
    // The last entry is forced to 1 so a uniform draw always lands.
    if (!c.empty()) c.back() = 1.0;
    return c;
}

}  // namespace

// ---------------------------------------------------------------- MovingLaw

MovingLaw MovingLaw::gaussian(double mean, double sd) {
    require(std::isfinite(mean) && std::isfinite(sd), "gaussian: parameters must be finite");
    require(sd > 0.0, "gaussian: sd must be > 0");
    return MovingLaw(MovingFamily::gaussian, {mean, sd, 0.0});
}

MovingLaw MovingLaw::uniform(double a, double b) {
    require(std::isfinite(a) && std::isfinite(b), "uniform: bounds must be finite");
    require(a < b, "uniform: requires a < b");
    return MovingLaw(MovingFamily::uniform, {a, b, 0.0});
}

MovingLaw MovingLaw::shifted_exponential(double rate, double shift) {
    require(std::isfinite(rate) && std::isfinite(shift), "shifted_exponential: parameters must be finite");
    require(rate > 0.0, "shifted_exponential: rate must be > 0");
    return MovingLaw(MovingFamily::shifted_exponential, {rate, shift, 0.0});
}

MovingLaw MovingLaw::two_point(double x1, double p, double x2) {
    require(std::isfinite(x1) && std::isfinite(x2) && std::isfinite(p), "two_point: parameters must be finite");
    require(p > 0.0 && p < 1.0, "two_point: p must lie in (0, 1)");
    require(x1 != x2, "two_point: atoms must differ (zero variance)");
    return MovingLaw(MovingFamily::two_point, {x1, p, x2});
}

double MovingLaw::mean() const {
    const auto& [p0, p1, p2] = params_;
    switch (family_) {
        case MovingFamily::gaussian: return p0;
        case MovingFamily::uniform: return 0.5 * (p0 + p1);
        case MovingFamily::shifted_exponential: return p1 + 1.0 / p0;
        case MovingFamily::two_point: return p1 * p0 + (1.0 - p1) * p2;
    }
    return 0.0;
}

double MovingLaw::central_moment(int nu) const {
    check_order(nu);
    const auto& [p0, p1, p2] = params_;
    switch (family_) {
        case MovingFamily::gaussian: {
            if (nu % 2 == 1) return 0.0;
            double dfact = 1.0;  // (nu - 1)!!
            for (int k = nu - 1; k > 1; k -= 2) dfact *= k;
            return dfact * std::pow(p1, nu);
        }
        case MovingFamily::uniform: {
            if (nu % 2 == 1) return 0.0;
            const double h = 0.5 * (p1 - p0);
            return std::pow(h, nu) / (nu + 1);
        }
        case MovingFamily::shifted_exponential:
            return kExpCentral[static_cast<std::size_t>(nu)] / std::pow(p0, nu);
        case MovingFamily::two_point: {
            const double mu = mean();
            return p1 * std::pow(p0 - mu, nu) + (1.0 - p1) * std::pow(p2 - mu, nu);
        }
    }
    return 0.0;
}

MomentArray MovingLaw::central_moments() const {
    MomentArray out{};
    for (int nu = 2; nu <= kMaxMomentOrder; ++nu) out[static_cast<std::size_t>(nu)] = central_moment(nu);
    return out;
}

double MovingLaw::cdf(double x) const {
    const auto& [p0, p1, p2] = params_;
    switch (family_) {
        case MovingFamily::gaussian: return std_normal_cdf((x - p0) / p1);
        case MovingFamily::uniform:
            if (x <= p0) return 0.0;
            if (x >= p1) return 1.0;
            return (x - p0) / (p1 - p0);
        case MovingFamily::shifted_exponential:
            if (x <= p1) return 0.0;
            return -std::expm1(-p0 * (x - p1));
        case MovingFamily::two_point:
            return (x >= p0 ? p1 : 0.0) + (x >= p2 ? 1.0 - p1 : 0.0);
    }
    return 0.0;
}

double MovingLaw::integrated_cdf(double y) const {
    const auto& [p0, p1, p2] = params_;
    switch (family_) {
        case MovingFamily::gaussian: {
            const double z = (y - p0) / p1;
            return (y - p0) * std_normal_cdf(z) + p1 * std_normal_pdf(z);
        }
        case MovingFamily::uniform:
            if (y <= p0) return 0.0;
            if (y <= p1) return (y - p0) * (y - p0) / (2.0 * (p1 - p0));
            return 0.5 * (p1 - p0) + (y - p1);
        case MovingFamily::shifted_exponential: {
            if (y <= p1) return 0.0;
            const double d = y - p1;
            return d + std::expm1(-p0 * d) / p0;
        }
        case MovingFamily::two_point:
            return p1 * std::max(0.0, y - p0) + (1.0 - p1) * std::max(0.0, y - p2);
    }
    return 0.0;
}

double MovingLaw::lower_extent() const {
    const auto& [p0, p1, p2] = params_;
    switch (family_) {
        case MovingFamily::gaussian: return p0 - 9.0 * p1;
        case MovingFamily::uniform: return p0;
        case MovingFamily::shifted_exponential: return p1;
        case MovingFamily::two_point: return std::min(p0, p2);
    }
    return 0.0;
}

double MovingLaw::upper_extent() const {
    const auto& [p0, p1, p2] = params_;
    switch (family_) {
        case MovingFamily::gaussian: return p0 + 9.0 * p1;
        case MovingFamily::uniform: return p1;
        case MovingFamily::shifted_exponential: return p1 + 36.0 / p0;
        case MovingFamily::two_point: return std::max(p0, p2);
    }
    return 0.0;
}

double MovingLaw::sample(SplitMix64& rng) const {
    const auto& [p0, p1, p2] = params_;
    switch (family_) {
        case MovingFamily::gaussian: return p0 + p1 * rng.normal();
        case MovingFamily::uniform: return p0 + (p1 - p0) * rng.uniform();
        case MovingFamily::shifted_exponential: return p1 + rng.exponential() / p0;
        case MovingFamily::two_point: return rng.uniform() < p1 ? p0 : p2;
    }
    return 0.0;
}

std::string MovingLaw::describe() const {
    std::ostringstream os;
    const auto& [p0, p1, p2] = params_;
    switch (family_) {
        case MovingFamily::gaussian: os << "gaussian(" << p0 << ", " << p1 << ")"; break;
        case MovingFamily::uniform: os << "uniform(" << p0 << ", " << p1 << ")"; break;
        case MovingFamily::shifted_exponential: os << "shifted_exponential(" << p0 << ", " << p1 << ")"; break;
        case MovingFamily::two_point: os << "two_point(" << p0 << ", " << p1 << ", " << p2 << ")"; break;
    }
    return os.str();
}

// ------------------------------------------------------------- OffspringLaw

OffspringLaw::OffspringLaw(OffspringFamily family, std::vector<double> pmf, std::array<double, 2> params)
    : family_(family), pmf_(std::move(pmf)), params_(params) {
    cumulative_ = cumulate(pmf_);
    CompensatedSum m;
    for (std::size_t k = 1; k < pmf_.size(); ++k) m += static_cast<double>(k) * pmf_[k];
    mean_ = m.value();
}

OffspringLaw OffspringLaw::explicit_pmf(std::vector<double> pmf) {
    require(!pmf.empty(), "explicit_pmf: empty pmf");
    require(pmf.size() <= kMaxSupport + 1, "explicit_pmf: support exceeds 1024");
    CompensatedSum total;
    for (double p : pmf) {
        require(std::isfinite(p) && p >= 0.0, "explicit_pmf: entries must be finite and >= 0");
        total += p;
    }
    require(std::abs(total.value() - 1.0) <= kPmfTolerance,
            "explicit_pmf: entries sum to " + format_double(total.value()) + ", not 1");
    for (double& p : pmf) p /= total.value();
    return OffspringLaw(OffspringFamily::explicit_pmf, std::move(pmf), {0.0, 0.0});
}

OffspringLaw OffspringLaw::poisson_truncated(double rate, std::size_t cap) {
    require(std::isfinite(rate) && rate > 0.0, "poisson_truncated: rate must be > 0");
    require(cap >= 1 && cap <= kMaxSupport, "poisson_truncated: cap must lie in [1, 1024]");
    std::vector<double> pmf(cap + 1);
    for (std::size_t k = 0; k <= cap; ++k) {
        const double kk = static_cast<double>(k);
        pmf[k] = std::exp(-rate + kk * std::log(rate) - std::lgamma(kk + 1.0));
    }
    const double total = std::accumulate(pmf.begin(), pmf.end(), 0.0);
    for (double& p : pmf) p /= total;
    return OffspringLaw(OffspringFamily::poisson_truncated, std::move(pmf), {rate, static_cast<double>(cap)});
}

OffspringLaw OffspringLaw::geometric(double p, std::size_t cap) {
    require(std::isfinite(p) && p > 0.0 && p <= 1.0, "geometric: p must lie in (0, 1]");
    require(cap >= 1 && cap <= kMaxSupport, "geometric: cap must lie in [1, 1024]");
    std::vector<double> pmf(cap + 1);
    double q = 1.0;
    for (std::size_t k = 0; k <= cap; ++k) {
        pmf[k] = p * q;
        q *= 1.0 - p;
    }
    const double total = std::accumulate(pmf.begin(), pmf.end(), 0.0);
    for (double& x : pmf) x /= total;
    return OffspringLaw(OffspringFamily::geometric, std::move(pmf), {p, static_cast<double>(cap)});
}

std::uint32_t OffspringLaw::sample(SplitMix64& rng) const {
    const double u = rng.uniform();
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    const auto k = static_cast<std::size_t>(it - cumulative_.begin());
    return static_cast<std::uint32_t>(std::min(k, pmf_.size() - 1));
}

std::string OffspringLaw::describe() const {
    std::ostringstream os;
    switch (family_) {
        case OffspringFamily::explicit_pmf: os << "explicit_pmf(K=" << pmf_.size() - 1 << ")"; break;
        case OffspringFamily::poisson_truncated:
            os << "poisson_truncated(" << params_[0] << ", " << params_[1] << ")";
            break;
        case OffspringFamily::geometric: os << "geometric(" << params_[0] << ", " << params_[1] << ")"; break;
    }
    os << " mean " << mean_;
    return os.str();
}

// ------------------------------------------------------------------ moments

StateMoments state_moments(const EnvState& state) {
    StateMoments out;
    out.mean_offspring = state.offspring.mean();
    out.mean_step = state.moving.mean();
    out.central = state.moving.central_moments();
    return out;
}

MomentArray cumulants_from_central_moments(const MomentArray& c) {
    if (!(c[2] > 0.0)) throw DegenerateLaw("cumulants: second central moment must be > 0");
    MomentArray g{};
    g[2] = c[2];
    g[3] = c[3];
    g[4] = c[4] - 3.0 * c[2] * c[2];
    g[5] = c[5] - 10.0 * c[3] * c[2];
    g[6] = c[6] - 15.0 * c[4] * c[2] - 10.0 * c[3] * c[3] + 30.0 * c[2] * c[2] * c[2];
    return g;
}

// -------------------------------------------------------- EnvironmentModel

EnvironmentModel::EnvironmentModel(std::vector<WeightedState> states) : states_(std::move(states)) {
    require(!states_.empty(), "environment model has no states");
    CompensatedSum total;
    for (std::size_t i = 0; i < states_.size(); ++i) {
        const double p = states_[i].probability;
        require(std::isfinite(p) && p > 0.0 && p <= 1.0,
                "states[" + std::to_string(i) + "].probability must lie in (0, 1]");
        total += p;
    }
    require(std::abs(total.value() - 1.0) <= kMixtureTolerance,
            "state probabilities sum to " + format_double(total.value()) + ", not 1");
    std::vector<double> probs;
    for (const auto& ws : states_) {
        moments_.push_back(state_moments(ws.state));
        cumulants_.push_back(cumulants_from_central_moments(moments_.back().central));
        probs.push_back(ws.probability);
    }
    cumulative_ = cumulate(probs);
}

double EnvironmentModel::expected_log_mean() const {
    double e = 0.0;
    for (std::size_t i = 0; i < states_.size(); ++i) {
        const double m = moments_[i].mean_offspring;
        if (m <= 0.0) return -std::numeric_limits<double>::infinity();
        e += states_[i].probability * std::log(m);
    }
    return e;
}

double EnvironmentModel::expected_central_moment(int nu) const {
    check_order(nu);
    double e = 0.0;
    for (std::size_t i = 0; i < states_.size(); ++i) {
        e += states_[i].probability * moments_[i].central[static_cast<std::size_t>(nu)];
    }
    return e;
}

double EnvironmentModel::central_moment_variance(int nu) const {
    const double e = expected_central_moment(nu);
    double v = 0.0;
    for (std::size_t i = 0; i < states_.size(); ++i) {
        const double d = moments_[i].central[static_cast<std::size_t>(nu)] - e;
        v += states_[i].probability * d * d;
    }
    return v;
}

std::size_t EnvironmentModel::sample_state(SplitMix64& rng) const {
    if (states_.size() == 1) return 0;
    const double u = rng.uniform();
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    return std::min(static_cast<std::size_t>(it - cumulative_.begin()), states_.size() - 1);
}

// --------------------------------------------------------------- validation

bool ValidationReport::passed() const {
    return std::none_of(findings.begin(), findings.end(),
                        [](const Finding& f) { return f.level == FindingLevel::fail; });
}

bool ValidationReport::has_warnings() const {
    return std::any_of(findings.begin(), findings.end(),
                       [](const Finding& f) { return f.level == FindingLevel::warn; });
}

ValidationReport validate_model(const EnvironmentModel& model) {
    ValidationReport report;
    report.expected_log_mean = model.expected_log_mean();
    for (int nu = 2; nu <= kMaxMomentOrder; ++nu) {
        report.expected_central[static_cast<std::size_t>(nu)] = model.expected_central_moment(nu);
    }

    const double elm = report.expected_log_mean;
    if (elm > 0.0) {
        report.findings.push_back({FindingLevel::pass, "supercritical",
                                   "E ln m0 = " + format_double(elm) + " > 0"});
    } else {
        report.findings.push_back({FindingLevel::fail, "not-supercritical",
                                   "E ln m0 = " + format_double(elm) +
                                       " <= 0: the process is not supercritical"});
    }

    for (std::size_t i = 0; i < model.size(); ++i) {
        if (model[i].state.moving.is_lattice()) {
            report.findings.push_back(
                {FindingLevel::warn, "cramer",
                 "state " + std::to_string(i) + " moving law " + model[i].state.moving.describe() +
                     " is lattice: Cramer's condition fails for this state"});
        }
    }
    const bool any_cramer = std::any_of(model.states().begin(), model.states().end(),
                                        [](const WeightedState& ws) { return !ws.state.moving.is_lattice(); });
    if (!any_cramer) {
        report.findings.push_back({FindingLevel::warn, "cramer-all",
                                   "every state is lattice: Cramer's condition holds with probability 0"});
    }

    std::ostringstream moments;
    moments << "E sigma0^(nu), nu=2..6:";
    for (int nu = 2; nu <= kMaxMomentOrder; ++nu) {
        moments << ' ' << format_double(report.expected_central[static_cast<std::size_t>(nu)]);
    }
    report.findings.push_back({FindingLevel::pass, "annealed-moments", moments.str()});
    report.findings.push_back({FindingLevel::pass, "offspring-moments",
                               "offspring laws have finite support, so the ln^(1+lambda) moment condition "
                               "holds for every lambda"});
    return report;
}

// ----------------------------------------------------- RealizedEnvironment

RealizedEnvironment::RealizedEnvironment(std::shared_ptr<const EnvironmentModel> model,
                                         std::vector<std::size_t> sequence)
    : model_(std::move(model)), sequence_(std::move(sequence)) {
    if (!model_) throw InvalidModel("realized environment needs a model");
    if (sequence_.empty()) throw EmptyEnvironment("environment length must be >= 1");
    const std::size_t n = sequence_.size();
    for (std::size_t idx : sequence_) {
        if (idx >= model_->size()) throw InvalidModel("environment sequence references unknown state");
    }
    pi_.assign(n + 1, 1.0);
    log_pi_.assign(n + 1, 0.0);
    ell_.assign(n + 1, 0.0);
    for (auto& v : s_) v.assign(n + 1, 0.0);
    for (auto& v : cumulant_prefix_) v.assign(n + 1, 0.0);

    CompensatedSum ell;
    std::array<CompensatedSum, kMaxMomentOrder + 1> s;
    std::array<CompensatedSum, kMaxMomentOrder + 1> cum;
    for (std::size_t k = 0; k < n; ++k) {
        const auto& mom = model_->moments(sequence_[k]);
        const auto& gam = model_->cumulants(sequence_[k]);
        pi_[k + 1] = pi_[k] * mom.mean_offspring;
        log_pi_[k + 1] = log_pi_[k] + std::log(mom.mean_offspring);
        ell += mom.mean_step;
        ell_[k + 1] = ell.value();
        for (std::size_t nu = 2; nu <= kMaxMomentOrder; ++nu) {
            s[nu] += mom.central[nu];
            s_[nu][k + 1] = s[nu].value();
            cum[nu] += gam[nu];
            cumulant_prefix_[nu][k + 1] = cum[nu].value();
        }
    }
}

double RealizedEnvironment::s_nu(int nu, std::size_t k) const {
    check_order(nu);
    return s_[static_cast<std::size_t>(nu)].at(k);
}

double RealizedEnvironment::s(std::size_t k) const { return std::sqrt(s_[2].at(k)); }

double RealizedEnvironment::cumulant_sum(int nu, std::size_t begin, std::size_t end) const {
    check_order(nu);
    if (begin > end || end > length()) throw std::out_of_range("cumulant_sum: bad window");
    const auto& prefix = cumulant_prefix_[static_cast<std::size_t>(nu)];
    return prefix[end] - prefix[begin];
}

RealizedEnvironment sample_environment(std::shared_ptr<const EnvironmentModel> model, std::size_t n,
                                       std::uint64_t seed) {
    if (n == 0) throw EmptyEnvironment("environment length must be >= 1");
    SplitMix64 rng(seed);
    std::vector<std::size_t> seq(n);
    for (auto& x : seq) x = model->sample_state(rng);
    return RealizedEnvironment(std::move(model), std::move(seq));
}

RealizedEnvironment sample_environment(const EnvironmentModel& model, std::size_t n, std::uint64_t seed) {
    return sample_environment(std::make_shared<const EnvironmentModel>(model), n, seed);
}

}  // namespace brwre
