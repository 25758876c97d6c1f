// harness.hpp
//
// Experiment configuration, seeding and the command implementations behind
// the brwre CLI. Every output byte is a function of (config, seed); worker
// count only changes wall time.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "brwre/edgeworth.hpp"
#include "brwre/environment.hpp"
#include "brwre/expansion.hpp"
#include "brwre/simulator.hpp"

namespace brwre {

inline constexpr const char* kVersion = "1.0.0";

/// Malformed or inconsistent configuration. `where` is a JSON path such as
/// model.states[1].moving.rate, or line:column for syntax errors.
struct ConfigError : std::runtime_error {
    ConfigError(std::string where_, const std::string& what_)
        : std::runtime_error(where_ + ": " + what_), where(std::move(where_)) {}
    std::string where;
};

enum class WindowSource { sampled, homogeneous };

struct EdgeworthStudy {
    std::vector<std::size_t> lengths{8, 16, 32, 64};
    double x_min = -4.0;
    double x_max = 4.0;
    std::size_t x_points = 81;
    int order = 5;
    WindowSource source = WindowSource::sampled;
    /// State repeated along the window when source is homogeneous.
    std::size_t homogeneous_state = 0;
};

struct ExperimentConfig {
    std::shared_ptr<const EnvironmentModel> model;
    std::string name = "experiment";

    std::uint64_t seed = 1;
    std::size_t replicas = 100;
    std::size_t n_max = 16;
    std::size_t particle_cap = 2'000'000;

    std::vector<std::size_t> n_list{8, 12, 16, 24, 32};
    std::vector<double> t_grid{-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0};
    double beta = 0.12;
    int order_max = 3;
    std::size_t batches = 1;
    std::size_t gate_n = 24;
    bool compute_ab = true;
    CdfProviderKind ab_provider = CdfProviderKind::exact_gaussian;

    OracleMethod oracle = GridConvolutionOracle{};
    EdgeworthStudy edgeworth;

    std::string output_dir = "brwre-out";
};

EnvironmentModel parse_model(const std::string& json_text, const std::string& source = "<config>");
ExperimentConfig parse_config(const std::string& json_text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::string& path);

/// Canonical JSON of every semantic field (output paths excluded).
std::string canonical_config(const ExperimentConfig& cfg);
/// FNV-1a 64 of canonical_config, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

struct RunOptions {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> replicas;
    std::optional<std::string> out_dir;
    unsigned workers = 1;
    bool dump_trajectories = false;
};

/// BRWRE_WORKERS, when set to a positive integer, overrides the flag value.
unsigned resolve_workers(unsigned flag_value);

/// Exit codes shared by all commands.
enum ExitCode : int {
    kExitOk = 0,
    kExitFailed = 1,      // validation failure or a failed verdict
    kExitUsage = 2,       // unreadable or malformed input
    kExitAdvisory = 3,    // completed, but more than half the replicas hit the particle cap
};

int cmd_validate(const std::string& config_path, std::ostream& out, std::ostream& err);
int cmd_simulate(const std::string& config_path, const RunOptions& opts, std::ostream& out, std::ostream& err);
int cmd_verify_edgeworth(const std::string& config_path, const RunOptions& opts, std::ostream& out,
                         std::ostream& err);
int cmd_verify_expansion(const std::string& config_path, const RunOptions& opts, std::ostream& out,
                         std::ostream& err);

struct SelftestOptions {
    std::optional<std::string> inject_fault;
    bool verbose = true;
};

int cmd_selftest(const SelftestOptions& opts, std::ostream& out, std::ostream& err);

}  // namespace brwre
