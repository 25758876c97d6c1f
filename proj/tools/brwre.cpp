// brwre: command-line front end.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "brwre/fault_injection.hpp"
#include "brwre/harness.hpp"

namespace {

struct RunFlags {
    std::string config;
    brwre::RunOptions opts;
    std::uint64_t seed = 0;
    std::size_t replicas = 0;
    std::string out;
};

void add_run_flags(CLI::App* cmd, RunFlags& f, bool with_replicas) {
    cmd->add_option("config", f.config, "JSON experiment configuration")->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", f.seed, "Master seed (overrides experiment.seed)");
    if (with_replicas) cmd->add_option("--replicas", f.replicas, "Replica count (overrides experiment.replicas)");
    cmd->add_option("--workers", f.opts.workers, "Worker threads; BRWRE_WORKERS takes precedence")
        ->default_val(1u)
        ->check(CLI::Range(1u, 1024u));
    cmd->add_option("--out", f.out, "Output directory (overrides experiment.output_dir)");
}

brwre::RunOptions finish(CLI::App* cmd, RunFlags& f) {
    brwre::RunOptions o = f.opts;
    if (cmd->count("--seed")) o.seed = f.seed;
    if (cmd->get_option_no_throw("--replicas") && cmd->count("--replicas")) o.replicas = f.replicas;
    if (cmd->count("--out")) o.out_dir = f.out;
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Branching random walks in random environments: simulation and expansion checks"};
    app.set_version_flag("--version", std::string(brwre::kVersion));
    app.require_subcommand(1);

    std::string validate_config;
    auto* validate = app.add_subcommand("validate", "Check a model for supercriticality and the Cramer condition");
    validate->add_option("config", validate_config, "JSON configuration")->required()->check(CLI::ExistingFile);

    RunFlags sim_flags;
    auto* simulate = app.add_subcommand("simulate", "Simulate replicas and write martingale series");
    add_run_flags(simulate, sim_flags, true);
    simulate->add_flag("--dump-trajectories", sim_flags.opts.dump_trajectories,
                       "Also write every particle (trajectories.csv) with a JSON sidecar");

    RunFlags edge_flags;
    auto* edge = app.add_subcommand("verify-edgeworth", "Compare Edgeworth main terms with a numerical oracle");
    add_run_flags(edge, edge_flags, false);

    RunFlags exp_flags;
    auto* expansion = app.add_subcommand("verify-expansion", "Residuals of the order 0..3 expansions and the A + B split");
    add_run_flags(expansion, exp_flags, true);

    brwre::SelftestOptions self_opts;
    std::string fault;
    auto* selftest = app.add_subcommand("selftest", "Run the reduced property battery");
    selftest->add_option("--inject-fault", fault, "Deliberately break one component")
        ->check(CLI::IsMember(brwre::fault_names()));
    bool quiet = false;
    selftest->add_flag("--quiet", quiet, "Print failing checks only");

    CLI11_PARSE(app, argc, argv);

    if (*validate) return brwre::cmd_validate(validate_config, std::cout, std::cerr);
    if (*simulate) return brwre::cmd_simulate(sim_flags.config, finish(simulate, sim_flags), std::cout, std::cerr);
    if (*edge) return brwre::cmd_verify_edgeworth(edge_flags.config, finish(edge, edge_flags), std::cout, std::cerr);
    if (*expansion) {
        return brwre::cmd_verify_expansion(exp_flags.config, finish(expansion, exp_flags), std::cout, std::cerr);
    }
    if (*selftest) {
        if (!fault.empty()) self_opts.inject_fault = fault;
        self_opts.verbose = !quiet;
        return brwre::cmd_selftest(self_opts, std::cout, std::cerr);
    }
    return brwre::kExitUsage;
}
