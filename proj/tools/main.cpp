// Experiment driver: run / validate / list-fixtures over INI configs.
//
// Exit codes: 0 success, 2 configuration or usage problem, 3 solver failure.
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>

#include <CLI11.hpp>

#include "sievehom/experiment.hpp"

namespace {

using namespace sievehom;

int env_threads() {
    const char* raw = std::getenv("SIEVE_HOMOG_THREADS");
    if (!raw || !*raw) return 0;
    char* end = nullptr;
    const long v = std::strtol(raw, &end, 10);
    if (end == raw || *end != '\0' || v < 0) {
        std::fprintf(stderr, "warning: ignoring malformed SIEVE_HOMOG_THREADS=%s\n", raw);
        return 0;
    }
    return static_cast<int>(v);
}

// --config accepts a file path or the name of a bundled fixture.
IniFile load_config(const std::string& config) {
    if (std::filesystem::exists(config)) return IniFile::parse_file(config);
    if (const Fixture* f = find_fixture(config)) return IniFile::parse_string(f->ini);
    throw ValidationError("config: no such file or bundled fixture: " + config);
}

int do_run(const std::string& config, const std::string& out, int threads, long long seed,
           bool quiet) {
    const auto cfg = ExperimentConfig::from_ini(load_config(config));
    RunOptions opts;
    opts.out_root = out;
    opts.threads = threads > 0 ? threads : env_threads();
    opts.seed = seed;
    opts.quiet = quiet;
    const RunResult res = run_experiment(cfg, opts);
    if (!quiet) {
        std::printf("wrote %s\n", res.dir.c_str());
        for (const auto& f : res.files) std::printf("  %s\n", f.c_str());
    }
    return 0;
}

int do_validate(const std::string& config, bool quiet) {
    const auto cfg = ExperimentConfig::from_ini(load_config(config));
    const auto diags = validate_config(cfg);
    bool failed = false;
    for (const auto& d : diags) {
        const bool is_err = d.level == Diagnostic::Level::Error;
        failed = failed || is_err;
        if (!quiet || is_err)
            std::fprintf(stderr, "%s %s: %s\n", is_err ? "error" : "warning", d.key.c_str(),
                         d.message.c_str());
    }
    if (!quiet && diags.empty()) std::printf("ok: no diagnostics\n");
    return failed ? 2 : 0;
}

int do_list_fixtures() {
    for (const auto& f : builtin_fixtures()) std::printf("%-24s %s\n", f.name, f.summary);
    std::printf("\nrun one with: sieve-homog run --config <name>\n");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"periodic-sieve capacity and homogenization experiments"};
    app.require_subcommand(1);

    std::string config, out;
    int threads = 0;
    long long seed = -1;
    bool quiet = false;

    auto add_common = [&](CLI::App* cmd, bool needs_config) {
        auto* opt = cmd->add_option("--config", config, "config file or bundled fixture name");
        if (needs_config) opt->required();
        cmd->add_option("--out", out, "output root directory (default: config output dir)");
        cmd->add_option("--threads", threads,
                        "worker threads (fallback: SIEVE_HOMOG_THREADS, then 1)");
        cmd->add_option("--seed", seed, "seed recorded in the manifest");
        cmd->add_flag("--quiet", quiet, "suppress progress output");
    };

    CLI::App* run = app.add_subcommand("run", "run an experiment and write its artifacts");
    add_common(run, true);
    CLI::App* validate = app.add_subcommand("validate", "check a config without running");
    add_common(validate, true);
    CLI::App* list = app.add_subcommand("list-fixtures", "list bundled configurations");
    list->add_flag("--quiet", quiet, "suppress progress output");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (run->parsed()) return do_run(config, out, threads, seed, quiet);
        if (validate->parsed()) return do_validate(config, quiet);
        return do_list_fixtures();
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const SolverError& e) {
        std::fprintf(stderr, "solver error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
}
