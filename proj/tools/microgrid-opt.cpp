// microgrid-opt: validate and run storage scheduling scenarios.

#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "mgopt/runner.hpp"

namespace {

enum Exit { ok = 0, config_error = 1, infeasible = 2, numerical = 3 };

int cmd_validate(const std::string& path)
{
    mgopt::ConfigLoad load;
    try {
        load = mgopt::load_config(path);
    } catch (const mgopt::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return config_error;
    }
    for (const auto& d : load.diagnostics) std::cout << path << ": " << d << '\n';
    if (load.diagnostics.empty()) std::cout << path << ": ok (" << mgopt::to_string(load.config.strategy) << ")\n";
    return load.diagnostics.empty() ? ok : config_error;
}

struct JobResult {
    int code = ok;
    std::string message;
    mgopt::RunSummary summary;
};

JobResult run_one(mgopt::ScenarioConfig cfg, const std::filesystem::path& dir)
{
    JobResult r;
    try {
        r.summary = mgopt::run_scenario(cfg, dir);
    } catch (const mgopt::InfeasibleError& e) {
        r = {infeasible, std::string("infeasible: ") + e.what(), {}};
    } catch (const mgopt::NumericalError& e) {
        r = {numerical, std::string("numerical breakdown: ") + e.what(), {}};
    } catch (const std::exception& e) {
        r = {config_error, std::string("error: ") + e.what(), {}};
    }
    return r;
}

int cmd_run(const std::string& path, const std::optional<std::string>& out, const std::optional<std::uint64_t>& seed_override, int jobs, bool quiet)
{
    mgopt::ConfigLoad load;
    try {
        load = mgopt::load_config(path);
    } catch (const mgopt::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return config_error;
    }
    if (!load.diagnostics.empty()) {
        for (const auto& d : load.diagnostics) std::cerr << path << ": " << d << '\n';
        return config_error;
    }
    mgopt::ScenarioConfig cfg = load.config;
    if (seed_override) cfg.seed = *seed_override;
    const std::filesystem::path base = out ? std::filesystem::path(*out) : std::filesystem::path(cfg.output_dir);

    if (jobs <= 1) {
        const JobResult r = run_one(cfg, base);
        if (r.code != ok) {
            std::cerr << r.message << '\n';
            return r.code;
        }
        if (!quiet)
            std::cout << mgopt::to_string(cfg.strategy) << " objective=" << mgopt::format_double(r.summary.objective)
                      << " baseline=" << mgopt::format_double(r.summary.baseline)
                      << " improvement=" << mgopt::format_double(r.summary.improvement_percent) << "% -> " << base.string() << '\n';
        return ok;
    }

    // One seed per job, each in its own directory.
    std::vector<JobResult> results(static_cast<std::size_t>(jobs));
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) {
        pool.emplace_back([&, j] {
            mgopt::ScenarioConfig c = cfg;
            c.seed = cfg.seed + static_cast<std::uint64_t>(j);
            results[static_cast<std::size_t>(j)] = run_one(c, base / ("seed-" + std::to_string(c.seed)));
        });
    }
    for (auto& t : pool) t.join();
    int code = ok;
    for (int j = 0; j < jobs; ++j) {
        const auto& r = results[static_cast<std::size_t>(j)];
        const std::uint64_t s = cfg.seed + static_cast<std::uint64_t>(j);
        if (r.code != ok) {
            std::cerr << "seed " << s << ": " << r.message << '\n';
            if (code == ok) code = r.code;
        } else if (!quiet) {
            std::cout << "seed " << s << " objective=" << mgopt::format_double(r.summary.objective)
                      << " baseline=" << mgopt::format_double(r.summary.baseline)
                      << " improvement=" << mgopt::format_double(r.summary.improvement_percent) << "%\n";
        }
    }
    return code;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Microgrid storage scheduling and dispatch"};
    app.require_subcommand(1);

    std::string validate_path;
    auto* val = app.add_subcommand("validate", "Check a scenario file without running it");
    val->add_option("config", validate_path, "Scenario file")->required();

    std::string run_path;
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed_override;
    int jobs = 1;
    bool quiet = false;
    auto* run = app.add_subcommand("run", "Run a scenario and write its report");
    run->add_option("--config", run_path, "Scenario file")->required();
    run->add_option("--out", out, "Output directory (overrides output_dir)");
    run->add_option("--seed-override", seed_override, "Replace the configured seed");
    run->add_option("--jobs", jobs, "Run this many consecutive seeds in parallel")->check(CLI::Range(1, 1024));
    run->add_flag("--quiet", quiet, "Suppress the summary line");

    CLI11_PARSE(app, argc, argv);
    if (*val) return cmd_validate(validate_path);
    return cmd_run(run_path, out, seed_override, jobs, quiet);
}
