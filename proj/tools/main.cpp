#include <algorithm>
#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <yaml-cpp/exceptions.h>

#include "commands.hpp"
#include "ionforce/errors.hpp"

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitFit = 3;

int unconverged(const ionforce::FitResult& fit) {
    if (fit.diagnostics.converged) return 0;
    std::cerr << "warning: " << fit.model << " fit did not converge\n";
    return kExitFit;
}

}  // namespace

int main(int argc, char** argv) {
    using namespace ionforce::cli;

    CLI::App app{"Lock-in force sensing with a trapped ion: simulation and maximum-likelihood fits"};
    app.require_subcommand(1);

    std::optional<std::string> config_path;
    Overrides overrides;
    const auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "YAML run configuration")->check(CLI::ExistingFile);
        cmd->add_option("--seed", overrides.seed, "random seed (u64)");
        cmd->add_option("--out", overrides.out_dir, "output directory");
        cmd->add_option("--format", overrides.format, "scan file format")->check(CLI::IsMember({"csv", "json"}));
        cmd->add_option("--threads", overrides.threads, "worker threads")->check(CLI::PositiveNumber);
        cmd->add_flag("--plot", overrides.plot, "also write PPM images");
    };
    const auto add_physics = [&](CLI::App* cmd) {
        cmd->add_option("--force", overrides.force, "force amplitude, e.g. '8.6e-19 N' (bare number: N)");
        cmd->add_option("--shots", overrides.shots, "shots per analysis phase")->check(CLI::PositiveNumber);
    };

    auto* sim_sync = app.add_subcommand("simulate-sync", "simulate a triggered (tau, xi) scan");
    auto* sim_async = app.add_subcommand("simulate-async", "simulate an untriggered tau scan");
    auto* fit = app.add_subcommand("fit", "fit a scan file");
    auto* fig2 = app.add_subcommand("reproduce-fig2", "phase map: simulate and fit");
    auto* fig3 = app.add_subcommand("reproduce-fig3", "contrast curves for n = 10, 20: simulate and fit");
    auto* selftest = app.add_subcommand("selftest", "oracle and property checks");
    for (auto* cmd : {sim_sync, sim_async, fit, fig2, fig3}) add_common(cmd);
    for (auto* cmd : {sim_sync, sim_async, fig2, fig3}) add_physics(cmd);

    FitRequest request;
    fit->add_option("--data", request.data_path, "scan file (.csv or .json)")->required()->check(CLI::ExistingFile);
    fit->add_option("--model", request.model, "fit model")
        ->required()
        ->check(CLI::IsMember({"fringe", "phase-map", "contrast-curve"}));

    bool quick = false;
    ionforce::CheckOptions check_options;
    unsigned selftest_threads = 1;
    selftest->add_flag("--quick", quick, "smaller sample sizes");
    selftest->add_option("--seed", check_options.seed, "random seed (u64)");
    selftest->add_option("--threads", selftest_threads, "worker threads")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }

    try {
        if (selftest->parsed()) {
            check_options.quick = quick;
            check_options.threads = selftest_threads;
            return cmd_selftest(check_options, std::cout) ? 0 : kExitNumerical;
        }
        if (sim_sync->parsed()) {
            cmd_simulate_sync(resolve_config(fig2_defaults(), config_path, overrides), std::cout);
            return 0;
        }
        if (sim_async->parsed()) {
            cmd_simulate_async(resolve_config(fig3_defaults(), config_path, overrides), std::cout);
            return 0;
        }
        if (fit->parsed()) {
            const auto defaults = request.model == "contrast-curve" ? fig3_defaults() : fig2_defaults();
            const auto out = cmd_fit(resolve_config(defaults, config_path, overrides), request, std::cout);
            int code = 0;
            if (request.model != "fringe") code = unconverged(out.results.front());
            return code;
        }
        if (fig2->parsed()) {
            const auto out = cmd_reproduce_fig2(resolve_config(fig2_defaults(), config_path, overrides), std::cout);
            return unconverged(out.fit.result);
        }
        if (fig3->parsed()) {
            int code = 0;
            for (const auto& o : cmd_reproduce_fig3(resolve_config(fig3_defaults(), config_path, overrides), std::cout)) {
                code = std::max(code, unconverged(o.fit.result));
            }
            return code;
        }
    } catch (const ionforce::ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const ionforce::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const ionforce::FitError& e) {
        std::cerr << "fit failed: " << e.what() << '\n';
        return kExitFit;
    } catch (const YAML::Exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    }
    return 0;
}
