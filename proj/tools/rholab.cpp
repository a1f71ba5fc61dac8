#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "rholab/experiment.hpp"

namespace ex = rholab::experiment;

namespace {

struct RunArgs {
    std::string config;
    std::string output_dir = "out";
    std::optional<unsigned long long> seed;
};

void add_run_flags(CLI::App* cmd, RunArgs& a) {
    cmd->add_option("--config", a.config, "JSON experiment config")->required()->check(CLI::ExistingFile);
    cmd->add_option("--output-dir", a.output_dir, "directory for the report CSV and manifest")
        ->capture_default_str();
    cmd->add_option("--seed", a.seed, "overrides the config seed");
}

// Loads the config, forces the expected kind (and estimator) and runs it.
int run_config(const RunArgs& a, const std::string& kind, const std::string& estimator = "") {
    nlohmann::json cfg;
    try {
        cfg = ex::load_config(a.config);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    if (!kind.empty()) {
        if (!cfg.is_object()) {
            std::cerr << "error: config: expected an object\n";
            return 2;
        }
        if (cfg.contains("kind") && cfg["kind"] != kind) {
            std::cerr << "error: kind: config is '" << cfg["kind"].dump() << "' but the subcommand runs '" << kind
                      << "'\n";
            return 2;
        }
        cfg["kind"] = kind;
        if (!estimator.empty()) {
            if (cfg.contains("estimator") && cfg["estimator"] != estimator) {
                std::cerr << "error: estimator: config is " << cfg["estimator"].dump() << " but the subcommand runs '"
                          << estimator << "'\n";
                return 2;
            }
            cfg["estimator"] = estimator;
        }
    }
    auto res = ex::run(cfg, a.output_dir, a.seed);
    for (const auto& f : res.files) std::cout << a.output_dir << "/" << f << "\n";
    if (res.exit_code != 0) std::cerr << "error: " << res.message << "\n";
    return res.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"rholab: small-noise and large-deviation experiments"};
    app.require_subcommand(1);
    int code = 0;

    RunArgs run_args;
    auto* run = app.add_subcommand("run", "run any experiment config (kind taken from the config)");
    add_run_flags(run, run_args);
    run->callback([&] { code = run_config(run_args, ""); });

    // Module subcommands: <module> <action> --config ...
    struct Alias {
        const char* module;
        const char* action;
        const char* kind;
    };
    static const Alias aliases[] = {{"pde", "sweep", "pde-sweep"},
                                    {"variational", "maximize", "schilder"},
                                    {"sanov", "iterate", "sanov-iterate"},
                                    {"schrodinger", "sweep", "schrodinger-sweep"},
                                    {"bsde", "lsmc", "bsde-lsmc"},
                                    {"generators", "ti-check", "ti-check"},
                                    {"bridge", "check", "bridge-check"}};
    std::map<std::string, CLI::App*> modules;
    std::vector<RunArgs> alias_args(std::size(aliases) + 3);
    std::size_t slot = 0;
    for (const auto& al : aliases) {
        auto*& mod = modules[al.module];
        if (!mod) {
            mod = app.add_subcommand(al.module, std::string(al.module) + " experiments");
            mod->require_subcommand(1);
        }
        auto* cmd = mod->add_subcommand(al.action, std::string("run a ") + al.kind + " config");
        RunArgs& a = alias_args[slot++];
        add_run_flags(cmd, a);
        std::string kind = al.kind;
        cmd->callback([&a, kind, &code] { code = run_config(a, kind); });
    }
    auto* mc = app.add_subcommand("mc", "Monte Carlo estimators");
    mc->require_subcommand(1);
    for (const char* est : {"log_mean_exp", "cramer", "girsanov"}) {
        auto* cmd = mc->add_subcommand(est, std::string("run the ") + est + " estimator");
        RunArgs& a = alias_args[slot++];
        add_run_flags(cmd, a);
        std::string e = est;
        cmd->callback([&a, e, &code] { code = run_config(a, "mc-estimate", e); });
    }

    std::string report_a, report_b;
    double tolerance = 0.0, se_multiple = 0.0;
    auto* cmp = app.add_subcommand("compare", "row-aligned gap differences of two reports");
    cmp->add_option("report_a", report_a)->required();
    cmp->add_option("report_b", report_b)->required();
    cmp->add_option("--tolerance", tolerance, "largest accepted |delta|")->capture_default_str();
    cmp->add_option("--se-multiple", se_multiple,
                    "widen the tolerance to this many combined standard errors when both reports carry `se`")
        ->capture_default_str();
    cmp->callback([&] {
        auto res = ex::compare(report_a, report_b, tolerance, se_multiple);
        if (res.exit_code == 2) {
            std::cerr << "error: " << res.message << "\n";
        } else {
            std::cout << res.diff.str();
            std::cerr << res.message << "\n";
        }
        code = res.exit_code;
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }
    return code;
}
