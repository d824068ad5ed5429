// SPDX-License-Identifier: Apache-2.0
//
// Experiment runner. Subcommands:
//   fedmas run   [config] [--key value ...]
//   fedmas sweep [config] --grid "key=v1,v2;key2=..." [--key value ...]
//
// Config files are flat "key = value" text; command-line flags override
// file values. FEDMAS_THREADS caps worker threads.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "fedmas/config.hpp"
#include "fedmas/errors.hpp"
#include "fedmas/runner.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

void print_usage(std::FILE* to) {
    std::fprintf(to,
                 "usage: fedmas <run|sweep> [config-file] [options]\n"
                 "\n"
                 "  run    run one experiment and write artifacts to output_dir\n"
                 "  sweep  run a cross-product of overrides; requires --grid\n"
                 "\n"
                 "options:\n"
                 "  --grid \"key=v1,v2;key2=w1,w2\"   sweep dimensions (sweep only)\n"
                 "  --<key> <value>                   override any config key\n"
                 "  --help                            show this message\n"
                 "\n"
                 "config keys: method clients classes rounds epochs batch_size lr_max\n"
                 "  lr_min lambda_f iid dirichlet_alpha imbalance_ratio n_max feature_dim\n"
                 "  embed_dim hidden_width shot_hi shot_lo seed eval_every output_dir\n");
}

std::string normalize_key(std::string key) {
    for (char& c : key) {
        if (c == '-') c = '_';
    }
    return key;
}

struct CliArgs {
    std::string command;
    std::optional<std::string> config_path;
    fedmas::KeyValues overrides;
    std::string grid;
    bool help = false;
};

bool parse_args(int argc, char** argv, CliArgs& args, std::string& error) {
    if (argc < 2) {
        error = "missing subcommand";
        return false;
    }
    args.command = argv[1];
    if (args.command == "--help" || args.command == "-h") {
        args.help = true;
        return true;
    }
    if (args.command != "run" && args.command != "sweep") {
        error = "unknown subcommand '" + args.command + "'";
        return false;
    }
    for (int i = 2; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--help" || arg == "-h") {
            args.help = true;
            return true;
        }
        if (arg.rfind("--", 0) == 0) {
            if (i + 1 >= argc) {
                error = "flag " + arg + " needs a value";
                return false;
            }
            const std::string key = normalize_key(arg.substr(2));
            const std::string value = argv[++i];
            if (key == "grid") {
                args.grid = value;
            } else {
                args.overrides[key] = value;
            }
        } else if (!args.config_path) {
            args.config_path = arg;
        } else {
            error = "unexpected positional argument '" + arg + "'";
            return false;
        }
    }
    return true;
}

void print_final_metrics(const fedmas::MetricsReport& m) {
    auto pct = [](double v) { return 100.0 * v; };
    std::printf("balanced_acc %.2f  overall_acc %.2f", pct(m.balanced_acc), pct(m.overall_acc));
    if (m.head_acc) std::printf("  head %.2f", pct(*m.head_acc));
    if (m.medium_acc) std::printf("  medium %.2f", pct(*m.medium_acc));
    if (m.tail_acc) std::printf("  tail %.2f", pct(*m.tail_acc));
    std::printf("  all %.2f\n", pct(m.all_avg));
}

}  // namespace

int main(int argc, char** argv) {
    CliArgs args;
    std::string parse_error;
    if (!parse_args(argc, argv, args, parse_error)) {
        std::fprintf(stderr, "error: %s\n\n", parse_error.c_str());
        print_usage(stderr);
        return kExitConfig;
    }
    if (args.help) {
        print_usage(stdout);
        return kExitOk;
    }

    try {
        const fedmas::ExperimentConfig cfg = fedmas::load_config(args.config_path, args.overrides);
        if (args.command == "run") {
            const fedmas::RunResult r = fedmas::run_experiment(cfg);
            std::printf("run complete: %s (%zu rounds, method %s)\n", r.output_dir.c_str(),
                        cfg.rounds, fedmas::method_name(cfg.method).c_str());
            print_final_metrics(r.final_metrics);
        } else {
            const fedmas::SweepSpec grid = fedmas::parse_grid(args.grid);
            const fedmas::SweepResult r = fedmas::run_sweep(cfg, grid);
            std::printf("sweep complete: %zu cell%s, summary at %s\n", r.num_cells,
                        r.num_cells == 1 ? "" : "s", r.summary_csv.c_str());
        }
        return kExitOk;
    } catch (const fedmas::config_error& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const fedmas::numeric_fault& e) {
        std::fprintf(stderr, "numeric fault: %s\n", e.what());
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitError;
    }
}
