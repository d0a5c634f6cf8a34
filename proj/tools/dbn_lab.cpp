// dbn-lab: train, sweep and analyze diminishing batch-normalized networks.

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dbn/diagnostics.hpp"
#include "dbn/errors.hpp"
#include "dbn/experiment.hpp"
#include "dbn/schedule_analysis.hpp"

namespace {

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, sep)) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::vector<double> parse_values(const std::string& text) {
    std::vector<double> out;
    for (const auto& v : split(text, ',')) {
        std::size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size()) throw dbn::ParameterError("bad grid value '" + v + "'");
        out.push_back(x);
    }
    return out;
}

/// "h=0.5,1,2;k=1,2"
void parse_grid(const std::string& spec, std::vector<double>& hs, std::vector<double>& ks) {
    for (const auto& part : split(spec, ';')) {
        const auto eq = part.find('=');
        if (eq == std::string::npos) throw dbn::ParameterError("grid part '" + part + "' lacks '='");
        const std::string name = part.substr(0, eq);
        if (name == "h") {
            hs = parse_values(part.substr(eq + 1));
        } else if (name == "k") {
            ks = parse_values(part.substr(eq + 1));
        } else {
            throw dbn::ParameterError("grid axis must be h or k, got '" + name + "'");
        }
    }
    if (hs.empty() || ks.empty()) throw dbn::ParameterError("grid needs both h and k values");
}

void warn_schedule(const dbn::ExperimentConfig& config) {
    if (config.optimizer != dbn::OptimizerKind::sgd) return;
    for (const auto& w : dbn::stepsize_warnings(config.eta)) std::cerr << "warning: " << w << "\n";
}

void print_run(const dbn::RunMetrics& run) {
    const auto& last = run.rows.back();
    std::printf("alpha=%s epochs=%zu iterations=%llu train_acc=%.4f val_acc=%.4f best_val_acc=%.4f%s\n",
                run.alpha_label.c_str(), last.epoch, static_cast<unsigned long long>(run.iterations),
                last.train_accuracy, last.val_accuracy, run.best_val_accuracy(), run.diverged ? " DIVERGED" : "");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Diminishing batch normalization lab"};
    app.require_subcommand(1);

    std::string config_path;
    std::uint64_t seed = 0;
    std::string out_path;

    auto* train = app.add_subcommand("train", "Train one network and write per-epoch metrics");
    train->add_option("--config", config_path, "JSON configuration file")->required()->check(CLI::ExistingFile);
    auto* train_seed = train->add_option("--seed", seed, "Override the configured seed");
    train->add_option("--out", out_path, "Metrics CSV path (overrides the config)");

    std::string alphas;
    auto* sweep = app.add_subcommand("sweep", "Compare alpha schedules from one shared initialization");
    sweep->add_option("--config", config_path, "JSON configuration file")->required()->check(CLI::ExistingFile);
    sweep->add_option("--alphas", alphas, "Comma-separated list, e.g. 1,0.5,1/m,1/m^2,0")->required();
    auto* sweep_seed = sweep->add_option("--seed", seed, "Override the configured seed");
    sweep->add_option("--out", out_path, "Summary CSV path (overrides the config)");

    std::string grid = "h=0.5,1,1.5,2,2.001,2.5,3;k=0.5,1,2";
    std::uint64_t truncation = 100000;
    auto* schedules = app.add_subcommand("schedules", "Check stepsize conditions for power schedules");
    schedules->add_option("--grid", grid, "Grid spec, e.g. \"h=1.5,2.5;k=1\"");
    schedules->add_option("--truncation", truncation, "Truncation M for the partial sums")->check(CLI::PositiveNumber);

    double step = 1e-5;
    std::string activation = "relu";
    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of backpropagation");
    gradcheck->add_option("--seed", seed, "Seed for the random network")->required();
    gradcheck->add_option("--step", step, "Central-difference step");
    gradcheck->add_option("--activation", activation, "relu, identity or leaky_relu:<slope>");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed() || sweep->parsed()) {
            dbn::ExperimentConfig config = dbn::load_config(config_path);
            if (train_seed->count() > 0 || sweep_seed->count() > 0) config.seed = seed;
            if (!out_path.empty()) config.output = out_path;
            warn_schedule(config);

            if (train->parsed()) {
                const auto run = dbn::run_experiment(config);
                print_run(run);
                if (config.output.empty()) std::cout << dbn::metrics_csv(run);
                return run.diverged ? 2 : 0;
            }
            std::vector<dbn::AlphaSchedule> schedules_list;
            for (const auto& a : split(alphas, ',')) schedules_list.push_back(dbn::parse_alpha(a));
            const auto result = dbn::compare_alphas(config, schedules_list);
            for (const auto& run : result.runs) print_run(run);
            if (config.output.empty()) std::cout << dbn::sweep_csv(result);
            return 0;
        }

        if (schedules->parsed()) {
            std::vector<double> hs;
            std::vector<double> ks;
            parse_grid(grid, hs, ks);
            std::cout << "h,k,thm31,lemma42,S1,S2,S3,S4,agreement\n";
            for (double h : hs) {
                for (double k : ks) {
                    const auto r = dbn::classify(dbn::SchedulePair::power(h, k), truncation);
                    std::cout << dbn::csv_number(h) << "," << dbn::csv_number(k) << ","
                              << (r.theorem31_ok ? "true" : "false") << "," << (r.lemma42_ok ? "true" : "false") << ","
                              << dbn::csv_number(r.sums.s1) << "," << dbn::csv_number(r.sums.s2) << ","
                              << dbn::csv_number(r.sums.s3) << "," << dbn::csv_number(r.sums.s4) << ","
                              << (r.agreement ? "true" : "false") << "\n";
                }
            }
            return 0;
        }

        if (gradcheck->parsed()) {
            dbn::NetworkArch arch{{3, 5, 5, 2}, dbn::parse_activation(activation), dbn::OutputHead::linear_logits};
            const auto problem = dbn::make_gradient_problem(seed, arch);
            const auto r = dbn::gradient_check(problem, step);
            std::printf("components=%zu max_relative_error=%.3e worst=%s\n", r.components, r.max_relative_error,
                        r.worst_component.c_str());
            return r.max_relative_error < 1e-5 ? 0 : 1;
        }
    } catch (const dbn::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
