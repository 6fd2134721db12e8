// koop_cli: config-driven front end for data generation, training, evaluation
// and closed-loop control. Exit status is 0 on success, otherwise the error
// category's code (usage 2, data 3, numerical 4, divergence 5, dependency 6,
// synthesis 7); the category is also printed on stderr as `error[<category>]`.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "koop/cli/commands.hpp"

namespace {

struct Common {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "run configuration (JSON, schema_version 1)")->required();
    cmd->add_option("--out", c.out, "output directory (overrides config `out`)");
    cmd->add_option("--seed", c.seed, "random seed (overrides config `seed`)");
    cmd->add_option("--threads", c.threads, "worker threads")->check(CLI::PositiveNumber);
}

koop::cli::Context context(const Common& c) {
    return koop::cli::make_context(koop::cli::load_config(c.config), c.out, c.seed, c.threads);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Linear embedding models with oblique projection: data, training, evaluation, control"};
    app.set_version_flag("--version", std::string(koop::cli::kCodeVersion));
    app.require_subcommand(1);

    Common common;
    std::string task;

    auto* gen = app.add_subcommand("gen-data", "simulate the plant and write dataset.csv");
    add_common(gen, common);
    auto* train = app.add_subcommand("train", "fit a model from dataset.csv and write model.json");
    add_common(train, common);
    auto* eval = app.add_subcommand("eval", "evaluate model.json");
    add_common(eval, common);
    eval->add_option("task", task, "predict | contour | basin | forecast | sensitivity")
        ->required()
        ->check(CLI::IsMember({"predict", "contour", "basin", "forecast", "sensitivity"}));
    auto* control = app.add_subcommand("control", "closed-loop simulation with a controller designed on model.json");
    add_common(control, common);
    control->add_option("task", task, "lqr | servo | mpc")->required()->check(CLI::IsMember({"lqr", "servo", "mpc"}));
    auto* verify = app.add_subcommand("verify", "run the analytic oracle checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : koop::UsageError("").exit_code();
    }

    try {
        if (verify->parsed()) return koop::cli::cmd_verify(std::cout);
        const auto ctx = context(common);
        if (gen->parsed()) return koop::cli::cmd_gen_data(ctx);
        if (train->parsed()) return koop::cli::cmd_train(ctx);
        if (eval->parsed()) return koop::cli::cmd_eval(ctx, task);
        if (control->parsed()) return koop::cli::cmd_control(ctx, task);
    } catch (const koop::Error& e) {
        std::cerr << "error[" << e.category() << "]: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error[internal]: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
