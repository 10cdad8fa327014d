#include <cstdint>
#include <exception>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "redmotion/data/dataset.hpp"
#include "redmotion/data/synthetic.hpp"
#include "redmotion/harness.hpp"
#include "redmotion/run_config.hpp"

namespace {

using namespace redmotion;

std::string dashed(std::string key)
{
    for (auto& c : key) {
        if (c == '_') c = '-';
    }
    return key;
}

// Registers one flag per RunConfig key; values are applied after the config file.
struct RunOptions {
    std::string config_file;
    std::map<std::string, std::string> flags;
    std::vector<std::string> sets;

    void attach(CLI::App* app)
    {
        app->add_option("--config", config_file, "key = value run configuration file")->check(CLI::ExistingFile);
        app->add_option("--set", sets, "extra key=value override (repeatable)");
        for (const auto& key : run_config_keys()) {
            if (key == "mode") continue;
            app->add_option("--" + dashed(key), flags[key], "override '" + key + "'");
        }
    }

    RunConfig build(RunMode mode) const
    {
        RunConfig config;
        if (!config_file.empty()) apply_run_config_file(config, config_file);
        for (const auto& [key, value] : flags) {
            if (!value.empty()) apply_run_option(config, key, value);
        }
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + s + "'");
            apply_run_option(config, s.substr(0, eq), s.substr(eq + 1));
        }
        config.mode = mode;
        config.validate();
        return config;
    }
};

void print_run(const RunResult& r, const RunConfig& config)
{
    std::cout << to_string(config.mode) << ": " << r.log.records().size() << " steps on " << r.train_samples << " samples in "
              << r.seconds << " s\n";
    if (!r.log.records().empty()) std::cout << "final loss " << r.log.records().back().loss << '\n';
    if (r.final_train_nll) std::cout << "train nll " << *r.final_train_nll << '\n';
    if (r.final_val_nll) std::cout << "validation nll " << *r.final_val_nll << '\n';
    std::cout << "parameter digest " << r.parameter_digest << "\noutputs in " << config.out_dir.string() << '\n';
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Motion prediction with road environment descriptors"};
    app.require_subcommand(1);

    RunOptions pretrain_opts, finetune_opts, joint_opts, eval_opts;
    std::string objective = "rbt";
    auto* pretrain = app.add_subcommand("pretrain", "self-supervised pre-training");
    pretrain_opts.attach(pretrain);
    pretrain->add_option("--objective", objective, "rbt | simclr | tmcl | mcl_tmcl")
        ->check(CLI::IsMember({"rbt", "simclr", "tmcl", "mcl_tmcl"}));

    auto* finetune = app.add_subcommand("finetune", "motion prediction training (optionally from --init-checkpoint)");
    finetune_opts.attach(finetune);
    auto* joint = app.add_subcommand("joint", "motion training with the auxiliary twin loss");
    joint_opts.attach(joint);

    std::string checkpoint;
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on holdout scenes");
    eval_opts.attach(eval);
    eval->add_option("--checkpoint", checkpoint, "checkpoint to evaluate (alias of --init-checkpoint)");

    std::string gen_config, gen_out;
    std::size_t gen_count = 0;
    std::uint64_t gen_seed = 0;
    bool gen_map_only = false;
    std::vector<std::string> gen_sets;
    auto* generate = app.add_subcommand("generate-data", "write synthetic scenes as a scenario file");
    generate->add_option("--config", gen_config, "synthetic scene configuration")->check(CLI::ExistingFile);
    generate->add_option("--count", gen_count, "number of scenes")->required();
    generate->add_option("--out", gen_out, "output scenario file")->required();
    generate->add_option("--seed", gen_seed, "base seed");
    generate->add_option("--set", gen_sets, "extra key=value override (repeatable)");
    generate->add_flag("--map-only", gen_map_only, "drop agents and labels (map-only variant)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*generate) {
            data::SyntheticConfig config = gen_config.empty() ? data::SyntheticConfig{} : data::load_synthetic_config(gen_config);
            for (const auto& s : gen_sets) {
                const auto eq = s.find('=');
                if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + s + "'");
                data::apply_synthetic_option(config, s.substr(0, eq), s.substr(eq + 1));
            }
            config.validate();
            std::vector<RoadScene> scenes;
            scenes.reserve(gen_count);
            for (std::size_t i = 0; i < gen_count; ++i) {
                RoadScene scene = data::generate_synthetic_scene(config, data::derive_seed(gen_seed, i));
                scenes.push_back(gen_map_only ? data::strip_agents(scene) : std::move(scene));
            }
            data::save_scenarios(scenes, gen_out);
            std::cout << "wrote " << scenes.size() << " scenes to " << gen_out << '\n';
            return 0;
        }
        if (*eval) {
            RunConfig config = eval_opts.build(RunMode::eval);
            if (!checkpoint.empty()) config.init_checkpoint = checkpoint;
            const EvalOutput out = run_eval_from_files(config);
            std::cout << report_to_json(out.report) << '\n';
            return 0;
        }
        RunConfig config;
        if (*pretrain) config = pretrain_opts.build(parse_run_mode("pretrain_" + objective));
        else if (*finetune) config = finetune_opts.build(RunMode::finetune);
        else config = joint_opts.build(RunMode::joint_rbt_aux);
        print_run(run_mode_from_files(config), config);
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
