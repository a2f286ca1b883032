#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "drft/cli.hpp"
#include "drft/config.hpp"

int main(int argc, char** argv) {
    CLI::App app{"DRFT: multi-modal text-guided video temporal grounding"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<int> seed_override;
    std::string checkpoint_path;
    std::string split;
    bool inject_fault = false;

    CLI::App* synth = app.add_subcommand("synth", "generate the synthetic tri-modal dataset");
    synth->add_option("--config", config_path, "config file")->required();
    synth->add_option("--seed", seed_override, "override train.seed and synth.seed");

    CLI::App* train = app.add_subcommand("train", "train a model");
    train->add_option("--config", config_path, "config file")->required();
    train->add_option("--checkpoint", checkpoint_path, "resume from checkpoint");
    train->add_option("--seed", seed_override, "override train.seed");

    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on a split");
    eval->add_option("--config", config_path, "config file")->required();
    eval->add_option("--checkpoint", checkpoint_path, "checkpoint path");
    eval->add_option("--split", split, "annotation split name (default: eval.split)");
    eval->add_option("--seed", seed_override, "override train.seed");

    CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient checks");
    gradcheck->add_option("--config", config_path, "config file")->required();
    gradcheck->add_flag("--inject-fault", inject_fault,
                        "corrupt one backward rule to demonstrate detection");

    CLI11_PARSE(app, argc, argv);

    try {
        drft::RunConfig cfg = drft::RunConfig::load(config_path);
        if (const char* out_dir = std::getenv("DRFT_OUT_DIR")) {
            cfg.out_dir = out_dir;
        }
        if (seed_override) {
            cfg.seed = static_cast<uint64_t>(*seed_override);
            cfg.synth.seed = static_cast<uint64_t>(*seed_override);
        }

        if (synth->parsed()) return drft::cmd_synth(cfg);
        if (train->parsed()) {
            std::optional<std::string> resume;
            if (!checkpoint_path.empty()) resume = checkpoint_path;
            return drft::cmd_train(cfg, resume);
        }
        if (eval->parsed()) {
            if (checkpoint_path.empty()) checkpoint_path = cfg.out_dir + "/model.ckpt";
            if (split.empty()) split = cfg.eval_split;
            return drft::cmd_eval(cfg, checkpoint_path, split);
        }
        if (gradcheck->parsed()) return drft::cmd_gradcheck(cfg, inject_fault);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
