#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "drft/data.hpp"

namespace drft {

// Flat dotted-key configuration. Defaults reproduce the full three-stream
// model; every ablation is reachable by flags alone.
struct RunConfig {
    // paths
    std::string data_dir = "out/synth";
    std::string out_dir = "out/run";

    // model dims
    int feature_dim = 32;   // c
    int heads = 4;          // H
    int sqa_steps = 3;      // S
    int coattn_layers = 1;
    int ff_mult = 2;
    std::vector<Modality> streams = {Modality::Rgb, Modality::Flow, Modality::Depth};

    // ablation flags
    bool use_transformer = true;
    bool share_common_block = true;
    bool learnable_weights = true;
    bool use_contrastive = true;
    Modality common_modality = Modality::Rgb;

    // contrastive
    double temperature = 0.1;
    int num_positives = 3;
    int num_negatives = 4;

    // losses
    double lambda_dqa = 0.3;

    // optimizer / schedule
    double lr = 4e-4;
    int epochs = 500;
    int batch_size = 1;
    uint64_t seed = 1;

    // text
    OovPolicy oov_policy = OovPolicy::Error;

    // eval
    std::string eval_split = "val";

    // synthetic generator section
    SyntheticConfig synth;

    static RunConfig load(const std::string& path);
    void set(const std::string& key, const std::string& value);
    void validate() const;

    // Common modality actually usable given the active streams.
    Modality resolved_common() const;
};

}  // namespace drft
