#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "drft/config.hpp"
#include "drft/metrics.hpp"
#include "drft/model.hpp"

namespace drft {

struct EpochStats {
    int epoch = 0;
    double loss_reg = 0.0;
    double loss_tag = 0.0;
    double loss_dqa = 0.0;
    double loss_cl = 0.0;
    double train_miou = 0.0;  // percentage
};

struct TrainingRun {
    std::vector<EpochStats> epochs;
    std::string checkpoint_path;
    std::string csv_path;
};

// Reference-mode training: single-threaded, deterministic per seed. Writes a
// per-epoch CSV and a final checkpoint under cfg.out_dir. When `resume_from`
// is given, parameters, optimizer state and the epoch counter continue from
// the checkpoint. `stop_at_train_miou` (percentage) ends the run early once
// reached.
TrainingRun run_training(const RunConfig& cfg,
                         const std::optional<std::string>& resume_from = std::nullopt,
                         std::optional<double> stop_at_train_miou = std::nullopt);

struct EvaluationRun {
    EvalResult metrics;
    std::vector<std::string> weight_labels;
    std::vector<double> overall_mean_weights;
    std::map<ActionLabel, std::vector<double>> category_mean_weights;
    std::string csv_path;
};

// Evaluates a checkpoint on a split and writes the per-category CSV
// (metrics plus mean fusion weights).
EvaluationRun run_evaluation(const RunConfig& cfg, const std::string& checkpoint_path,
                             const std::string& split);

// Shared helper: per-modality raw feature tensors of one record.
ModalityTensors load_record_features(const Dataset& ds, const RunConfig& cfg,
                                     const std::string& video_id);

std::map<Modality, int> dataset_input_dims(const Dataset& ds, const RunConfig& cfg);

}  // namespace drft
