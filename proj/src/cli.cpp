#include "drft/cli.hpp"

#include <cstdio>
#include <iostream>

#include "drft/gradcheck_suite.hpp"
#include "drft/tensor.hpp"
#include "drft/trainer.hpp"

namespace drft {

int cmd_synth(const RunConfig& cfg) {
    SyntheticDataset ds = generate_synthetic(cfg.synth, cfg.data_dir);
    std::printf("synthetic dataset written to %s\n", cfg.data_dir.c_str());
    std::printf("  train videos: %zu, val videos: %zu, categories: %zu\n", ds.train.size(),
                ds.val.size(), ds.categories.size());
    std::printf("separability probe (leave-one-out nearest centroid accuracy):\n");
    std::printf("  %-12s %8s %8s %8s\n", "group", "rgb", "flow", "depth");
    const char* groups[3] = {"appearance", "motion", "structure"};
    for (int g = 0; g < 3; ++g) {
        std::printf("  %-12s %8.3f %8.3f %8.3f\n", groups[g], ds.probe.accuracy[g][0],
                    ds.probe.accuracy[g][1], ds.probe.accuracy[g][2]);
    }
    if (!ds.probe.passed) {
        std::fprintf(stderr, "probe failure, dataset not learnable: %s\n",
                     ds.probe.detail.c_str());
        return 1;
    }
    std::printf("probe passed\n");
    return 0;
}

int cmd_train(const RunConfig& cfg, const std::optional<std::string>& resume_checkpoint) {
    TrainingRun run = run_training(cfg, resume_checkpoint);
    if (!run.epochs.empty()) {
        const EpochStats& last = run.epochs.back();
        std::printf("trained %zu epoch(s); final: reg=%.4f tag=%.4f dqa=%.4f cl=%.4f "
                    "train_miou=%.2f\n",
                    run.epochs.size(), last.loss_reg, last.loss_tag, last.loss_dqa,
                    last.loss_cl, last.train_miou);
    }
    std::printf("log: %s\ncheckpoint: %s\n", run.csv_path.c_str(),
                run.checkpoint_path.c_str());
    return 0;
}

int cmd_eval(const RunConfig& cfg, const std::string& checkpoint_path,
             const std::string& split) {
    EvaluationRun run = run_evaluation(cfg, checkpoint_path, split);
    const CategoryMetrics& m = run.metrics.overall;
    std::printf("split=%s count=%d R@0.3=%.2f R@0.5=%.2f R@0.7=%.2f mIoU=%.2f\n",
                split.c_str(), m.count, m.recall_at.at(0.3), m.recall_at.at(0.5),
                m.recall_at.at(0.7), m.mean_tiou);
    if (!run.weight_labels.empty()) {
        std::printf("mean fusion weights:");
        for (size_t i = 0; i < run.weight_labels.size(); ++i) {
            std::printf(" %s=%.3f", run.weight_labels[i].c_str(),
                        run.overall_mean_weights[i]);
        }
        std::printf("\n");
    }
    std::printf("csv: %s\n", run.csv_path.c_str());
    return 0;
}

int cmd_gradcheck(const RunConfig&, bool inject_fault) {
    const double saved_scale = detail::tanh_backward_fault_scale;
    if (inject_fault) {
        detail::tanh_backward_fault_scale = 2.0;
        std::printf("fault injection on: tanh backward scaled x2\n");
    }
    std::vector<GradCheckRow> rows;
    try {
        rows = run_gradcheck_suite();
    } catch (...) {
        detail::tanh_backward_fault_scale = saved_scale;
        throw;
    }
    detail::tanh_backward_fault_scale = saved_scale;

    std::printf("%-28s %14s %10s %6s\n", "component", "max_rel_error", "threshold", "status");
    int failures = 0;
    for (const GradCheckRow& r : rows) {
        std::printf("%-28s %14.3e %10.0e %6s\n", r.component.c_str(), r.max_rel_error,
                    r.threshold, r.pass ? "ok" : "FAIL");
        if (!r.pass) ++failures;
    }
    if (failures > 0) {
        std::fprintf(stderr, "%d gradient check(s) failed\n", failures);
        return 1;
    }
    std::printf("all %zu gradient checks passed\n", rows.size());
    return 0;
}

}  // namespace drft
