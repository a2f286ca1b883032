#include "drft/trainer.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "drft/checkpoint.hpp"
#include "drft/errors.hpp"
#include "drft/optim.hpp"

namespace fs = std::filesystem;

namespace drft {

namespace {

TimeInterval normalized_interval(const AnnotationRecord& rec) {
    TimeInterval iv{rec.start / rec.duration, rec.end / rec.duration};
    if (!iv.valid()) {
        throw ContractError("record '" + rec.video_id + "' has invalid normalized interval");
    }
    return iv;
}

struct PreparedRecord {
    ModalityTensors features;
    QueryTokens tokens;
    TimeInterval gt;
    int segments = 0;
};

std::vector<PreparedRecord> prepare_records(const Dataset& ds, const RunConfig& cfg) {
    std::vector<PreparedRecord> out;
    out.reserve(ds.records.size());
    for (const AnnotationRecord& rec : ds.records) {
        PreparedRecord p;
        p.features = load_record_features(ds, cfg, rec.video_id);
        p.tokens = tokenize(rec.sentence, ds.vocab, cfg.oov_policy);
        p.gt = normalized_interval(rec);
        p.segments = p.features.begin()->second.rows();
        out.push_back(std::move(p));
    }
    return out;
}

void shuffle_indices(std::vector<int>& idx, Rng& rng) {
    for (int i = static_cast<int>(idx.size()) - 1; i > 0; --i) {
        std::swap(idx[i], idx[rng.uniform_int(0, i)]);
    }
}

std::string csv_pct(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

}  // namespace

ModalityTensors load_record_features(const Dataset& ds, const RunConfig& cfg,
                                     const std::string& video_id) {
    ModalityTensors out;
    int segments = -1;
    for (Modality m : cfg.streams) {
        RawSegmentFeatures raw = ds.store.read(video_id, m);
        if (segments < 0) segments = raw.segments;
        if (raw.segments != segments) {
            throw FormatError("modalities of '" + video_id + "' disagree on segment count");
        }
        out[m] = to_tensor(raw);
    }
    return out;
}

std::map<Modality, int> dataset_input_dims(const Dataset& ds, const RunConfig& cfg) {
    if (ds.records.empty()) throw ContractError("dataset has no records");
    std::map<Modality, int> dims;
    for (Modality m : cfg.streams) {
        dims[m] = ds.store.read(ds.records.front().video_id, m).dim;
    }
    return dims;
}

TrainingRun run_training(const RunConfig& cfg, const std::optional<std::string>& resume_from,
                         std::optional<double> stop_at_train_miou) {
    Dataset ds = Dataset::load(cfg.data_dir, "train");
    if (ds.records.empty()) throw ContractError("training split is empty");

    DrftModel model(cfg, dataset_input_dims(ds, cfg), ds.vocab.size());
    AdamOptimizer adam(model.params().entries(), {cfg.lr});

    int start_epoch = 0;
    if (resume_from) {
        CheckpointMeta meta = load_checkpoint(*resume_from, model.params(), &adam);
        start_epoch = static_cast<int>(meta.epoch);
    }

    const std::vector<PreparedRecord> prepared = prepare_records(ds, cfg);

    fs::create_directories(cfg.out_dir);
    TrainingRun run;
    run.csv_path = cfg.out_dir + "/train_log.csv";
    run.checkpoint_path = cfg.out_dir + "/model.ckpt";
    std::ofstream csv(run.csv_path, std::ios::binary);
    if (!csv) throw FormatError("cannot open for writing: " + run.csv_path);
    csv << "epoch,loss_reg,loss_tag,loss_dqa,loss_cl,train_miou\n";

    Rng train_rng(cfg.seed * 0x9e3779b97f4a7c15ull + 1);

    std::vector<int> order(prepared.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

    for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
        shuffle_indices(order, train_rng);
        EpochStats stats;
        stats.epoch = epoch;
        double miou_acc = 0.0;
        int in_batch = 0;
        adam.zero_grad();
        for (int idx : order) {
            const PreparedRecord& rec = prepared[idx];

            DrftModel::ForwardResult fwd = model.forward(rec.features, rec.tokens);

            LossTerms terms;
            terms.reg = loss_reg_graph(fwd.reg.raw_prediction, rec.gt);
            GroundTruthMask mask = GroundTruthMask::from_interval(rec.gt, rec.segments);
            terms.tag = loss_tag_graph(fwd.reg.temporal_attention, mask);
            Tensor dqa;
            for (const Tensor& at : fwd.streams.attention_t) {
                Tensor term = loss_dqa_graph(at, cfg.lambda_dqa);
                dqa = dqa.defined() ? add(dqa, term) : term;
            }
            terms.dqa = dqa;

            if (cfg.use_contrastive) {
                ContrastiveSample sample;
                bool have_sample = true;
                try {
                    sample = sample_contrastive_batch(ds, idx, cfg.num_positives,
                                                      cfg.num_negatives, train_rng);
                } catch (const SamplingError&) {
                    have_sample = false;  // skip the contrastive term for this anchor
                }
                if (have_sample) {
                    std::vector<ModalityTensors> pos_pooled, neg_pooled;
                    {
                        NoGradGuard frozen;
                        for (int j : sample.positive_indices) {
                            pos_pooled.push_back(model.pooled_gt_features(
                                prepared[j].features, prepared[j].tokens, prepared[j].gt));
                        }
                        for (int j : sample.negative_indices) {
                            neg_pooled.push_back(model.pooled_gt_features(
                                prepared[j].features, prepared[j].tokens, prepared[j].gt));
                        }
                    }
                    std::vector<Tensor> modality_losses;
                    for (Modality m : cfg.streams) {
                        ContrastiveBatch batch;
                        batch.anchor = pool_gt_segment(fwd.streams.m.at(m), rec.gt);
                        for (auto& pooled : pos_pooled) batch.positives.push_back(pooled.at(m));
                        for (auto& pooled : neg_pooled) batch.negatives.push_back(pooled.at(m));
                        batch.temperature = cfg.temperature;
                        modality_losses.push_back(
                            contrastive_loss(batch, model.projection_head(m)));
                    }
                    terms.cl = total_contrastive(modality_losses);
                }
            }

            Tensor total = total_loss(terms);
            backward(total);
            ++in_batch;
            if (in_batch == cfg.batch_size) {
                adam.step();
                adam.zero_grad();
                in_batch = 0;
            }

            stats.loss_reg += terms.reg.item();
            stats.loss_tag += terms.tag.item();
            stats.loss_dqa += terms.dqa.item();
            stats.loss_cl += terms.cl.defined() ? terms.cl.item() : 0.0;
            miou_acc += tiou(fwd.reg.interval, rec.gt);
        }
        if (in_batch > 0) {
            adam.step();
            adam.zero_grad();
        }

        const double n = static_cast<double>(prepared.size());
        stats.loss_reg /= n;
        stats.loss_tag /= n;
        stats.loss_dqa /= n;
        stats.loss_cl /= n;
        stats.train_miou = 100.0 * miou_acc / n;
        run.epochs.push_back(stats);

        char row[160];
        std::snprintf(row, sizeof(row), "%d,%.6f,%.6f,%.6f,%.6f,%.2f\n", stats.epoch,
                      stats.loss_reg, stats.loss_tag, stats.loss_dqa, stats.loss_cl,
                      stats.train_miou);
        csv << row;
        csv.flush();

        const int completed = epoch + 1;
        if (stop_at_train_miou && stats.train_miou >= *stop_at_train_miou) {
            save_checkpoint(run.checkpoint_path, model.params(),
                            {static_cast<uint32_t>(completed),
                             static_cast<uint64_t>(adam.step_count())},
                            &adam);
            return run;
        }
    }

    save_checkpoint(run.checkpoint_path, model.params(),
                    {static_cast<uint32_t>(cfg.epochs), static_cast<uint64_t>(adam.step_count())},
                    &adam);
    return run;
}

EvaluationRun run_evaluation(const RunConfig& cfg, const std::string& checkpoint_path,
                             const std::string& split) {
    Dataset ds = Dataset::load(cfg.data_dir, split);
    if (ds.records.empty()) throw ContractError("split '" + split + "' is empty");

    DrftModel model(cfg, dataset_input_dims(ds, cfg), ds.vocab.size());
    load_checkpoint(checkpoint_path, model.params());

    const std::vector<PreparedRecord> prepared = prepare_records(ds, cfg);

    EvaluationRun out;
    std::vector<IntervalPair> pairs;
    std::vector<ActionLabel> labels;
    const int num_weights = model.has_fusion() ? model.fusion().num_slots() : 0;
    if (model.has_fusion()) out.weight_labels = model.fusion().weight_labels();
    out.overall_mean_weights.assign(num_weights, 0.0);
    std::map<ActionLabel, std::pair<std::vector<double>, int>> weight_acc;

    NoGradGuard frozen;
    for (size_t i = 0; i < prepared.size(); ++i) {
        const PreparedRecord& rec = prepared[i];
        DrftModel::ForwardResult fwd = model.forward(rec.features, rec.tokens);
        pairs.push_back({fwd.reg.interval, rec.gt});
        labels.push_back(ds.records[i].action_label);
        if (num_weights > 0) {
            auto& [acc, count] = weight_acc[ds.records[i].action_label];
            if (acc.empty()) acc.assign(num_weights, 0.0);
            for (int w = 0; w < num_weights; ++w) {
                const double v = fwd.fusion.weights.at(0, w);
                acc[w] += v;
                out.overall_mean_weights[w] += v;
            }
            ++count;
        }
    }
    out.metrics = evaluate_pairs(pairs, labels);
    for (double& v : out.overall_mean_weights) v /= static_cast<double>(prepared.size());
    for (auto& [label, acc] : weight_acc) {
        std::vector<double> mean = acc.first;
        for (double& v : mean) v /= acc.second;
        out.category_mean_weights[label] = std::move(mean);
    }

    std::map<ActionLabel, std::string> category_names;
    for (const CategoryInfo& c : ds.categories) category_names[c.label] = c.name;

    fs::create_directories(cfg.out_dir);
    out.csv_path = cfg.out_dir + "/eval_" + split + ".csv";
    std::ofstream csv(out.csv_path, std::ios::binary);
    if (!csv) throw FormatError("cannot open for writing: " + out.csv_path);
    csv << "split,category,count,r_at_0.3,r_at_0.5,r_at_0.7,miou";
    for (const std::string& label : out.weight_labels) csv << ",w_" << label;
    csv << "\n";

    auto write_row = [&](const std::string& name, const CategoryMetrics& m,
                         const std::vector<double>* weights) {
        csv << split << "," << name << "," << m.count << "," << csv_pct(m.recall_at.at(0.3))
            << "," << csv_pct(m.recall_at.at(0.5)) << "," << csv_pct(m.recall_at.at(0.7)) << ","
            << csv_pct(m.mean_tiou);
        if (weights) {
            for (double w : *weights) {
                char buf[16];
                std::snprintf(buf, sizeof(buf), "%.4f", w);
                csv << "," << buf;
            }
        } else {
            for (int w = 0; w < num_weights; ++w) csv << ",";
        }
        csv << "\n";
    };

    write_row("ALL", out.metrics.overall,
              num_weights > 0 ? &out.overall_mean_weights : nullptr);
    for (const auto& [label, m] : out.metrics.per_category) {
        auto nit = category_names.find(label);
        const std::string name =
            nit != category_names.end() ? nit->second : "cat" + std::to_string(label);
        const std::vector<double>* weights = nullptr;
        auto wit = out.category_mean_weights.find(label);
        if (wit != out.category_mean_weights.end()) weights = &wit->second;
        write_row(name, m, weights);
    }
    return out;
}

}  // namespace drft
