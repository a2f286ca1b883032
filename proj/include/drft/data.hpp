#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "drft/rng.hpp"

namespace drft {

enum class Modality { Rgb, Flow, Depth };
const char* modality_name(Modality m);
Modality modality_from_name(const std::string& name);

using ActionLabel = int;

// One video-query pair: the grounding target, its sentence, and the action
// category driving contrastive sampling. Times are seconds.
struct AnnotationRecord {
    std::string video_id;
    double start = 0.0;
    double end = 0.0;
    double duration = 0.0;  // filled from the feature store when absent
    std::string sentence;
    ActionLabel action_label = -1;
};

struct RawSegmentFeatures {
    Modality modality = Modality::Rgb;
    int segments = 0;  // T
    int dim = 0;       // d_in
    std::vector<float> values;  // row-major T x d_in
};

// Charades-STA style line format: "video_id start end##sentence".
std::vector<AnnotationRecord> parse_annotations(const std::string& path);
void write_annotations(const std::string& path, const std::vector<AnnotationRecord>& records);

// Two-column sidecar "video_id<TAB>category_id".
std::map<std::string, ActionLabel> parse_label_sidecar(const std::string& path);
void write_label_sidecar(const std::string& path,
                         const std::map<std::string, ActionLabel>& labels);

// On-disk store of per-(video, modality) feature matrices, one file per
// pair under <root>/<modality>/<video_id>.feat.
class FeatureStore {
public:
    explicit FeatureStore(std::string root) : root_(std::move(root)) {}

    RawSegmentFeatures read(const std::string& video_id, Modality m) const;
    void write(const std::string& video_id, const RawSegmentFeatures& f) const;
    bool exists(const std::string& video_id, Modality m) const;

    const std::string& root() const { return root_; }
    std::string file_path(const std::string& video_id, Modality m) const;

private:
    std::string root_;
};

// Word-id vocabulary. Index 0 is reserved for the unknown token.
class Vocabulary {
public:
    static Vocabulary build(const std::vector<std::string>& sentences);
    static Vocabulary load(const std::string& path);
    void save(const std::string& path) const;

    int id_of(const std::string& word) const;  // -1 if absent
    const std::string& word_of(int id) const { return words_[id]; }
    int size() const { return static_cast<int>(words_.size()); }

private:
    std::vector<std::string> words_;
    std::map<std::string, int> index_;
};

struct QueryTokens {
    std::vector<int> token_ids;
    std::string raw_text;
};

enum class OovPolicy { Error, MapToUnk };

QueryTokens tokenize(const std::string& sentence, const Vocabulary& vocab,
                     OovPolicy policy = OovPolicy::Error);

// --- synthetic tri-modal dataset -------------------------------------------

enum class SignatureGroup { Appearance, Motion, Structure };
const char* group_name(SignatureGroup g);
Modality coding_modality(SignatureGroup g);

struct CategoryInfo {
    ActionLabel label = 0;
    std::string name;        // underscore-joined template, e.g. "throws_pillow"
    SignatureGroup group = SignatureGroup::Appearance;
};

struct SyntheticConfig {
    int num_videos = 64;       // training split
    int num_val_videos = 32;   // held-out split, same categories
    int segments = 16;         // T
    int dim_rgb = 16;
    int dim_flow = 16;
    int dim_depth = 16;
    int categories_per_group = 3;
    double signature_strength = 1.0;
    double noise_level = 0.25;
    uint64_t seed = 7;
};

// Accuracy of a leave-one-out nearest-centroid probe on pooled ground-truth
// features, per (category group, modality). Confirms planted separability.
struct ProbeReport {
    // accuracy[group][modality] in [0,1]
    double accuracy[3][3] = {};
    bool passed = false;
    std::string detail;
};

struct SyntheticDataset {
    std::vector<AnnotationRecord> train;
    std::vector<AnnotationRecord> val;
    std::vector<CategoryInfo> categories;
    std::vector<std::string> vocabulary_sentences;
    ProbeReport probe;
};

// Writes features, annotations, label sidecar, category table and vocabulary
// under `out_dir`, deterministically from cfg.seed.
SyntheticDataset generate_synthetic(const SyntheticConfig& cfg, const std::string& out_dir);

ProbeReport run_separability_probe(const FeatureStore& store,
                                   const std::vector<AnnotationRecord>& records,
                                   const std::vector<CategoryInfo>& categories);

void write_category_table(const std::string& path, const std::vector<CategoryInfo>& cats);
std::vector<CategoryInfo> parse_category_table(const std::string& path);

// --- assembled dataset used by training/eval --------------------------------

struct Dataset {
    FeatureStore store;
    std::vector<AnnotationRecord> records;  // duration filled, labels attached
    Vocabulary vocab;
    std::vector<CategoryInfo> categories;   // may be empty for external data

    static Dataset load(const std::string& data_dir, const std::string& split);

    // Indices of records sharing / not sharing the anchor's label.
    std::vector<int> positive_candidates(int anchor_index) const;
    std::vector<int> negative_candidates(int anchor_index) const;
};

}  // namespace drft
