#include "drft/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "drft/errors.hpp"
#include "drft/interval.hpp"

namespace fs = std::filesystem;

namespace drft {

const char* modality_name(Modality m) {
    switch (m) {
        case Modality::Rgb: return "rgb";
        case Modality::Flow: return "flow";
        case Modality::Depth: return "depth";
    }
    return "?";
}

Modality modality_from_name(const std::string& name) {
    if (name == "rgb") return Modality::Rgb;
    if (name == "flow") return Modality::Flow;
    if (name == "depth") return Modality::Depth;
    throw ConfigError("unknown modality '" + name + "'");
}

const char* group_name(SignatureGroup g) {
    switch (g) {
        case SignatureGroup::Appearance: return "appearance";
        case SignatureGroup::Motion: return "motion";
        case SignatureGroup::Structure: return "structure";
    }
    return "?";
}

Modality coding_modality(SignatureGroup g) {
    switch (g) {
        case SignatureGroup::Appearance: return Modality::Rgb;
        case SignatureGroup::Motion: return Modality::Flow;
        case SignatureGroup::Structure: return Modality::Depth;
    }
    return Modality::Rgb;
}

// --- annotations -------------------------------------------------------------

std::vector<AnnotationRecord> parse_annotations(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ParseError("cannot open annotation file: " + path);
    std::vector<AnnotationRecord> out;
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const size_t sep = line.find("##");
        if (sep == std::string::npos) {
            throw ParseError("line " + std::to_string(line_no) + ": missing '##' separator");
        }
        std::istringstream head(line.substr(0, sep));
        AnnotationRecord rec;
        if (!(head >> rec.video_id >> rec.start >> rec.end)) {
            throw ParseError("line " + std::to_string(line_no) +
                             ": expected 'video_id start end' before '##'");
        }
        std::string extra;
        if (head >> extra) {
            throw ParseError("line " + std::to_string(line_no) + ": unexpected token '" + extra +
                             "' before '##'");
        }
        rec.sentence = line.substr(sep + 2);
        if (rec.sentence.empty()) {
            throw ParseError("line " + std::to_string(line_no) + ": empty sentence");
        }
        if (rec.start < 0.0 || rec.start > rec.end) {
            throw ParseError("line " + std::to_string(line_no) + ": invalid interval [" +
                             std::to_string(rec.start) + ", " + std::to_string(rec.end) + "]");
        }
        out.push_back(std::move(rec));
    }
    return out;
}

void write_annotations(const std::string& path, const std::vector<AnnotationRecord>& records) {
    std::ofstream os(path, std::ios::binary);  // binary: force LF line endings
    if (!os) throw FormatError("cannot open for writing: " + path);
    char buf[64];
    for (const AnnotationRecord& r : records) {
        std::snprintf(buf, sizeof(buf), " %.4f %.4f##", r.start, r.end);
        os << r.video_id << buf << r.sentence << "\n";
    }
}

std::map<std::string, ActionLabel> parse_label_sidecar(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ParseError("cannot open label sidecar: " + path);
    std::map<std::string, ActionLabel> out;
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const size_t tab = line.find('\t');
        if (tab == std::string::npos) {
            throw ParseError("labels line " + std::to_string(line_no) + ": missing tab");
        }
        out[line.substr(0, tab)] = std::stoi(line.substr(tab + 1));
    }
    return out;
}

void write_label_sidecar(const std::string& path,
                         const std::map<std::string, ActionLabel>& labels) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open for writing: " + path);
    for (const auto& [vid, label] : labels) os << vid << "\t" << label << "\n";
}

// --- feature store -------------------------------------------------------------

namespace {

constexpr char kFeatMagic[8] = {'D', 'R', 'F', 'T', 'F', 'E', 'A', 'T'};
constexpr uint8_t kFeatVersion = 1;

void put_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw FormatError("feature file truncated");
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

uint8_t modality_byte(Modality m) {
    switch (m) {
        case Modality::Rgb: return 0;
        case Modality::Flow: return 1;
        case Modality::Depth: return 2;
    }
    return 255;
}

}  // namespace

std::string FeatureStore::file_path(const std::string& video_id, Modality m) const {
    return root_ + "/" + modality_name(m) + "/" + video_id + ".feat";
}

bool FeatureStore::exists(const std::string& video_id, Modality m) const {
    return fs::exists(file_path(video_id, m));
}

void FeatureStore::write(const std::string& video_id, const RawSegmentFeatures& f) const {
    if (f.values.size() != static_cast<size_t>(f.segments) * f.dim) {
        throw FormatError("feature payload size does not match header " +
                          std::to_string(f.segments) + "x" + std::to_string(f.dim));
    }
    const std::string path = file_path(video_id, f.modality);
    fs::create_directories(fs::path(path).parent_path());
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw FormatError("cannot open for writing: " + path);
    os.write(kFeatMagic, 8);
    os.put(static_cast<char>(kFeatVersion));
    os.put(static_cast<char>(modality_byte(f.modality)));
    put_u32(os, static_cast<uint32_t>(f.segments));
    put_u32(os, static_cast<uint32_t>(f.dim));
    for (float v : f.values) {
        uint32_t bits;
        std::memcpy(&bits, &v, 4);
        put_u32(os, bits);
    }
    if (!os) throw FormatError("write failure: " + path);
}

RawSegmentFeatures FeatureStore::read(const std::string& video_id, Modality m) const {
    const std::string path = file_path(video_id, m);
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("missing feature file: " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kFeatMagic, 8) != 0) {
        throw FormatError("bad feature magic in " + path);
    }
    const int version = is.get();
    if (version != kFeatVersion) {
        throw FormatError("unsupported feature version " + std::to_string(version) + " in " +
                          path);
    }
    const int mbyte = is.get();
    if (mbyte != modality_byte(m)) {
        throw FormatError("modality byte mismatch in " + path);
    }
    RawSegmentFeatures f;
    f.modality = m;
    f.segments = static_cast<int>(get_u32(is));
    f.dim = static_cast<int>(get_u32(is));
    if (f.segments <= 0 || f.dim <= 0) {
        throw FormatError("degenerate feature shape in " + path);
    }
    const size_t n = static_cast<size_t>(f.segments) * f.dim;
    f.values.resize(n);
    for (size_t i = 0; i < n; ++i) {
        uint32_t bits = get_u32(is);
        std::memcpy(&f.values[i], &bits, 4);
    }
    if (is.peek() != std::char_traits<char>::eof()) {
        throw FormatError("trailing bytes after payload in " + path);
    }
    return f;
}

// --- vocabulary / tokenizer ------------------------------------------------------

namespace {

std::vector<std::string> split_lower(const std::string& sentence) {
    std::vector<std::string> words;
    std::istringstream ss(sentence);
    std::string w;
    while (ss >> w) {
        for (char& c : w) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        words.push_back(w);
    }
    return words;
}

}  // namespace

Vocabulary Vocabulary::build(const std::vector<std::string>& sentences) {
    Vocabulary v;
    v.words_.push_back("<unk>");
    v.index_["<unk>"] = 0;
    std::set<std::string> seen;
    for (const std::string& s : sentences) {
        for (const std::string& w : split_lower(s)) seen.insert(w);
    }
    for (const std::string& w : seen) {
        v.index_[w] = static_cast<int>(v.words_.size());
        v.words_.push_back(w);
    }
    return v;
}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ParseError("cannot open vocabulary: " + path);
    Vocabulary v;
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        v.index_[line] = static_cast<int>(v.words_.size());
        v.words_.push_back(line);
    }
    if (v.words_.empty() || v.words_[0] != "<unk>") {
        throw FormatError("vocabulary must start with <unk>: " + path);
    }
    return v;
}

void Vocabulary::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open for writing: " + path);
    for (const std::string& w : words_) os << w << "\n";
}

int Vocabulary::id_of(const std::string& word) const {
    auto it = index_.find(word);
    return it == index_.end() ? -1 : it->second;
}

QueryTokens tokenize(const std::string& sentence, const Vocabulary& vocab, OovPolicy policy) {
    const std::vector<std::string> words = split_lower(sentence);
    if (words.empty()) throw ContractError("tokenize: empty sentence");
    QueryTokens q;
    q.raw_text = sentence;
    q.token_ids.reserve(words.size());
    for (const std::string& w : words) {
        int id = vocab.id_of(w);
        if (id < 0) {
            if (policy == OovPolicy::Error) {
                throw VocabularyError("out-of-vocabulary word '" + w + "'");
            }
            id = 0;
        }
        q.token_ids.push_back(id);
    }
    return q;
}

// --- synthetic generator ------------------------------------------------------------

namespace {

struct Template {
    const char* verb;
    const char* object;
};

constexpr Template kAppearanceTemplates[] = {
    {"watches", "television"}, {"reads", "book"}, {"holds", "phone"},
    {"eats", "snack"},         {"paints", "canvas"},
};
constexpr Template kMotionTemplates[] = {
    {"throws", "pillow"}, {"closes", "door"}, {"waves", "hand"},
    {"kicks", "ball"},    {"swings", "bat"},
};
constexpr Template kStructureTemplates[] = {
    {"sits", "bed"},    {"works", "table"}, {"climbs", "stairs"},
    {"leans", "wall"},  {"opens", "cabinet"},
};

std::vector<double> random_unit_vector(int dim, Rng& rng) {
    std::vector<double> v(dim);
    double norm = 0.0;
    for (double& x : v) {
        x = rng.normal();
        norm += x * x;
    }
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
    return v;
}

std::vector<double> pooled_gt_feature(const RawSegmentFeatures& f, const AnnotationRecord& rec) {
    TimeInterval iv{rec.start / rec.duration, rec.end / rec.duration};
    auto [first, last] = segment_range(iv, f.segments);
    std::vector<double> pooled(f.dim, 0.0);
    for (int t = first; t <= last; ++t) {
        for (int d = 0; d < f.dim; ++d) {
            pooled[d] += static_cast<double>(f.values[static_cast<size_t>(t) * f.dim + d]);
        }
    }
    const double inv = 1.0 / (last - first + 1);
    for (double& x : pooled) x *= inv;
    return pooled;
}

}  // namespace

void write_category_table(const std::string& path, const std::vector<CategoryInfo>& cats) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open for writing: " + path);
    for (const CategoryInfo& c : cats) {
        os << c.label << "\t" << c.name << "\t" << group_name(c.group) << "\n";
    }
}

std::vector<CategoryInfo> parse_category_table(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ParseError("cannot open category table: " + path);
    std::vector<CategoryInfo> out;
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ss(line);
        CategoryInfo c;
        std::string group;
        ss >> c.label >> std::ws;
        std::getline(ss, c.name, '\t');
        std::getline(ss, group);
        if (group == "appearance") c.group = SignatureGroup::Appearance;
        else if (group == "motion") c.group = SignatureGroup::Motion;
        else if (group == "structure") c.group = SignatureGroup::Structure;
        else throw ParseError("bad category group '" + group + "' in " + path);
        out.push_back(std::move(c));
    }
    return out;
}

ProbeReport run_separability_probe(const FeatureStore& store,
                                   const std::vector<AnnotationRecord>& records,
                                   const std::vector<CategoryInfo>& categories) {
    ProbeReport report;
    report.passed = true;
    std::ostringstream detail;

    std::map<ActionLabel, SignatureGroup> group_of;
    for (const CategoryInfo& c : categories) group_of[c.label] = c.group;

    const Modality modalities[3] = {Modality::Rgb, Modality::Flow, Modality::Depth};
    for (int gi = 0; gi < 3; ++gi) {
        const auto group = static_cast<SignatureGroup>(gi);
        std::vector<const AnnotationRecord*> members;
        for (const AnnotationRecord& r : records) {
            auto it = group_of.find(r.action_label);
            if (it != group_of.end() && it->second == group) members.push_back(&r);
        }
        for (int mi = 0; mi < 3; ++mi) {
            const Modality m = modalities[mi];
            std::vector<std::vector<double>> feats;
            std::vector<ActionLabel> labels;
            for (const AnnotationRecord* r : members) {
                feats.push_back(pooled_gt_feature(store.read(r->video_id, m), *r));
                labels.push_back(r->action_label);
            }
            // Leave-one-out nearest class centroid.
            int correct = 0;
            for (size_t i = 0; i < feats.size(); ++i) {
                std::map<ActionLabel, std::vector<double>> sums;
                std::map<ActionLabel, int> counts;
                for (size_t j = 0; j < feats.size(); ++j) {
                    if (j == i) continue;
                    auto& s = sums[labels[j]];
                    if (s.empty()) s.assign(feats[j].size(), 0.0);
                    for (size_t d = 0; d < feats[j].size(); ++d) s[d] += feats[j][d];
                    counts[labels[j]]++;
                }
                double best = 1e300;
                ActionLabel best_label = -1;
                for (const auto& [label, s] : sums) {
                    double dist = 0.0;
                    for (size_t d = 0; d < s.size(); ++d) {
                        const double c = s[d] / counts[label] - feats[i][d];
                        dist += c * c;
                    }
                    if (dist < best) {
                        best = dist;
                        best_label = label;
                    }
                }
                if (best_label == labels[i]) ++correct;
            }
            report.accuracy[gi][mi] =
                feats.empty() ? 0.0 : static_cast<double>(correct) / feats.size();
        }

        const Modality coding = coding_modality(group);
        const double coding_acc = report.accuracy[gi][static_cast<int>(modality_byte(coding))];
        if (coding_acc < 0.9) {
            report.passed = false;
            detail << group_name(group) << " group: " << modality_name(coding)
                   << " probe accuracy " << coding_acc << " < 0.9; ";
        }
        for (int mi = 0; mi < 3; ++mi) {
            const Modality m = modalities[mi];
            if (m == coding || m == Modality::Rgb) continue;
            if (report.accuracy[gi][mi] > 0.6) {
                report.passed = false;
                detail << group_name(group) << " group: " << modality_name(m)
                       << " probe accuracy " << report.accuracy[gi][mi]
                       << " > 0.6 (should be near chance); ";
            }
        }
    }
    report.detail = detail.str();
    return report;
}

SyntheticDataset generate_synthetic(const SyntheticConfig& cfg, const std::string& out_dir) {
    if (cfg.num_videos < 2 || cfg.segments < 2 || cfg.categories_per_group < 1) {
        throw ConfigError("synthetic config too small to be usable");
    }
    const int max_per_group =
        static_cast<int>(sizeof(kAppearanceTemplates) / sizeof(Template));
    if (cfg.categories_per_group > max_per_group) {
        throw ConfigError("at most " + std::to_string(max_per_group) +
                          " categories per group are available");
    }

    fs::create_directories(out_dir);
    Rng rng(cfg.seed);

    SyntheticDataset ds;
    const Template* pools[3] = {kAppearanceTemplates, kMotionTemplates, kStructureTemplates};
    for (int gi = 0; gi < 3; ++gi) {
        for (int k = 0; k < cfg.categories_per_group; ++k) {
            CategoryInfo c;
            c.label = static_cast<int>(ds.categories.size());
            c.group = static_cast<SignatureGroup>(gi);
            c.name = std::string(pools[gi][k].verb) + "_" + pools[gi][k].object;
            ds.categories.push_back(std::move(c));
        }
    }
    const int num_categories = static_cast<int>(ds.categories.size());

    auto dim_of = [&](Modality m) {
        switch (m) {
            case Modality::Rgb: return cfg.dim_rgb;
            case Modality::Flow: return cfg.dim_flow;
            case Modality::Depth: return cfg.dim_depth;
        }
        return 0;
    };

    // Per category: full-strength signature in the coding modality plus a
    // weak RGB shadow so text semantics stay learnable from the common
    // stream (appearance categories already live in RGB).
    std::vector<std::vector<double>> signature(num_categories);
    std::vector<std::vector<double>> rgb_shadow(num_categories);
    for (int c = 0; c < num_categories; ++c) {
        const Modality coding = coding_modality(ds.categories[c].group);
        signature[c] = random_unit_vector(dim_of(coding), rng);
        if (coding == Modality::Rgb) {
            rgb_shadow[c] = signature[c];
        } else {
            rgb_shadow[c] = random_unit_vector(cfg.dim_rgb, rng);
        }
    }

    FeatureStore store(out_dir);
    std::map<std::string, ActionLabel> labels;
    std::vector<std::string> train_sentences;

    auto make_video = [&](const std::string& vid, int index) {
        AnnotationRecord rec;
        rec.video_id = vid;
        const int cat = index % num_categories;
        rec.action_label = ds.categories[cat].label;
        const SignatureGroup group = ds.categories[cat].group;
        const Template& tpl =
            pools[static_cast<int>(group)][cat % cfg.categories_per_group];
        rec.sentence = std::string("person ") + tpl.verb + " " + tpl.object;
        rec.duration = static_cast<double>(cfg.segments);

        // Rounded to the annotation file's precision so the planted rows
        // and the parsed ground truth agree exactly.
        const double len = rng.uniform(0.2, 0.6);
        const double t_s = rng.uniform(0.0, 1.0 - len);
        rec.start = std::round(t_s * rec.duration * 1e4) / 1e4;
        rec.end = std::round((t_s + len) * rec.duration * 1e4) / 1e4;

        TimeInterval iv{rec.start / rec.duration, rec.end / rec.duration};
        auto [first, last] = segment_range(iv, cfg.segments);

        const Modality order[3] = {Modality::Rgb, Modality::Flow, Modality::Depth};
        for (Modality m : order) {
            RawSegmentFeatures f;
            f.modality = m;
            f.segments = cfg.segments;
            f.dim = dim_of(m);
            f.values.resize(static_cast<size_t>(f.segments) * f.dim);
            for (float& v : f.values) {
                v = static_cast<float>(rng.normal(0.0, cfg.noise_level));
            }
            const Modality coding = coding_modality(group);
            const std::vector<double>* sig = nullptr;
            double gain = 0.0;
            if (m == coding) {
                sig = &signature[cat];
                gain = cfg.signature_strength;
            } else if (m == Modality::Rgb) {
                sig = &rgb_shadow[cat];
                gain = 0.25 * cfg.signature_strength;
            }
            if (sig) {
                for (int t = first; t <= last; ++t) {
                    for (int d = 0; d < f.dim; ++d) {
                        f.values[static_cast<size_t>(t) * f.dim + d] +=
                            static_cast<float>(gain * (*sig)[d]);
                    }
                }
            }
            store.write(vid, f);
        }
        labels[vid] = rec.action_label;
        return rec;
    };

    char vid_buf[32];
    for (int i = 0; i < cfg.num_videos; ++i) {
        std::snprintf(vid_buf, sizeof(vid_buf), "v%04d", i);
        AnnotationRecord rec = make_video(vid_buf, i);
        train_sentences.push_back(rec.sentence);
        ds.train.push_back(std::move(rec));
    }
    for (int i = 0; i < cfg.num_val_videos; ++i) {
        std::snprintf(vid_buf, sizeof(vid_buf), "v%04d", cfg.num_videos + i);
        ds.val.push_back(make_video(vid_buf, i));
    }

    write_annotations(out_dir + "/annotations_train.txt", ds.train);
    write_annotations(out_dir + "/annotations_val.txt", ds.val);
    write_label_sidecar(out_dir + "/labels.tsv", labels);
    write_category_table(out_dir + "/categories.tsv", ds.categories);
    Vocabulary vocab = Vocabulary::build(train_sentences);
    vocab.save(out_dir + "/vocab.txt");
    ds.vocabulary_sentences = std::move(train_sentences);

    ds.probe = run_separability_probe(store, ds.train, ds.categories);
    return ds;
}

// --- assembled dataset ------------------------------------------------------------------

Dataset Dataset::load(const std::string& data_dir, const std::string& split) {
    Dataset ds{FeatureStore(data_dir), {}, Vocabulary::load(data_dir + "/vocab.txt"), {}};
    ds.records = parse_annotations(data_dir + "/annotations_" + split + ".txt");

    std::map<std::string, ActionLabel> labels;
    if (fs::exists(data_dir + "/labels.tsv")) {
        labels = parse_label_sidecar(data_dir + "/labels.tsv");
    }
    if (fs::exists(data_dir + "/categories.tsv")) {
        ds.categories = parse_category_table(data_dir + "/categories.tsv");
    }

    std::map<std::string, double> durations;
    if (fs::exists(data_dir + "/durations.tsv")) {
        std::ifstream is(data_dir + "/durations.tsv");
        std::string line;
        while (std::getline(is, line)) {
            if (line.empty()) continue;
            const size_t tab = line.find('\t');
            if (tab == std::string::npos) throw ParseError("durations.tsv: missing tab");
            durations[line.substr(0, tab)] = std::stod(line.substr(tab + 1));
        }
    }

    for (AnnotationRecord& r : ds.records) {
        auto lit = labels.find(r.video_id);
        if (lit != labels.end()) r.action_label = lit->second;

        auto dit = durations.find(r.video_id);
        if (dit != durations.end()) {
            r.duration = dit->second;
        } else {
            // One segment per second unless told otherwise.
            const Modality probe_order[3] = {Modality::Rgb, Modality::Flow, Modality::Depth};
            int segments = -1;
            for (Modality m : probe_order) {
                if (ds.store.exists(r.video_id, m)) {
                    segments = ds.store.read(r.video_id, m).segments;
                    break;
                }
            }
            if (segments <= 0) {
                throw FormatError("no feature file found for video '" + r.video_id + "'");
            }
            r.duration = static_cast<double>(segments);
        }
        if (r.end > r.duration + 1e-9) {
            throw ParseError("record for '" + r.video_id + "' ends at " +
                             std::to_string(r.end) + "s beyond duration " +
                             std::to_string(r.duration) + "s");
        }
    }
    return ds;
}

std::vector<int> Dataset::positive_candidates(int anchor_index) const {
    std::vector<int> out;
    const ActionLabel label = records[anchor_index].action_label;
    for (int i = 0; i < static_cast<int>(records.size()); ++i) {
        if (i != anchor_index && records[i].action_label == label) out.push_back(i);
    }
    return out;
}

std::vector<int> Dataset::negative_candidates(int anchor_index) const {
    std::vector<int> out;
    const ActionLabel label = records[anchor_index].action_label;
    for (int i = 0; i < static_cast<int>(records.size()); ++i) {
        if (records[i].action_label != label) out.push_back(i);
    }
    return out;
}

}  // namespace drft
