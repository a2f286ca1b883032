#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "drft/data.hpp"
#include "drft/errors.hpp"
#include "drft/interval.hpp"

using namespace drft;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("drft_data_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::string str() const { return path.string(); }
};

std::string write_file(const fs::path& p, const std::string& content) {
    std::ofstream os(p, std::ios::binary);
    os << content;
    return p.string();
}

std::vector<char> read_bytes(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    return std::vector<char>(std::istreambuf_iterator<char>(is),
                             std::istreambuf_iterator<char>());
}

// Order-insensitive digest over every file in a directory tree.
size_t dir_digest(const std::string& root) {
    std::vector<std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) files.push_back(e.path().string());
    }
    std::sort(files.begin(), files.end());
    size_t h = 1469598103934665603ull;
    for (const std::string& f : files) {
        for (char c : fs::path(f).filename().string()) h = (h ^ c) * 1099511628211ull;
        for (char c : read_bytes(f)) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ull;
    }
    return h;
}

}  // namespace

TEST_CASE("annotation line parses into its fields") {
    TempDir dir;
    const std::string path = write_file(
        dir.path / "ann.txt", "AO8RW 0.0 6.9##a person is putting a book on a shelf.\n");
    std::vector<AnnotationRecord> recs = parse_annotations(path);
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].video_id == "AO8RW");
    CHECK(recs[0].start == 0.0);
    CHECK(recs[0].end == 6.9);
    CHECK(recs[0].sentence == "a person is putting a book on a shelf.");
}

TEST_CASE("annotation line without separator reports the line number") {
    TempDir dir;
    const std::string path =
        write_file(dir.path / "ann.txt", "A 0 1##ok\nB 2 3 missing separator\n");
    CHECK_THROWS_WITH_AS(parse_annotations(path), doctest::Contains("line 2"), ParseError);
}

TEST_CASE("annotation with start after end is rejected") {
    TempDir dir;
    const std::string path = write_file(dir.path / "ann.txt", "A 5.0 2.0##backwards\n");
    CHECK_THROWS_AS(parse_annotations(path), ParseError);
}

TEST_CASE("annotation write then parse round trips") {
    TempDir dir;
    std::vector<AnnotationRecord> recs;
    recs.push_back({"vid1", 1.25, 8.5, 16.0, "person closes door", 3});
    recs.push_back({"vid2", 0.0, 4.75, 16.0, "person sits bed", 7});
    const std::string path = (dir.path / "ann.txt").string();
    write_annotations(path, recs);
    std::vector<AnnotationRecord> back = parse_annotations(path);
    REQUIRE(back.size() == 2);
    for (size_t i = 0; i < 2; ++i) {
        CHECK(back[i].video_id == recs[i].video_id);
        CHECK(back[i].start == recs[i].start);
        CHECK(back[i].end == recs[i].end);
        CHECK(back[i].sentence == recs[i].sentence);
    }
}

TEST_CASE("feature store round trips bit-exactly") {
    TempDir dir;
    FeatureStore store(dir.str());
    RawSegmentFeatures f;
    f.modality = Modality::Flow;
    f.segments = 8;
    f.dim = 16;
    Rng rng(5);
    f.values.resize(8 * 16);
    for (float& v : f.values) v = static_cast<float>(rng.normal());
    store.write("vid", f);

    RawSegmentFeatures g = store.read("vid", Modality::Flow);
    CHECK(g.segments == 8);
    CHECK(g.dim == 16);
    REQUIRE(g.values.size() == f.values.size());
    for (size_t i = 0; i < f.values.size(); ++i) CHECK(g.values[i] == f.values[i]);

    // write -> read -> write is byte identical
    TempDir dir2;
    FeatureStore store2(dir2.str());
    store2.write("vid", g);
    CHECK(read_bytes(store.file_path("vid", Modality::Flow)) ==
          read_bytes(store2.file_path("vid", Modality::Flow)));
}

TEST_CASE("truncated feature file raises a format error") {
    TempDir dir;
    FeatureStore store(dir.str());
    RawSegmentFeatures f;
    f.modality = Modality::Rgb;
    f.segments = 4;
    f.dim = 4;
    f.values.assign(16, 1.0f);
    store.write("vid", f);

    const std::string path = store.file_path("vid", Modality::Rgb);
    auto bytes = read_bytes(path);
    bytes.resize(bytes.size() - 10);
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    os.close();
    CHECK_THROWS_AS(store.read("vid", Modality::Rgb), FormatError);
}

TEST_CASE("header inconsistent with payload raises a format error") {
    TempDir dir;
    FeatureStore store(dir.str());
    RawSegmentFeatures f;
    f.modality = Modality::Rgb;
    f.segments = 4;
    f.dim = 4;
    f.values.assign(16, 1.0f);
    store.write("vid", f);

    // Claim more rows than the payload carries.
    const std::string path = store.file_path("vid", Modality::Rgb);
    auto bytes = read_bytes(path);
    bytes[10] = 9;  // segments field low byte
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    os.close();
    CHECK_THROWS_AS(store.read("vid", Modality::Rgb), FormatError);
}

TEST_CASE("wrong magic raises a format error") {
    TempDir dir;
    fs::create_directories(dir.path / "rgb");
    write_file(dir.path / "rgb" / "x.feat", "NOTMAGIC plus junk");
    FeatureStore store(dir.str());
    CHECK_THROWS_AS(store.read("x", Modality::Rgb), FormatError);
}

TEST_CASE("tokenize maps words and enforces the oov policy") {
    Vocabulary vocab = Vocabulary::build({"Person closes a door", "person opens a window"});
    QueryTokens q = tokenize("Person closes a door", vocab);
    CHECK(q.token_ids.size() == 4);
    for (int id : q.token_ids) {
        CHECK(id > 0);
        CHECK(id < vocab.size());
    }
    CHECK_THROWS_AS(tokenize("person kicks ball", vocab), VocabularyError);
    QueryTokens unk = tokenize("person kicks ball", vocab, OovPolicy::MapToUnk);
    CHECK(unk.token_ids[1] == 0);
    CHECK_THROWS_AS(tokenize("   ", vocab), ContractError);
}

TEST_CASE("tokenize is idempotent on its detokenized output") {
    Vocabulary vocab = Vocabulary::build({"person throws pillow"});
    QueryTokens q = tokenize("Person Throws Pillow", vocab);
    std::string detok;
    for (size_t i = 0; i < q.token_ids.size(); ++i) {
        if (i) detok += " ";
        detok += vocab.word_of(q.token_ids[i]);
    }
    QueryTokens q2 = tokenize(detok, vocab);
    CHECK(q.token_ids == q2.token_ids);
}

TEST_CASE("vocabulary save and load round trips") {
    TempDir dir;
    Vocabulary vocab = Vocabulary::build({"person sits bed", "person waves hand"});
    const std::string path = (dir.path / "vocab.txt").string();
    vocab.save(path);
    Vocabulary back = Vocabulary::load(path);
    CHECK(back.size() == vocab.size());
    CHECK(back.id_of("sits") == vocab.id_of("sits"));
    CHECK(back.id_of("<unk>") == 0);
}

TEST_CASE("synthetic generation meets its construction contract") {
    TempDir dir;
    SyntheticConfig cfg;
    cfg.num_videos = 36;
    cfg.num_val_videos = 9;
    cfg.segments = 16;
    cfg.seed = 7;
    SyntheticDataset ds = generate_synthetic(cfg, dir.str());

    CHECK(ds.train.size() == 36);
    CHECK(ds.val.size() == 9);
    CHECK(ds.categories.size() == 9);

    // one partition: every category in exactly one group
    int per_group[3] = {0, 0, 0};
    for (const CategoryInfo& c : ds.categories) per_group[static_cast<int>(c.group)]++;
    CHECK(per_group[0] == 3);
    CHECK(per_group[1] == 3);
    CHECK(per_group[2] == 3);

    FeatureStore store(dir.str());
    for (const AnnotationRecord& r : ds.train) {
        for (Modality m : {Modality::Rgb, Modality::Flow, Modality::Depth}) {
            RawSegmentFeatures f = store.read(r.video_id, m);
            CHECK(f.segments == 16);
        }
        // interval covers 20-60% of the video
        const double frac = (r.end - r.start) / r.duration;
        CHECK(frac >= 0.2 - 1e-3);
        CHECK(frac <= 0.6 + 1e-3);
    }
    CHECK(fs::exists(dir.path / "annotations_train.txt"));
    CHECK(fs::exists(dir.path / "annotations_val.txt"));
    CHECK(fs::exists(dir.path / "labels.tsv"));
    CHECK(fs::exists(dir.path / "vocab.txt"));
    CHECK(fs::exists(dir.path / "categories.tsv"));
}

TEST_CASE("same seed produces byte-identical datasets") {
    TempDir a, b;
    SyntheticConfig cfg;
    cfg.num_videos = 18;
    cfg.num_val_videos = 6;
    cfg.seed = 11;
    generate_synthetic(cfg, a.str());
    generate_synthetic(cfg, b.str());
    CHECK(dir_digest(a.str()) == dir_digest(b.str()));

    SyntheticConfig other = cfg;
    other.seed = 12;
    TempDir c;
    generate_synthetic(other, c.str());
    CHECK(dir_digest(a.str()) != dir_digest(c.str()));
}

TEST_CASE("probe confirms planted separability before training") {
    TempDir dir;
    SyntheticConfig cfg;
    cfg.num_videos = 36;
    cfg.seed = 3;
    SyntheticDataset ds = generate_synthetic(cfg, dir.str());
    CHECK(ds.probe.passed);
    // coding modality accuracies
    CHECK(ds.probe.accuracy[0][0] >= 0.9);  // appearance from rgb
    CHECK(ds.probe.accuracy[1][1] >= 0.9);  // motion from flow
    CHECK(ds.probe.accuracy[2][2] >= 0.9);  // structure from depth
    // near chance where nothing was planted
    CHECK(ds.probe.accuracy[1][2] <= 0.6);  // motion from depth
    CHECK(ds.probe.accuracy[2][1] <= 0.6);  // structure from flow
}

TEST_CASE("probe fails when the signature drowns in noise") {
    TempDir dir;
    SyntheticConfig cfg;
    cfg.num_videos = 36;
    cfg.signature_strength = 0.02;
    cfg.noise_level = 1.0;
    cfg.seed = 5;
    SyntheticDataset ds = generate_synthetic(cfg, dir.str());
    CHECK_FALSE(ds.probe.passed);
    CHECK_FALSE(ds.probe.detail.empty());
}

TEST_CASE("dataset load joins labels and durations") {
    TempDir dir;
    SyntheticConfig cfg;
    cfg.num_videos = 18;
    cfg.num_val_videos = 6;
    cfg.seed = 21;
    generate_synthetic(cfg, dir.str());

    Dataset ds = Dataset::load(dir.str(), "train");
    CHECK(ds.records.size() == 18);
    for (const AnnotationRecord& r : ds.records) {
        CHECK(r.action_label >= 0);
        CHECK(r.duration == 16.0);
        CHECK(r.end <= r.duration);
    }
    CHECK(ds.vocab.size() > 1);
    CHECK(ds.categories.size() == 9);

    // every training record keeps at least one segment of mask
    for (const AnnotationRecord& r : ds.records) {
        TimeInterval iv{r.start / r.duration, r.end / r.duration};
        auto [first, last] = segment_range(iv, 16);
        CHECK(last >= first);
    }

    Dataset val = Dataset::load(dir.str(), "val");
    CHECK(val.records.size() == 6);
}
