#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "drft/contrastive.hpp"
#include "drft/errors.hpp"
#include "drft/gradcheck.hpp"

using namespace drft;

namespace {

Tensor random_row(int cols, Rng& rng) {
    std::vector<double> data(cols);
    for (double& v : data) v = rng.uniform(-1.0, 1.0);
    return Tensor::from(1, cols, std::move(data));
}

Tensor unit_row(int cols, double sign) {
    std::vector<double> data(cols, 0.0);
    data[0] = sign;
    return Tensor::from(1, cols, std::move(data));
}

// Direct Eq.-style scalar evaluation, independent of the tensor graph.
double contrastive_oracle(const std::vector<double>& anchor,
                          const std::vector<std::vector<double>>& pos,
                          const std::vector<std::vector<double>>& neg, double tau) {
    auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
        double acc = 0.0;
        for (size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
        return acc;
    };
    double pos_mass = 0.0, neg_mass = 0.0;
    for (const auto& p : pos) pos_mass += std::exp(dot(anchor, p) / tau);
    for (const auto& n : neg) neg_mass += std::exp(dot(anchor, n) / tau);
    return -std::log(pos_mass / (pos_mass + neg_mass));
}

std::vector<double> row_values(const Tensor& t) {
    return std::vector<double>(t.values().begin(), t.values().end());
}

Dataset tiny_dataset(const std::vector<ActionLabel>& labels) {
    Dataset ds{FeatureStore("/nonexistent"), {}, Vocabulary::build({"person runs"}), {}};
    for (size_t i = 0; i < labels.size(); ++i) {
        AnnotationRecord r;
        r.video_id = "v" + std::to_string(i);
        r.start = 0.0;
        r.end = 1.0;
        r.duration = 2.0;
        r.sentence = "person runs";
        r.action_label = labels[i];
        ds.records.push_back(std::move(r));
    }
    return ds;
}

}  // namespace

TEST_CASE("pool over explicit segment ranges") {
    Tensor m = Tensor::from_rows({{0, 0}, {1, 2}, {3, 4}, {10, 20}});

    SUBCASE("quarter to three-quarter covers rows 1 and 2") {
        Tensor pooled = pool_gt_segment(m, {0.25, 0.75});
        CHECK(pooled.at(0, 0) == doctest::Approx(2.0));
        CHECK(pooled.at(0, 1) == doctest::Approx(3.0));
    }
    SUBCASE("full interval covers every row") {
        Tensor pooled = pool_gt_segment(m, {0.0, 1.0});
        CHECK(pooled.at(0, 0) == doctest::Approx(3.5));
        CHECK(pooled.at(0, 1) == doctest::Approx(6.5));
    }
    SUBCASE("degenerate interval picks the single floor segment") {
        Tensor pooled = pool_gt_segment(m, {0.5, 0.5});
        CHECK(pooled.at(0, 0) == 3.0);
        CHECK(pooled.at(0, 1) == 4.0);
    }
}

TEST_CASE("all-equal similarities give -log(P/(P+N))") {
    ParamStore store;
    Rng rng(61);
    ProjectionHead head(store, "head", 8, 8, rng);
    Tensor feature = random_row(8, rng);
    ContrastiveBatch batch;
    batch.anchor = feature;
    for (int i = 0; i < 3; ++i) batch.positives.push_back(feature);
    for (int i = 0; i < 4; ++i) batch.negatives.push_back(feature);
    batch.temperature = 0.1;
    const double expected = -std::log(3.0 / 7.0);
    CHECK(std::abs(contrastive_loss(batch, head).item() - expected) < 1e-10);
}

TEST_CASE("saturated cosine similarities drive the loss to zero") {
    // cosine +1 with every positive, -1 with every negative, tau = 0.1
    Tensor anchor = unit_row(8, 1.0);
    std::vector<Tensor> pos(3, unit_row(8, 1.0));
    std::vector<Tensor> neg(4, unit_row(8, -1.0));
    const double loss =
        contrastive_loss_from_embeddings(anchor, pos, neg, 0.1).item();
    CHECK(loss >= 0.0);
    CHECK(loss < 1e-8);
}

TEST_CASE("random batches match the scalar oracle") {
    ParamStore store;
    Rng rng(62);
    ProjectionHead head(store, "head", 8, 8, rng);
    for (int trial = 0; trial < 20; ++trial) {
        ContrastiveBatch batch;
        batch.anchor = random_row(8, rng);
        const int np = rng.uniform_int(1, 4), nn = rng.uniform_int(1, 5);
        for (int i = 0; i < np; ++i) batch.positives.push_back(random_row(8, rng));
        for (int i = 0; i < nn; ++i) batch.negatives.push_back(random_row(8, rng));
        batch.temperature = 0.1;

        std::vector<std::vector<double>> pos, neg;
        for (const Tensor& p : batch.positives) pos.push_back(row_values(head.embed(p)));
        for (const Tensor& n : batch.negatives) neg.push_back(row_values(head.embed(n)));
        const double expected =
            contrastive_oracle(row_values(head.embed(batch.anchor)), pos, neg, 0.1);
        CHECK(std::abs(contrastive_loss(batch, head).item() - expected) < 1e-10);
    }
}

TEST_CASE("embeddings come out unit norm") {
    ParamStore store;
    Rng rng(63);
    ProjectionHead head(store, "head", 8, 8, rng);
    for (int trial = 0; trial < 10; ++trial) {
        Tensor e = head.embed(random_row(8, rng));
        double norm = 0.0;
        for (double v : e.values()) norm += v * v;
        CHECK(std::sqrt(norm) == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("loss is monotone in individual similarities") {
    Rng rng(64);
    Tensor anchor = l2_normalize_rows(random_row(6, rng));
    std::vector<Tensor> pos, neg;
    for (int i = 0; i < 3; ++i) pos.push_back(l2_normalize_rows(random_row(6, rng)));
    for (int i = 0; i < 4; ++i) neg.push_back(l2_normalize_rows(random_row(6, rng)));

    const double base = contrastive_loss_from_embeddings(anchor, pos, neg, 0.5).item();

    // Nudge one positive toward the anchor: loss must strictly decrease.
    std::vector<Tensor> pos2 = pos;
    pos2[1] = l2_normalize_rows(add(scale(pos[1], 0.8), scale(anchor, 0.2)));
    CHECK(contrastive_loss_from_embeddings(anchor, pos2, neg, 0.5).item() < base);

    // Nudge one negative toward the anchor: loss must strictly increase.
    std::vector<Tensor> neg2 = neg;
    neg2[2] = l2_normalize_rows(add(scale(neg[2], 0.8), scale(anchor, 0.2)));
    CHECK(contrastive_loss_from_embeddings(anchor, pos, neg2, 0.5).item() > base);
}

TEST_CASE("loss is invariant to the ordering of positives and negatives") {
    ParamStore store;
    Rng rng(65);
    ProjectionHead head(store, "head", 8, 8, rng);
    ContrastiveBatch batch;
    batch.anchor = random_row(8, rng);
    for (int i = 0; i < 3; ++i) batch.positives.push_back(random_row(8, rng));
    for (int i = 0; i < 4; ++i) batch.negatives.push_back(random_row(8, rng));
    batch.temperature = 0.2;
    const double base = contrastive_loss(batch, head).item();

    std::reverse(batch.positives.begin(), batch.positives.end());
    std::reverse(batch.negatives.begin(), batch.negatives.end());
    CHECK(contrastive_loss(batch, head).item() == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("empty sets are contract errors") {
    ParamStore store;
    Rng rng(66);
    ProjectionHead head(store, "head", 4, 4, rng);
    ContrastiveBatch batch;
    batch.anchor = random_row(4, rng);
    batch.negatives.push_back(random_row(4, rng));
    CHECK_THROWS_AS(contrastive_loss(batch, head), ContractError);
    batch.positives.push_back(random_row(4, rng));
    batch.negatives.clear();
    CHECK_THROWS_AS(contrastive_loss(batch, head), ContractError);
}

TEST_CASE("gradient through the loss passes finite differences") {
    ParamStore store;
    Rng rng(67);
    ProjectionHead head(store, "head", 6, 6, rng);
    std::vector<double> data(6);
    for (double& v : data) v = rng.uniform(-1.0, 1.0);
    Tensor anchor = Tensor::from(1, 6, std::move(data), true);
    ContrastiveBatch batch;
    batch.anchor = anchor;
    for (int i = 0; i < 2; ++i) batch.positives.push_back(random_row(6, rng));
    for (int i = 0; i < 3; ++i) batch.negatives.push_back(random_row(6, rng));
    batch.temperature = 0.1;

    std::vector<Tensor> params{anchor};
    for (const Parameter& p : store.entries()) params.push_back(p.tensor);
    CHECK(grad_check([&] { return contrastive_loss(batch, head); }, params) < 1e-3);
}

TEST_CASE("sampling returns the configured sizes with matching labels") {
    Dataset ds = tiny_dataset({0, 0, 0, 1, 1, 2, 2, 2});
    Rng rng(68);
    ContrastiveSample s = sample_contrastive_batch(ds, 0, 3, 4, rng);
    CHECK(s.positive_indices.size() == 3);
    CHECK(s.negative_indices.size() == 4);
    for (int i : s.positive_indices) {
        CHECK(ds.records[i].action_label == 0);
        CHECK(i != 0);
    }
    for (int i : s.negative_indices) CHECK(ds.records[i].action_label != 0);
}

TEST_CASE("sampling is deterministic for a fixed seed") {
    Dataset ds = tiny_dataset({0, 0, 1, 1, 2, 2});
    Rng rng_a(99), rng_b(99);
    ContrastiveSample a = sample_contrastive_batch(ds, 0, 3, 4, rng_a);
    ContrastiveSample b = sample_contrastive_batch(ds, 0, 3, 4, rng_b);
    CHECK(a.positive_indices == b.positive_indices);
    CHECK(a.negative_indices == b.negative_indices);
}

TEST_CASE("anchor without positive candidates raises a sampling error") {
    Dataset ds = tiny_dataset({0, 1, 1, 2});
    Rng rng(70);
    CHECK_THROWS_AS(sample_contrastive_batch(ds, 0, 3, 4, rng), SamplingError);
}

TEST_CASE("total accumulates per-modality losses and honors skips") {
    Tensor a = Tensor::scalar(0.4);
    Tensor b = Tensor::scalar(0.25);
    Tensor c = Tensor::scalar(0.15);
    CHECK(total_contrastive({a, b, c}).item() == doctest::Approx(0.8));
    // equal per-modality losses triple
    CHECK(total_contrastive({a, a, a}).item() == doctest::Approx(1.2));
    // one modality skipped
    CHECK(total_contrastive({a, Tensor(), c}).item() == doctest::Approx(0.55));
}
