#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "drft/errors.hpp"
#include "drft/gradcheck.hpp"
#include "drft/lgi.hpp"

using namespace drft;

namespace {

struct Fixture {
    ParamStore store;
    Rng rng{21};
    TextEncoder text;
    LgiModule lgi;

    explicit Fixture(int c = 16, int steps = 3)
        : text(store, "text", 12, c, rng), lgi(store, "lgi", c, steps, rng) {}

    EncodedQuery query(std::vector<int> ids) {
        QueryTokens q;
        q.token_ids = std::move(ids);
        q.raw_text = "q";
        return text.encode(q);
    }

    Tensor random_segments(int t_len, int c) {
        std::vector<double> data(static_cast<size_t>(t_len) * c);
        for (double& v : data) v = rng.uniform(-1.0, 1.0);
        return Tensor::from(t_len, c, std::move(data));
    }
};

}  // namespace

TEST_CASE("single word degenerates to all-ones attention") {
    Fixture f;
    PhraseDecomposition dec = f.lgi.sequential_query_attention(f.query({4}));
    CHECK(dec.attention_t.rows() == 3);  // S
    CHECK(dec.attention_t.cols() == 1);  // N
    for (double v : dec.attention_t.values()) CHECK(v == doctest::Approx(1.0));
}

TEST_CASE("every attention column sums to one") {
    Fixture f;
    PhraseDecomposition dec = f.lgi.sequential_query_attention(f.query({1, 5, 9, 2, 7}));
    // attention_t rows are A's columns.
    for (int s = 0; s < dec.attention_t.rows(); ++s) {
        double sum = 0.0;
        for (int w = 0; w < dec.attention_t.cols(); ++w) {
            const double a = dec.attention_t.at(s, w);
            CHECK(a >= 0.0);
            sum += a;
        }
        CHECK(std::abs(sum - 1.0) < 1e-6);
    }
}

TEST_CASE("phrases are the attention-weighted means of word features") {
    Fixture f;
    EncodedQuery eq = f.query({3, 8, 1, 6});
    PhraseDecomposition dec = f.lgi.sequential_query_attention(eq);
    // Oracle: recompute each phrase from the returned weights.
    for (int s = 0; s < dec.phrases.rows(); ++s) {
        for (int j = 0; j < dec.phrases.cols(); ++j) {
            double expected = 0.0;
            for (int w = 0; w < eq.word_features.rows(); ++w) {
                expected += dec.attention_t.at(s, w) * eq.word_features.at(w, j);
            }
            CHECK(dec.phrases.at(s, j) == doctest::Approx(expected).epsilon(1e-10));
        }
    }
}

TEST_CASE("local global interaction shape contract") {
    Fixture f;
    Tensor segments = f.random_segments(8, 16);
    Tensor m = f.lgi.forward(segments, f.query({2, 5, 7}));
    CHECK(m.rows() == 8);
    CHECK(m.cols() == 16);
    for (double v : m.values()) CHECK(std::isfinite(v));
}

TEST_CASE("permuting phrase rows leaves the aggregate unchanged") {
    Fixture f;
    Tensor segments = f.random_segments(6, 16);
    PhraseDecomposition dec = f.lgi.sequential_query_attention(f.query({1, 9, 4}));

    Tensor m1 = f.lgi.local_global_interaction(segments, dec);

    PhraseDecomposition permuted;
    permuted.phrases = concat_rows({slice_rows(dec.phrases, 2, 3), slice_rows(dec.phrases, 0, 2)});
    permuted.attention_t = dec.attention_t;
    Tensor m2 = f.lgi.local_global_interaction(segments, permuted);

    for (size_t i = 0; i < m1.size(); ++i) {
        CHECK(m1.values()[i] == doctest::Approx(m2.values()[i]).epsilon(1e-12));
    }
}

TEST_CASE("single phrase equals the unaveraged path") {
    Fixture f(16, 1);
    Tensor segments = f.random_segments(5, 16);
    PhraseDecomposition dec = f.lgi.sequential_query_attention(f.query({2, 6}));
    CHECK(dec.phrases.rows() == 1);
    Tensor m = f.lgi.local_global_interaction(segments, dec);
    CHECK(m.rows() == 5);
    // Aggregation over one phrase is the identity; sanity-checked by
    // recomputing with the phrase row duplicated (mean of equal terms).
    PhraseDecomposition doubled;
    doubled.phrases = concat_rows({dec.phrases, dec.phrases});
    doubled.attention_t = concat_rows({dec.attention_t, dec.attention_t});
    Tensor m2 = f.lgi.local_global_interaction(segments, doubled);
    for (size_t i = 0; i < m.size(); ++i) {
        CHECK(m.values()[i] == doctest::Approx(m2.values()[i]).epsilon(1e-12));
    }
}

TEST_CASE("modality feature depends on the query") {
    Fixture f;
    Tensor segments = f.random_segments(6, 16);
    Tensor m1 = f.lgi.forward(segments, f.query({1, 2, 3}));
    Tensor m2 = f.lgi.forward(segments, f.query({9, 8, 7}));
    double diff = 0.0;
    for (size_t i = 0; i < m1.size(); ++i) {
        diff += std::abs(m1.values()[i] - m2.values()[i]);
    }
    CHECK(diff > 1e-6);
}

TEST_CASE("sequential query attention rejects zero steps") {
    ParamStore store;
    Rng rng(22);
    CHECK_THROWS_AS(LgiModule(store, "lgi", 16, 0, rng), ContractError);
}

TEST_CASE("gradient through the whole module passes finite differences") {
    ParamStore store;
    Rng rng(23);
    TextEncoder text(store, "text", 9, 8, rng);
    LgiModule lgi(store, "lgi", 8, 2, rng);
    QueryTokens q;
    q.token_ids = {1, 4, 7};
    std::vector<double> seg_data(4 * 8);
    for (double& v : seg_data) v = rng.uniform(-1.0, 1.0);
    Tensor segments = Tensor::from(4, 8, std::move(seg_data));
    std::vector<double> w_data(4 * 8);
    for (double& v : w_data) v = rng.uniform(-1.0, 1.0);
    Tensor w = Tensor::from(4, 8, std::move(w_data));

    std::vector<Tensor> params;
    for (const Parameter& p : store.entries()) params.push_back(p.tensor);
    auto loss = [&] {
        EncodedQuery eq = text.encode(q);
        return mean_all(mul(lgi.forward(segments, eq), w));
    };
    CHECK(grad_check(loss, params) < 1e-3);
}
