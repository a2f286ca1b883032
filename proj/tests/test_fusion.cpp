#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "drft/errors.hpp"
#include "drft/fusion.hpp"

using namespace drft;

namespace {

Tensor random_input(int rows, int cols, Rng& rng) {
    std::vector<double> data(static_cast<size_t>(rows) * cols);
    for (double& v : data) v = rng.uniform(-1.0, 1.0);
    return Tensor::from(rows, cols, std::move(data));
}

std::vector<Modality> three_streams() {
    return {Modality::Rgb, Modality::Flow, Modality::Depth};
}

// Plain-loop single-head attention oracle over the block's stored weights.
std::vector<double> single_head_oracle(const ParamStore& store, const std::string& prefix,
                                       const Tensor& xq, const Tensor& xkv) {
    auto apply_linear = [&](const Tensor& x, const std::string& name) {
        Tensor w = store.find(prefix + "." + name + ".weight");
        Tensor b = store.find(prefix + "." + name + ".bias");
        std::vector<double> out(static_cast<size_t>(x.rows()) * w.cols(), 0.0);
        for (int i = 0; i < x.rows(); ++i)
            for (int j = 0; j < w.cols(); ++j) {
                double acc = b.at(0, j);
                for (int k = 0; k < x.cols(); ++k) acc += x.at(i, k) * w.at(k, j);
                out[static_cast<size_t>(i) * w.cols() + j] = acc;
            }
        return out;
    };
    const int t = xq.rows(), c = xq.cols();
    std::vector<double> q = apply_linear(xq, "q");
    std::vector<double> k = apply_linear(xkv, "k");
    std::vector<double> v = apply_linear(xkv, "v");
    std::vector<double> ctx(static_cast<size_t>(t) * c, 0.0);
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(c));
    for (int i = 0; i < t; ++i) {
        std::vector<double> scores(t);
        double mx = -1e300;
        for (int j = 0; j < t; ++j) {
            double acc = 0.0;
            for (int d = 0; d < c; ++d) acc += q[i * c + d] * k[j * c + d];
            scores[j] = acc * inv_sqrt;
            mx = std::max(mx, scores[j]);
        }
        double sum = 0.0;
        for (double& s : scores) {
            s = std::exp(s - mx);
            sum += s;
        }
        for (int j = 0; j < t; ++j) {
            const double p = scores[j] / sum;
            for (int d = 0; d < c; ++d) ctx[i * c + d] += p * v[j * c + d];
        }
    }
    Tensor ctx_t = Tensor::from(t, c, ctx);
    return apply_linear(ctx_t, "out");
}

}  // namespace

TEST_CASE("attention rows are distributions") {
    ParamStore store;
    Rng rng(31);
    CrossAttentionBlock block(store, "blk", 16, 4, 2, rng);
    Tensor xq = random_input(6, 16, rng);
    Tensor xkv = random_input(6, 16, rng);
    for (const Tensor& probs : block.attention_probs(xq, xkv)) {
        for (int i = 0; i < probs.rows(); ++i) {
            double sum = 0.0;
            for (int j = 0; j < probs.cols(); ++j) {
                CHECK(probs.at(i, j) >= 0.0);
                sum += probs.at(i, j);
            }
            CHECK(std::abs(sum - 1.0) < 1e-9);
        }
    }
}

TEST_CASE("identical key/value rows force uniform attention output") {
    ParamStore store;
    Rng rng(32);
    CrossAttentionBlock block(store, "blk", 16, 4, 2, rng);
    Tensor xq = random_input(5, 16, rng);
    Tensor one_row = random_input(1, 16, rng);
    Tensor xkv = broadcast_rows(one_row, 5);

    Tensor attended = block.attend(xq, xkv);
    // Every context row collapses to the projected value of the repeated
    // row, irrespective of the queries.
    Tensor reference = block.attend(broadcast_rows(slice_rows(xq, 0, 1), 5), xkv);
    for (int i = 0; i < attended.rows(); ++i) {
        for (int j = 0; j < attended.cols(); ++j) {
            CHECK(attended.at(i, j) == doctest::Approx(reference.at(0, j)).epsilon(1e-10));
        }
    }
}

TEST_CASE("single head attention matches hand-rolled oracle") {
    ParamStore store;
    Rng rng(33);
    CrossAttentionBlock block(store, "blk", 8, 1, 2, rng);
    Tensor xq = random_input(5, 8, rng);
    Tensor xkv = random_input(5, 8, rng);
    Tensor got = block.attend(xq, xkv);
    std::vector<double> expected = single_head_oracle(store, "blk", xq, xkv);
    for (size_t i = 0; i < expected.size(); ++i) {
        CHECK(std::abs(got.values()[i] - expected[i]) < 1e-10);
    }
}

TEST_CASE("head count must divide the width") {
    ParamStore store;
    Rng rng(34);
    CHECK_THROWS_AS(CrossAttentionBlock(store, "blk", 10, 3, 2, rng), ConfigError);
}

TEST_CASE("co_attend returns four conditioned features of the right shape") {
    ParamStore store;
    Rng rng(35);
    FusionConfig fc;
    fc.dim = 16;
    fc.heads = 4;
    InterModalFusion fusion(store, "fusion", fc, three_streams(), rng);
    Tensor m_r = random_input(6, 16, rng);
    Tensor m_f = random_input(6, 16, rng);
    Tensor m_d = random_input(6, 16, rng);
    CoAttentionOutputs out = fusion.co_attend({m_r, m_f, m_d});
    CHECK(out.slots.size() == 4);
    for (const Tensor& t : out.slots) {
        CHECK(t.rows() == 6);
        CHECK(t.cols() == 16);
    }
}

TEST_CASE("identical depth and flow inputs give bit-identical shared outputs") {
    ParamStore store;
    Rng rng(36);
    FusionConfig fc;
    fc.dim = 16;
    fc.heads = 4;
    InterModalFusion fusion(store, "fusion", fc, three_streams(), rng);
    Tensor m_r = random_input(6, 16, rng);
    Tensor same = random_input(6, 16, rng);
    CoAttentionOutputs out = fusion.co_attend({m_r, same, same});
    // depth pair and flow pair run the same shared block on identical data
    for (size_t i = 0; i < out.depth_cond_rgb().size(); ++i) {
        CHECK(out.depth_cond_rgb().values()[i] == out.flow_cond_rgb().values()[i]);
    }
}

TEST_CASE("shared block gradient equals the sum of the isolated paths") {
    ParamStore store;
    Rng rng(37);
    FusionConfig fc;
    fc.dim = 8;
    fc.heads = 2;
    InterModalFusion fusion(store, "fusion", fc, three_streams(), rng);
    Tensor m_r = random_input(4, 8, rng);
    Tensor m_f = random_input(4, 8, rng);
    Tensor m_d = random_input(4, 8, rng);
    Tensor shared_w = store.find("fusion.l0.rgb_block.q.weight");

    auto grad_of = [&](bool depth_path, bool flow_path) {
        shared_w.zero_grad();
        CoAttentionOutputs out = fusion.co_attend({m_r, m_f, m_d});
        Tensor loss;
        if (depth_path) loss = mean_all(out.depth_cond_rgb());
        if (flow_path) {
            Tensor term = mean_all(out.flow_cond_rgb());
            loss = loss.defined() ? add(loss, term) : term;
        }
        backward(loss);
        return std::vector<double>(shared_w.grad().begin(), shared_w.grad().end());
    };

    std::vector<double> g_depth = grad_of(true, false);
    std::vector<double> g_flow = grad_of(false, true);
    std::vector<double> g_both = grad_of(true, true);
    for (size_t i = 0; i < g_both.size(); ++i) {
        CHECK(std::abs(g_both[i] - (g_depth[i] + g_flow[i])) < 1e-8);
    }
}

TEST_CASE("disabling sharing instantiates a second common block") {
    auto count_params = [](bool share) {
        ParamStore store;
        Rng rng(38);
        FusionConfig fc;
        fc.dim = 16;
        fc.heads = 4;
        fc.share_common_block = share;
        InterModalFusion fusion(store, "fusion", fc, three_streams(), rng);
        return store;
    };
    ParamStore shared = count_params(true);
    ParamStore split = count_params(false);

    size_t block_values = 0;
    for (const Parameter& p : shared.entries()) {
        if (p.name.rfind("fusion.l0.rgb_block.", 0) == 0) block_values += p.tensor.size();
    }
    CHECK(block_values > 0);
    CHECK(split.total_values() == shared.total_values() + block_values);
}

TEST_CASE("transformer off reduces co_attend to identity pass-through") {
    ParamStore store;
    Rng rng(39);
    FusionConfig fc;
    fc.dim = 16;
    fc.heads = 4;
    fc.use_transformer = false;
    InterModalFusion fusion(store, "fusion", fc, three_streams(), rng);
    Tensor m_r = random_input(5, 16, rng);
    Tensor m_f = random_input(5, 16, rng);
    Tensor m_d = random_input(5, 16, rng);
    CoAttentionOutputs out = fusion.co_attend({m_r, m_f, m_d});
    // (M_r, M_d, M_r, M_f)
    for (size_t i = 0; i < m_r.size(); ++i) {
        CHECK(out.slots[0].values()[i] == m_r.values()[i]);
        CHECK(out.slots[1].values()[i] == m_d.values()[i]);
        CHECK(out.slots[2].values()[i] == m_r.values()[i]);
        CHECK(out.slots[3].values()[i] == m_f.values()[i]);
    }
}

TEST_CASE("fresh weight heads start at exactly uniform weights") {
    ParamStore store;
    Rng rng(40);
    FusionConfig fc;
    fc.dim = 16;
    fc.heads = 4;
    InterModalFusion fusion(store, "fusion", fc, three_streams(), rng);
    std::vector<Tensor> feats;
    for (int i = 0; i < 3; ++i) feats.push_back(random_input(4, 16, rng));
    FusionResult r = fusion.forward({feats[0], feats[1], feats[2]});
    for (int i = 0; i < 4; ++i) CHECK(r.weights.at(0, i) == doctest::Approx(0.25));
}

TEST_CASE("paper-reported dynamic fusion weights satisfy the sum invariant") {
    // Weights reported for one action category sum to one, the invariant
    // dynamic_fuse enforces by construction.
    const double w[4] = {0.312, 0.379, 0.194, 0.115};
    CHECK(std::abs(w[0] + w[1] + w[2] + w[3] - 1.0) < 1e-9);
}

TEST_CASE("a dominating logit saturates the fusion") {
    ParamStore store;
    Rng rng(41);
    FusionConfig fc;
    fc.dim = 16;
    fc.heads = 4;
    fc.use_transformer = false;  // pass-through isolates the weighting
    InterModalFusion fusion(store, "fusion", fc, three_streams(), rng);
    store.find("fusion.weights.slot0.bias").mutable_values()[0] = 20.0;

    Tensor m_r = random_input(4, 16, rng);
    Tensor m_f = random_input(4, 16, rng);
    Tensor m_d = random_input(4, 16, rng);
    FusionResult r = fusion.forward({m_r, m_f, m_d});
    // slot 0 passes through M_r
    for (size_t i = 0; i < m_r.size(); ++i) {
        CHECK(std::abs(r.fused.values()[i] - m_r.values()[i]) < 1e-6);
    }
}

TEST_CASE("weights are a distribution and fused is recomputable, 1000 random inputs") {
    ParamStore store;
    Rng rng(42);
    FusionConfig fc;
    fc.dim = 8;
    fc.heads = 2;
    InterModalFusion fusion(store, "fusion", fc, three_streams(), rng);
    // Give the weight heads non-trivial values.
    for (int s = 0; s < 4; ++s) {
        Tensor w = store.find("fusion.weights.slot" + std::to_string(s) + ".weight");
        for (double& v : w.mutable_values()) v = rng.uniform(-1.0, 1.0);
    }

    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<Tensor> feats;
        for (int i = 0; i < 3; ++i) feats.push_back(random_input(3, 8, rng));
        FusionResult r = fusion.forward(feats);
        double sum = 0.0;
        for (int i = 0; i < 4; ++i) {
            const double w = r.weights.at(0, i);
            CHECK(w >= 0.0);
            sum += w;
        }
        CHECK(std::abs(sum - 1.0) < 1e-6);

        CoAttentionOutputs cond = fusion.co_attend(feats);
        for (int i = 0; i < r.fused.rows(); ++i) {
            for (int j = 0; j < r.fused.cols(); ++j) {
                double expected = 0.0;
                for (int s = 0; s < 4; ++s) {
                    expected += r.weights.at(0, s) * cond.slots[s].at(i, j);
                }
                CHECK(std::abs(r.fused.at(i, j) - expected) < 1e-9);
            }
        }
    }
}

TEST_CASE("fixed weights mode pins every weight at one quarter") {
    ParamStore store;
    Rng rng(43);
    FusionConfig fc;
    fc.dim = 16;
    fc.heads = 4;
    fc.learnable_weights = false;
    InterModalFusion fusion(store, "fusion", fc, three_streams(), rng);
    std::vector<Tensor> feats;
    for (int i = 0; i < 3; ++i) feats.push_back(random_input(4, 16, rng));
    FusionResult r = fusion.forward(feats);
    for (int i = 0; i < 4; ++i) CHECK(r.weights.at(0, i) == 0.25);
}

TEST_CASE("mismatched segment counts are rejected") {
    ParamStore store;
    Rng rng(44);
    FusionConfig fc;
    fc.dim = 16;
    fc.heads = 4;
    InterModalFusion fusion(store, "fusion", fc, three_streams(), rng);
    Tensor a = random_input(4, 16, rng);
    Tensor b = random_input(5, 16, rng);
    Tensor c = random_input(4, 16, rng);
    CHECK_THROWS_AS(fusion.co_attend({a, b, c}), ShapeError);
}

TEST_CASE("flow as common modality builds flow-shared pairs") {
    ParamStore store;
    Rng rng(45);
    FusionConfig fc;
    fc.dim = 16;
    fc.heads = 4;
    fc.common = Modality::Flow;
    InterModalFusion fusion(store, "fusion", fc, three_streams(), rng);
    CHECK(store.contains("fusion.l0.flow_block.q.weight"));
    const auto& labels = fusion.weight_labels();
    REQUIRE(labels.size() == 4);
    CHECK(labels[0] == "depth->flow");
    CHECK(labels[1] == "flow->depth");
    CHECK(labels[2] == "rgb->flow");
    CHECK(labels[3] == "flow->rgb");
}
