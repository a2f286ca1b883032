#include "drft/gradcheck_suite.hpp"

#include <cmath>

#include "drft/gradcheck.hpp"
#include "drft/model.hpp"
#include "drft/trainer.hpp"

namespace drft {

namespace {

constexpr double kOpThreshold = 1e-6;
constexpr double kModuleThreshold = 1e-3;

Tensor random_param(int rows, int cols, Rng& rng, double lo = -1.0, double hi = 1.0) {
    std::vector<double> data(static_cast<size_t>(rows) * cols);
    for (double& v : data) v = rng.uniform(lo, hi);
    return Tensor::from(rows, cols, std::move(data), /*requires_grad=*/true);
}

// Values bounded away from zero, for kink-free ReLU probing.
Tensor random_param_off_zero(int rows, int cols, Rng& rng) {
    std::vector<double> data(static_cast<size_t>(rows) * cols);
    for (double& v : data) {
        const double mag = rng.uniform(0.2, 1.0);
        v = rng.uniform() < 0.5 ? -mag : mag;
    }
    return Tensor::from(rows, cols, std::move(data), /*requires_grad=*/true);
}

Tensor random_const(int rows, int cols, Rng& rng) {
    std::vector<double> data(static_cast<size_t>(rows) * cols);
    for (double& v : data) v = rng.uniform(-1.0, 1.0);
    return Tensor::from(rows, cols, std::move(data));
}

GradCheckRow check(const std::string& component, double threshold,
                   const std::function<Tensor()>& build, std::vector<Tensor> params) {
    GradCheckRow row;
    row.component = component;
    row.threshold = threshold;
    row.max_rel_error = grad_check(build, std::move(params));
    row.pass = row.max_rel_error < threshold;
    return row;
}

// Composite checks probe with a finer step: at 1e-4 the central difference
// itself goes bad whenever the perturbation crosses a ReLU kink deep in the
// stack, even though the analytic gradient is exact. The finer step in turn
// makes near-zero-gradient coordinates pure roundoff, so those are skipped.
GradCheckRow check_module(const std::string& component, const std::function<Tensor()>& build,
                          std::vector<Tensor> params) {
    GradCheckOptions opts;
    opts.epsilon = 1e-6;
    opts.negligible_below = 1e-6;
    GradCheckRow row;
    row.component = component;
    row.threshold = kModuleThreshold;
    row.max_rel_error = grad_check(build, std::move(params), opts);
    row.pass = row.max_rel_error < row.threshold;
    return row;
}

std::vector<GradCheckRow> core_op_rows() {
    std::vector<GradCheckRow> rows;
    Rng rng(101);

    {
        Tensor a = random_param(3, 4, rng), b = random_param(4, 2, rng);
        Tensor w = random_const(3, 2, rng);
        rows.push_back(check("numeric-core.matmul", kOpThreshold,
                             [=] { return mean_all(mul(matmul(a, b), w)); }, {a, b}));
    }
    {
        Tensor a = random_param(3, 4, rng), b = random_param(2, 4, rng);
        Tensor w = random_const(3, 2, rng);
        rows.push_back(check("numeric-core.matmul_nt", kOpThreshold,
                             [=] { return mean_all(mul(matmul_nt(a, b), w)); }, {a, b}));
    }
    {
        Tensor a = random_param(4, 3, rng), b = random_param(4, 2, rng);
        Tensor w = random_const(3, 2, rng);
        rows.push_back(check("numeric-core.matmul_tn", kOpThreshold,
                             [=] { return mean_all(mul(matmul_tn(a, b), w)); }, {a, b}));
    }
    {
        Tensor a = random_param(3, 4, rng), row_b = random_param(1, 4, rng);
        Tensor s = random_param(1, 1, rng);
        Tensor w = random_const(3, 4, rng);
        rows.push_back(check("numeric-core.add_broadcast", kOpThreshold,
                             [=] { return mean_all(mul(add(add(a, row_b), s), w)); },
                             {a, row_b, s}));
    }
    {
        Tensor a = random_param(3, 4, rng), row_b = random_param(1, 4, rng);
        Tensor s = random_param(1, 1, rng);
        Tensor w = random_const(3, 4, rng);
        rows.push_back(check("numeric-core.mul_broadcast", kOpThreshold,
                             [=] { return mean_all(mul(mul(mul(a, row_b), s), w)); },
                             {a, row_b, s}));
    }
    {
        Tensor a = random_param(3, 5, rng);
        Tensor w = random_const(3, 5, rng);
        rows.push_back(check("numeric-core.softmax_rows", kOpThreshold,
                             [=] { return mean_all(mul(softmax_rows(a), w)); }, {a}));
    }
    {
        Tensor a = random_param(3, 4, rng);
        Tensor w = random_const(3, 4, rng);
        rows.push_back(check("numeric-core.log", kOpThreshold,
                             [=] {
                                 Tensor positive = add(mul(a, a), Tensor::scalar(0.5));
                                 return mean_all(mul(log(positive), w));
                             },
                             {a}));
    }
    {
        Tensor a = random_param(3, 4, rng);
        Tensor w = random_const(3, 4, rng);
        rows.push_back(check("numeric-core.exp", kOpThreshold,
                             [=] { return mean_all(mul(exp(a), w)); }, {a}));
    }
    {
        Tensor a = random_param_off_zero(3, 4, rng);
        Tensor w = random_const(3, 4, rng);
        rows.push_back(check("numeric-core.relu", kOpThreshold,
                             [=] { return mean_all(mul(relu(a), w)); }, {a}));
    }
    {
        Tensor a = random_param(3, 4, rng);
        Tensor w = random_const(3, 4, rng);
        rows.push_back(check("numeric-core.tanh", kOpThreshold,
                             [=] { return mean_all(mul(tanh(a), w)); }, {a}));
    }
    {
        Tensor a = random_param(3, 4, rng);
        Tensor w = random_const(3, 4, rng);
        rows.push_back(check("numeric-core.sigmoid", kOpThreshold,
                             [=] { return mean_all(mul(sigmoid(a), w)); }, {a}));
    }
    {
        Tensor a = random_param(3, 6, rng);
        Tensor w = random_const(3, 6, rng);
        rows.push_back(check("numeric-core.l2_normalize", kOpThreshold,
                             [=] { return mean_all(mul(l2_normalize_rows(a), w)); }, {a}));
    }
    {
        Tensor a = random_param(3, 6, rng);
        Tensor w = random_const(3, 6, rng);
        rows.push_back(check("numeric-core.layer_norm", kOpThreshold,
                             [=] { return mean_all(mul(layer_norm_rows(a), w)); }, {a}));
    }
    {
        Tensor a = random_param(3, 4, rng);
        Tensor w = random_const(1, 4, rng);
        rows.push_back(check("numeric-core.mean", kOpThreshold,
                             [=] {
                                 return add(mean_all(a),
                                            mean_all(mul(mean_rows(a), w)));
                             },
                             {a}));
    }
    {
        Tensor a = random_param(2, 3, rng), b = random_param(3, 3, rng);
        Tensor w = random_const(2, 4, rng);
        rows.push_back(check("numeric-core.concat_slice", kOpThreshold,
                             [=] {
                                 Tensor stacked = concat_rows({a, b});       // 5 x 3
                                 Tensor wide = concat_cols({a, a});          // 2 x 6
                                 Tensor piece = slice_rows(stacked, 1, 4);   // 3 x 3
                                 Tensor cut = slice_cols(wide, 1, 5);        // 2 x 4
                                 return add(mean_all(piece), mean_all(mul(cut, w)));
                             },
                             {a, b}));
    }
    {
        Tensor a = random_param(1, 4, rng);
        Tensor w = random_const(3, 4, rng);
        rows.push_back(check("numeric-core.broadcast_rows", kOpThreshold,
                             [=] { return mean_all(mul(broadcast_rows(a, 3), w)); }, {a}));
    }
    {
        Tensor inside = Tensor::from(1, 1, {0.4}, true);
        Tensor outside = Tensor::from(1, 1, {-1.7}, true);
        rows.push_back(check("numeric-core.smooth_l1", kOpThreshold,
                             [=] {
                                 return add(smooth_l1_scalar(inside),
                                            smooth_l1_scalar(outside));
                             },
                             {inside, outside}));
    }
    return rows;
}

std::vector<Tensor> all_params(const ParamStore& store) {
    std::vector<Tensor> out;
    for (const Parameter& p : store.entries()) out.push_back(p.tensor);
    return out;
}

QueryTokens make_tokens(std::vector<int> ids) {
    QueryTokens q;
    q.token_ids = std::move(ids);
    q.raw_text = "synthetic";
    return q;
}

GradCheckRow check_text_encoder() {
    ParamStore store;
    Rng rng(202);
    TextEncoder text(store, "text", /*vocab=*/7, /*dim=*/8, rng);
    QueryTokens q = make_tokens({1, 4, 2, 6});
    Tensor w_words = random_const(4, 8, rng);
    Tensor w_sent = random_const(1, 8, rng);
    return check_module("encoders.text",
                 [&] {
                     EncodedQuery eq = text.encode(q);
                     return add(mean_all(mul(eq.word_features, w_words)),
                                mean_all(mul(eq.sentence_feature, w_sent)));
                 },
                 all_params(store));
}

GradCheckRow check_modality_encoder() {
    ParamStore store;
    Rng rng(203);
    ModalityEncoder enc(store, "encoder.rgb", Modality::Rgb, 5, 8, rng);
    Tensor x = random_const(3, 5, rng);
    Tensor w = random_const(3, 8, rng);
    return check_module("encoders.modality",
                 [&] { return mean_all(mul(enc.encode(x), w)); }, all_params(store));
}

GradCheckRow check_lgi() {
    ParamStore store;
    Rng rng(204);
    TextEncoder text(store, "text", 7, 8, rng);
    LgiModule lgi(store, "lgi", 8, /*steps=*/2, rng);
    QueryTokens q = make_tokens({2, 5, 1});
    Tensor segments = random_const(4, 8, rng);
    Tensor w = random_const(4, 8, rng);
    return check_module("lgi",
                 [&] {
                     EncodedQuery eq = text.encode(q);
                     PhraseDecomposition dec = lgi.sequential_query_attention(eq);
                     Tensor m = lgi.local_global_interaction(segments, dec);
                     return add(mean_all(mul(m, w)),
                                loss_dqa_graph(dec.attention_t, 0.3));
                 },
                 all_params(store));
}

GradCheckRow check_fusion() {
    ParamStore store;
    Rng rng(205);
    FusionConfig fc;
    fc.dim = 8;
    fc.heads = 2;
    InterModalFusion fusion(store, "fusion", fc,
                            {Modality::Rgb, Modality::Flow, Modality::Depth}, rng);
    Tensor m_r = random_const(4, 8, rng);
    Tensor m_f = random_const(4, 8, rng);
    Tensor m_d = random_const(4, 8, rng);
    Tensor w = random_const(4, 8, rng);
    return check_module("fusion",
                 [&] {
                     FusionResult r = fusion.forward({m_r, m_f, m_d});
                     return add(mean_all(mul(r.fused, w)), mean_all(r.weights));
                 },
                 all_params(store));
}

GradCheckRow check_contrastive() {
    ParamStore store;
    Rng rng(206);
    ProjectionHead head(store, "head", 8, 8, rng);
    Tensor anchor = random_param(1, 8, rng);
    ContrastiveBatch batch;
    batch.anchor = anchor;
    for (int i = 0; i < 3; ++i) batch.positives.push_back(random_const(1, 8, rng));
    for (int i = 0; i < 4; ++i) batch.negatives.push_back(random_const(1, 8, rng));
    batch.temperature = 0.1;
    std::vector<Tensor> params = all_params(store);
    params.push_back(anchor);
    return check_module("contrastive",
                 [&] { return contrastive_loss(batch, head); }, std::move(params));
}

GradCheckRow check_grounding() {
    ParamStore store;
    Rng rng(207);
    RegHead reg(store, "reg", 8, rng);
    Tensor fused = random_const(4, 8, rng);
    TimeInterval gt{0.25, 0.75};
    GroundTruthMask mask = GroundTruthMask::from_interval(gt, 4);
    return check_module("grounding.reg",
                 [&] {
                     RegOutput out = reg.forward(fused);
                     return add(loss_reg_graph(out.raw_prediction, gt),
                                loss_tag_graph(out.temporal_attention, mask));
                 },
                 all_params(store));
}

GradCheckRow check_full_loss() {
    RunConfig cfg;
    cfg.feature_dim = 8;
    cfg.heads = 2;
    cfg.sqa_steps = 2;
    cfg.seed = 11;

    const int t_len = 4, d_in = 5, vocab = 9;
    std::map<Modality, int> dims{{Modality::Rgb, d_in},
                                 {Modality::Flow, d_in},
                                 {Modality::Depth, d_in}};
    DrftModel model(cfg, dims, vocab);

    Rng rng(208);
    auto make_raw = [&] {
        ModalityTensors raw;
        for (Modality m : cfg.streams) raw[m] = random_const(t_len, d_in, rng);
        return raw;
    };
    ModalityTensors anchor_raw = make_raw();
    QueryTokens anchor_q = make_tokens({1, 7, 3, 5, 2});  // N = 5
    TimeInterval gt{0.3, 0.8};
    GroundTruthMask mask = GroundTruthMask::from_interval(gt, t_len);

    // Frozen cross-video features: constants of the step under test.
    std::vector<ModalityTensors> pos_pooled, neg_pooled;
    {
        NoGradGuard frozen;
        for (int i = 0; i < 3; ++i) {
            pos_pooled.push_back(
                model.pooled_gt_features(make_raw(), make_tokens({2, 4, 1}), {0.2, 0.6}));
        }
        for (int i = 0; i < 4; ++i) {
            neg_pooled.push_back(
                model.pooled_gt_features(make_raw(), make_tokens({6, 8, 3}), {0.1, 0.5}));
        }
    }

    return check_module("full-loss",
                 [&] {
                     DrftModel::ForwardResult fwd = model.forward(anchor_raw, anchor_q);
                     LossTerms terms;
                     terms.reg = loss_reg_graph(fwd.reg.raw_prediction, gt);
                     terms.tag = loss_tag_graph(fwd.reg.temporal_attention, mask);
                     Tensor dqa;
                     for (const Tensor& at : fwd.streams.attention_t) {
                         Tensor term = loss_dqa_graph(at, cfg.lambda_dqa);
                         dqa = dqa.defined() ? add(dqa, term) : term;
                     }
                     terms.dqa = dqa;
                     std::vector<Tensor> cl;
                     for (Modality m : cfg.streams) {
                         ContrastiveBatch batch;
                         batch.anchor = pool_gt_segment(fwd.streams.m.at(m), gt);
                         for (auto& p : pos_pooled) batch.positives.push_back(p.at(m));
                         for (auto& n : neg_pooled) batch.negatives.push_back(n.at(m));
                         batch.temperature = cfg.temperature;
                         cl.push_back(contrastive_loss(batch, model.projection_head(m)));
                     }
                     terms.cl = total_contrastive(cl);
                     return total_loss(terms);
                 },
                 all_params(model.params()));
}

}  // namespace

std::vector<GradCheckRow> run_gradcheck_suite() {
    std::vector<GradCheckRow> rows = core_op_rows();
    rows.push_back(check_text_encoder());
    rows.push_back(check_modality_encoder());
    rows.push_back(check_lgi());
    rows.push_back(check_fusion());
    rows.push_back(check_contrastive());
    rows.push_back(check_grounding());
    rows.push_back(check_full_loss());
    return rows;
}

}  // namespace drft
