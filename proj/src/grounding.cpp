#include "drft/grounding.hpp"

#include <cmath>

#include "drft/errors.hpp"

namespace drft {

GroundTruthMask GroundTruthMask::from_interval(const TimeInterval& gt, int segments) {
    auto [first, last] = segment_range(gt, segments);
    GroundTruthMask m;
    m.values.assign(segments, 0.0);
    for (int i = first; i <= last; ++i) m.values[i] = 1.0;
    return m;
}

int GroundTruthMask::positive_count() const {
    int n = 0;
    for (double v : values) n += v > 0.5 ? 1 : 0;
    return n;
}

RegHead::RegHead(ParamStore& store, const std::string& prefix, int feature_dim, Rng& rng) {
    attn_hidden_ = Linear(store, prefix + ".attn.hidden", feature_dim, feature_dim, rng);
    attn_logit_ = Linear(store, prefix + ".attn.logit", feature_dim, 1, rng);
    reg_hidden_ = Linear(store, prefix + ".mlp.hidden", feature_dim, feature_dim, rng);
    reg_out_ = Linear(store, prefix + ".mlp.out", feature_dim, 2, rng);
}

RegOutput RegHead::forward(const Tensor& fused) const {
    Tensor logits = attn_logit_(relu(attn_hidden_(fused)));        // T x 1
    Tensor attention = softmax_rows(transposed(logits));           // 1 x T
    Tensor aggregated = matmul(attention, fused);                  // 1 x c
    Tensor raw = sigmoid(reg_out_(relu(reg_hidden_(aggregated)))); // 1 x 2

    RegOutput out;
    out.raw_prediction = raw;
    out.temporal_attention = attention;
    const double a = raw.at(0, 0);
    const double b = raw.at(0, 1);
    out.interval = a <= b ? TimeInterval{a, b} : TimeInterval{b, a};
    return out;
}

double smooth_l1(double x) {
    const double ax = std::abs(x);
    return ax < 1.0 ? 0.5 * x * x : ax - 0.5;
}

double loss_reg(const TimeInterval& pred, const TimeInterval& gt) {
    return smooth_l1(gt.t_s - pred.t_s) + smooth_l1(gt.t_e - pred.t_e);
}

double loss_tag(const std::vector<double>& attention, const GroundTruthMask& mask) {
    if (attention.size() != mask.values.size()) {
        throw ShapeError("loss_tag: attention length " + std::to_string(attention.size()) +
                         " != mask length " + std::to_string(mask.values.size()));
    }
    const int pos = mask.positive_count();
    if (pos == 0) throw ContractError("loss_tag: mask has no positive segment");
    double acc = 0.0;
    for (size_t i = 0; i < attention.size(); ++i) {
        if (mask.values[i] > 0.5) acc -= std::log(std::max(attention[i], 1e-12));
    }
    return acc / pos;
}

double loss_dqa(const std::vector<std::vector<double>>& a, double lambda) {
    const size_t n = a.size();         // words
    const size_t s = n ? a[0].size() : 0;  // steps
    double acc = 0.0;
    for (size_t i = 0; i < s; ++i) {
        for (size_t j = 0; j < s; ++j) {
            double dot = 0.0;
            for (size_t w = 0; w < n; ++w) dot += a[w][i] * a[w][j];
            const double d = dot - (i == j ? lambda : 0.0);
            acc += d * d;
        }
    }
    return acc;
}

Tensor loss_reg_graph(const Tensor& raw_prediction, const TimeInterval& gt) {
    Tensor diff = sub(Tensor::row({gt.t_s, gt.t_e}), raw_prediction);  // 1 x 2
    Tensor start_term = smooth_l1_scalar(slice_cols(diff, 0, 1));
    Tensor end_term = smooth_l1_scalar(slice_cols(diff, 1, 2));
    return add(start_term, end_term);
}

Tensor loss_tag_graph(const Tensor& temporal_attention, const GroundTruthMask& mask) {
    if (temporal_attention.cols() != static_cast<int>(mask.values.size()) ||
        temporal_attention.rows() != 1) {
        throw ShapeError("loss_tag: attention " + shape_string(temporal_attention) +
                         " does not match mask length " + std::to_string(mask.values.size()));
    }
    const int pos = mask.positive_count();
    if (pos == 0) throw ContractError("loss_tag: mask has no positive segment");
    Tensor mask_row = Tensor::row(mask.values);
    Tensor picked = mul(log(clamp_min(temporal_attention, 1e-12)), mask_row);
    return scale(sum_all(picked), -1.0 / pos);
}

Tensor loss_dqa_graph(const Tensor& attention_t, double lambda) {
    const int steps = attention_t.rows();
    Tensor gram = matmul_nt(attention_t, attention_t);  // S x S = A^T A
    Tensor shifted = add(gram, scale(Tensor::identity(steps), -lambda));
    return sum_all(mul(shifted, shifted));
}

Tensor total_loss(const LossTerms& terms) {
    struct Named {
        const char* name;
        const Tensor* t;
    };
    const Named named[] = {{"L_reg", &terms.reg},
                           {"L_tag", &terms.tag},
                           {"L_dqa", &terms.dqa},
                           {"L_cl", &terms.cl}};
    Tensor total = Tensor::scalar(0.0);
    for (const Named& n : named) {
        if (!n.t->defined()) continue;
        if (!std::isfinite(n.t->item())) {
            throw NumericError(std::string(n.name) + " is not finite");
        }
        total = add(total, *n.t);
    }
    return total;
}

}  // namespace drft
