#pragma once

#include <string>
#include <vector>

#include "drft/interval.hpp"
#include "drft/nn.hpp"
#include "drft/tensor.hpp"

namespace drft {

// o_i = 1 iff segment i lies within the ground-truth interval.
struct GroundTruthMask {
    std::vector<double> values;

    static GroundTruthMask from_interval(const TimeInterval& gt, int segments);
    int positive_count() const;
};

// Temporal attention over segments, weighted aggregation, then an MLP with
// sigmoid endpoints. The returned interval is repaired (swapped) outside the
// differentiable path; `raw_prediction` keeps graph order for the loss.
struct RegOutput {
    Tensor raw_prediction;       // 1 x 2, sigmoid outputs in graph order
    Tensor temporal_attention;   // 1 x T, sums to 1
    TimeInterval interval;       // swapped if needed
};

class RegHead {
public:
    RegHead() = default;
    RegHead(ParamStore& store, const std::string& prefix, int feature_dim, Rng& rng);

    RegOutput forward(const Tensor& fused) const;

private:
    Linear attn_hidden_, attn_logit_;
    Linear reg_hidden_, reg_out_;
};

// --- closed-form loss values (plain scalar path, also used at eval) ---------

double smooth_l1(double x);
double loss_reg(const TimeInterval& pred, const TimeInterval& gt);
double loss_tag(const std::vector<double>& attention, const GroundTruthMask& mask);
double loss_dqa(const std::vector<std::vector<double>>& attention_matrix, double lambda);

// --- differentiable loss graph builders --------------------------------------

// smooth_l1(gt_s - pred_s) + smooth_l1(gt_e - pred_e)
Tensor loss_reg_graph(const Tensor& raw_prediction, const TimeInterval& gt);
// -(sum_i mask_i log o_i) / sum_i mask_i, with o clamped at 1e-12
Tensor loss_tag_graph(const Tensor& temporal_attention, const GroundTruthMask& mask);
// || A^T A - lambda I ||_F^2 given A^T (S x N)
Tensor loss_dqa_graph(const Tensor& attention_t, double lambda);

struct LossTerms {
    Tensor reg;
    Tensor tag;
    Tensor dqa;
    Tensor cl;
};

// Unweighted sum; terms left undefined are treated as zero (ablations).
// A non-finite component raises NumericError naming the term.
Tensor total_loss(const LossTerms& terms);

}  // namespace drft
