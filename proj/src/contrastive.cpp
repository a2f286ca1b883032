#include "drft/contrastive.hpp"

#include <algorithm>
#include <cmath>

#include "drft/errors.hpp"

namespace drft {

Tensor pool_gt_segment(const Tensor& modality_feature, const TimeInterval& gt) {
    if (!(gt.t_s <= gt.t_e)) {
        throw ContractError("pool_gt_segment: interval start exceeds end");
    }
    auto [first, last] = segment_range(gt, modality_feature.rows());
    return mean_rows(slice_rows(modality_feature, first, last + 1));
}

ProjectionHead::ProjectionHead(ParamStore& store, const std::string& prefix, int in_dim,
                               int out_dim, Rng& rng) {
    first_ = Linear(store, prefix + ".first", in_dim, out_dim, rng);
    second_ = Linear(store, prefix + ".second", out_dim, out_dim, rng);
}

Tensor ProjectionHead::embed(const Tensor& pooled) const {
    return l2_normalize_rows(second_(relu(first_(pooled))));
}

Tensor contrastive_loss_from_embeddings(const Tensor& anchor_embed,
                                        const std::vector<Tensor>& positive_embeds,
                                        const std::vector<Tensor>& negative_embeds,
                                        double temperature) {
    if (positive_embeds.empty()) throw ContractError("contrastive loss: empty positive set");
    if (negative_embeds.empty()) throw ContractError("contrastive loss: empty negative set");
    if (temperature <= 0.0) throw ContractError("contrastive loss: temperature must be > 0");

    const double inv_tau = 1.0 / temperature;
    Tensor pos_sims = scale(matmul_nt(anchor_embed, concat_rows(positive_embeds)), inv_tau);
    Tensor neg_sims = scale(matmul_nt(anchor_embed, concat_rows(negative_embeds)), inv_tau);

    // Shift by the detached max before exponentiating; the ratio is
    // invariant to the shift so gradients are unaffected.
    double max_sim = -1e300;
    for (double v : pos_sims.values()) max_sim = std::max(max_sim, v);
    for (double v : neg_sims.values()) max_sim = std::max(max_sim, v);
    Tensor shift = Tensor::scalar(-max_sim);
    Tensor pos_mass = sum_all(exp(add(pos_sims, shift)));
    Tensor neg_mass = sum_all(exp(add(neg_sims, shift)));

    return sub(log(add(pos_mass, neg_mass)), log(pos_mass));
}

Tensor contrastive_loss(const ContrastiveBatch& batch, const ProjectionHead& head) {
    if (batch.positives.empty()) throw ContractError("contrastive loss: empty positive set");
    if (batch.negatives.empty()) throw ContractError("contrastive loss: empty negative set");
    Tensor anchor = head.embed(batch.anchor);
    std::vector<Tensor> pos, neg;
    pos.reserve(batch.positives.size());
    neg.reserve(batch.negatives.size());
    for (const Tensor& p : batch.positives) pos.push_back(head.embed(p));
    for (const Tensor& n : batch.negatives) neg.push_back(head.embed(n));
    return contrastive_loss_from_embeddings(anchor, pos, neg, batch.temperature);
}

ContrastiveSample sample_contrastive_batch(const Dataset& dataset, int anchor_index,
                                           int num_positives, int num_negatives, Rng& rng) {
    const std::vector<int> pos_pool = dataset.positive_candidates(anchor_index);
    const std::vector<int> neg_pool = dataset.negative_candidates(anchor_index);
    if (pos_pool.empty()) {
        throw SamplingError("no positive candidate shares label " +
                            std::to_string(dataset.records[anchor_index].action_label) +
                            " with anchor '" + dataset.records[anchor_index].video_id + "'");
    }
    if (neg_pool.empty()) {
        throw SamplingError("no negative candidate for anchor '" +
                            dataset.records[anchor_index].video_id + "'");
    }
    ContrastiveSample s;
    s.positive_indices.reserve(num_positives);
    s.negative_indices.reserve(num_negatives);
    for (int i = 0; i < num_positives; ++i) {
        s.positive_indices.push_back(
            pos_pool[rng.uniform_int(0, static_cast<int>(pos_pool.size()) - 1)]);
    }
    for (int i = 0; i < num_negatives; ++i) {
        s.negative_indices.push_back(
            neg_pool[rng.uniform_int(0, static_cast<int>(neg_pool.size()) - 1)]);
    }
    return s;
}

Tensor total_contrastive(const std::vector<Tensor>& per_modality_losses) {
    Tensor total = Tensor::scalar(0.0);
    for (const Tensor& loss : per_modality_losses) {
        if (loss.defined()) total = add(total, loss);
    }
    return total;
}

}  // namespace drft
