#pragma once

#include <string>
#include <vector>

#include "drft/data.hpp"
#include "drft/interval.hpp"
#include "drft/nn.hpp"
#include "drft/tensor.hpp"

namespace drft {

// Mean of the modality-feature rows covered by the ground-truth interval.
Tensor pool_gt_segment(const Tensor& modality_feature, const TimeInterval& gt);

// Two-layer MLP mapping pooled features into the embedding space where the
// contrastive loss is applied. One independent instance per modality.
class ProjectionHead {
public:
    ProjectionHead() = default;
    ProjectionHead(ParamStore& store, const std::string& prefix, int in_dim, int out_dim,
                   Rng& rng);

    // L2-normalized embedding; rows are unit vectors.
    Tensor embed(const Tensor& pooled) const;

private:
    Linear first_, second_;
};

// One anchor with its cross-video positives and negatives for one modality.
// The pooled positive/negative features are constants within the step.
struct ContrastiveBatch {
    Tensor anchor;                 // 1 x c (graph-connected)
    std::vector<Tensor> positives; // each 1 x c
    std::vector<Tensor> negatives; // each 1 x c
    double temperature = 0.1;
};

// Log-ratio of the positive similarity mass against the whole batch, on
// unit-norm embeddings:
//   -log( sum_pos exp(s+/tau) / (sum_pos exp(s+/tau) + sum_neg exp(s-/tau)) )
Tensor contrastive_loss_from_embeddings(const Tensor& anchor_embed,
                                        const std::vector<Tensor>& positive_embeds,
                                        const std::vector<Tensor>& negative_embeds,
                                        double temperature);

Tensor contrastive_loss(const ContrastiveBatch& batch, const ProjectionHead& head);

// Record indices shared by every modality of one anchor step.
struct ContrastiveSample {
    std::vector<int> positive_indices;
    std::vector<int> negative_indices;
};

// Uniform sampling (with replacement when candidates are scarce) of
// `num_positives` records sharing the anchor's label and `num_negatives`
// records with different labels.
ContrastiveSample sample_contrastive_batch(const Dataset& dataset, int anchor_index,
                                           int num_positives, int num_negatives, Rng& rng);

// Sum of the per-modality losses; absent batches are skipped.
Tensor total_contrastive(const std::vector<Tensor>& per_modality_losses);

}  // namespace drft
