#pragma once

#include <string>
#include <vector>

#include "drft/data.hpp"
#include "drft/nn.hpp"
#include "drft/tensor.hpp"

namespace drft {

// One co-attentional transformer block: multi-head attention where queries
// come from one stream and keys/values from the other, followed by residual
// + layer norm and a two-layer feed-forward sublayer.
class CrossAttentionBlock {
public:
    CrossAttentionBlock() = default;
    CrossAttentionBlock(ParamStore& store, const std::string& prefix, int dim, int heads,
                        int ff_mult, Rng& rng);

    // Attention output before the residual path (T x c).
    Tensor attend(const Tensor& queries_from, const Tensor& keys_values_from) const;
    // Full block.
    Tensor forward(const Tensor& queries_from, const Tensor& keys_values_from) const;
    // Per-head attention distributions (each T x T, rows sum to 1).
    std::vector<Tensor> attention_probs(const Tensor& queries_from,
                                        const Tensor& keys_values_from) const;

    int dim() const { return dim_; }
    int heads() const { return heads_; }

private:
    int dim_ = 0;
    int heads_ = 0;
    Linear q_proj_, k_proj_, v_proj_, out_proj_;
    LayerNorm norm_attn_, norm_ff_;
    Linear ff_expand_, ff_contract_;
};

struct FusionConfig {
    int dim = 32;
    int heads = 4;
    int layers = 1;
    int ff_mult = 2;
    bool use_transformer = true;    // off: identity pass-through of the streams
    bool share_common_block = true; // off: one common block per pair
    bool learnable_weights = true;  // off: fixed 1/k weights
    Modality common = Modality::Rgb;
};

// Conditioned features of the two co-attention pairs. Slot layout follows
// the pair order (other-modality order: depth, rgb, flow minus the common):
//   slot 2p   : common-stream feature of pair p (Q = common, KV = other_p)
//   slot 2p+1 : other-stream feature of pair p  (Q = other_p, KV = common)
// With the default RGB common modality this is exactly
//   (depth->rgb, rgb->depth, flow->rgb, rgb->flow)
// where "x->y" is the x-conditioned y feature.
struct CoAttentionOutputs {
    std::vector<Tensor> slots;
    const Tensor& depth_cond_rgb() const { return slots[0]; }
    const Tensor& rgb_cond_depth() const { return slots[1]; }
    const Tensor& flow_cond_rgb() const { return slots[2]; }
    const Tensor& rgb_cond_flow() const { return slots[3]; }
};

struct FusionResult {
    Tensor fused;    // T x c
    Tensor weights;  // 1 x k, softmax-normalized (or fixed 1/k)
};

// Inter-modal feature learning: co-attention over (other, common) pairs with
// a shared common-stream block, then a learned convex combination of the
// conditioned features.
class InterModalFusion {
public:
    InterModalFusion() = default;
    InterModalFusion(ParamStore& store, const std::string& prefix, const FusionConfig& cfg,
                     std::vector<Modality> streams, Rng& rng);

    // Streams passed in the order given at construction.
    CoAttentionOutputs co_attend(const std::vector<Tensor>& stream_features) const;
    FusionResult dynamic_fuse(const std::vector<Tensor>& conditioned) const;
    FusionResult forward(const std::vector<Tensor>& stream_features) const;

    int num_slots() const { return static_cast<int>(2 * others_.size()); }
    const std::vector<std::string>& weight_labels() const { return labels_; }
    const std::vector<Modality>& streams() const { return streams_; }
    Modality common() const { return cfg_.common; }

private:
    const Tensor& feature_of(const std::vector<Tensor>& stream_features, Modality m) const;

    FusionConfig cfg_;
    std::vector<Modality> streams_;
    std::vector<Modality> others_;  // pair order
    // blocks_[layer]: common blocks (one shared, or one per pair) then one
    // block per other modality.
    struct Layer {
        std::vector<CrossAttentionBlock> common_blocks;  // size 1 (shared) or pairs
        std::vector<CrossAttentionBlock> other_blocks;   // size = pairs
    };
    std::vector<Layer> layers_;
    std::vector<Linear> weight_heads_;  // one per slot, zero-initialized
    std::vector<std::string> labels_;
};

}  // namespace drft
