#include "drft/fusion.hpp"

#include <algorithm>
#include <cmath>

#include "drft/errors.hpp"

namespace drft {

CrossAttentionBlock::CrossAttentionBlock(ParamStore& store, const std::string& prefix, int dim,
                                         int heads, int ff_mult, Rng& rng)
    : dim_(dim), heads_(heads) {
    if (heads < 1 || dim % heads != 0) {
        throw ConfigError("attention dim " + std::to_string(dim) +
                          " not divisible by head count " + std::to_string(heads));
    }
    q_proj_ = Linear(store, prefix + ".q", dim, dim, rng);
    k_proj_ = Linear(store, prefix + ".k", dim, dim, rng);
    v_proj_ = Linear(store, prefix + ".v", dim, dim, rng);
    out_proj_ = Linear(store, prefix + ".out", dim, dim, rng);
    norm_attn_ = LayerNorm(store, prefix + ".norm_attn", dim);
    ff_expand_ = Linear(store, prefix + ".ff1", dim, ff_mult * dim, rng);
    ff_contract_ = Linear(store, prefix + ".ff2", ff_mult * dim, dim, rng);
    norm_ff_ = LayerNorm(store, prefix + ".norm_ff", dim);
}

std::vector<Tensor> CrossAttentionBlock::attention_probs(const Tensor& queries_from,
                                                         const Tensor& keys_values_from) const {
    if (queries_from.cols() != dim_ || keys_values_from.cols() != dim_) {
        throw ShapeError("cross attention: expected width " + std::to_string(dim_) + ", got " +
                         shape_string(queries_from) + " and " + shape_string(keys_values_from));
    }
    const int head_dim = dim_ / heads_;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));
    Tensor q = q_proj_(queries_from);
    Tensor k = k_proj_(keys_values_from);
    std::vector<Tensor> probs;
    probs.reserve(heads_);
    for (int h = 0; h < heads_; ++h) {
        Tensor qh = slice_cols(q, h * head_dim, (h + 1) * head_dim);
        Tensor kh = slice_cols(k, h * head_dim, (h + 1) * head_dim);
        probs.push_back(softmax_rows(scale(matmul_nt(qh, kh), inv_sqrt)));
    }
    return probs;
}

Tensor CrossAttentionBlock::attend(const Tensor& queries_from,
                                   const Tensor& keys_values_from) const {
    const int head_dim = dim_ / heads_;
    std::vector<Tensor> probs = attention_probs(queries_from, keys_values_from);
    Tensor v = v_proj_(keys_values_from);
    std::vector<Tensor> contexts;
    contexts.reserve(heads_);
    for (int h = 0; h < heads_; ++h) {
        Tensor vh = slice_cols(v, h * head_dim, (h + 1) * head_dim);
        contexts.push_back(matmul(probs[h], vh));
    }
    return out_proj_(concat_cols(contexts));
}

Tensor CrossAttentionBlock::forward(const Tensor& queries_from,
                                    const Tensor& keys_values_from) const {
    Tensor attended = norm_attn_(add(queries_from, attend(queries_from, keys_values_from)));
    Tensor ff = ff_contract_(relu(ff_expand_(attended)));
    return norm_ff_(add(attended, ff));
}

InterModalFusion::InterModalFusion(ParamStore& store, const std::string& prefix,
                                   const FusionConfig& cfg, std::vector<Modality> streams,
                                   Rng& rng)
    : cfg_(cfg), streams_(std::move(streams)) {
    if (streams_.size() < 2) {
        throw ConfigError("inter-modal fusion needs at least two streams");
    }
    if (std::find(streams_.begin(), streams_.end(), cfg_.common) == streams_.end()) {
        throw ConfigError(std::string("common modality ") + modality_name(cfg_.common) +
                          " is not among the active streams");
    }
    // Pair order: depth, rgb, flow with the common stream removed.
    for (Modality m : {Modality::Depth, Modality::Rgb, Modality::Flow}) {
        if (m == cfg_.common) continue;
        if (std::find(streams_.begin(), streams_.end(), m) != streams_.end()) {
            others_.push_back(m);
        }
    }

    const int pairs = static_cast<int>(others_.size());
    if (cfg_.use_transformer) {
        for (int l = 0; l < cfg_.layers; ++l) {
            Layer layer;
            const std::string lp = prefix + ".l" + std::to_string(l);
            if (cfg_.share_common_block) {
                layer.common_blocks.emplace_back(
                    store, lp + "." + modality_name(cfg_.common) + "_block", cfg_.dim,
                    cfg_.heads, cfg_.ff_mult, rng);
            } else {
                for (Modality other : others_) {
                    layer.common_blocks.emplace_back(
                        store,
                        lp + "." + modality_name(cfg_.common) + "_block_" +
                            modality_name(other) + "_pair",
                        cfg_.dim, cfg_.heads, cfg_.ff_mult, rng);
                }
            }
            for (Modality other : others_) {
                layer.other_blocks.emplace_back(store,
                                                lp + "." + std::string(modality_name(other)) +
                                                    "_block",
                                                cfg_.dim, cfg_.heads, cfg_.ff_mult, rng);
            }
            layers_.push_back(std::move(layer));
        }
    }

    for (int p = 0; p < pairs; ++p) {
        labels_.push_back(std::string(modality_name(others_[p])) + "->" +
                          modality_name(cfg_.common));
        labels_.push_back(std::string(modality_name(cfg_.common)) + "->" +
                          modality_name(others_[p]));
    }

    if (cfg_.learnable_weights) {
        // Zero-initialized heads start the fusion at exactly uniform weights.
        for (int s = 0; s < 2 * pairs; ++s) {
            weight_heads_.emplace_back(store, prefix + ".weights.slot" + std::to_string(s),
                                       cfg_.dim, 1, rng);
            std::span<double> w = weight_heads_.back().weight.mutable_values();
            std::fill(w.begin(), w.end(), 0.0);
        }
    }
}

const Tensor& InterModalFusion::feature_of(const std::vector<Tensor>& stream_features,
                                           Modality m) const {
    for (size_t i = 0; i < streams_.size(); ++i) {
        if (streams_[i] == m) return stream_features[i];
    }
    throw ContractError(std::string("no feature for modality ") + modality_name(m));
}

CoAttentionOutputs InterModalFusion::co_attend(const std::vector<Tensor>& stream_features) const {
    if (stream_features.size() != streams_.size()) {
        throw ShapeError("co_attend: expected " + std::to_string(streams_.size()) +
                         " stream features, got " + std::to_string(stream_features.size()));
    }
    const Tensor& common = feature_of(stream_features, cfg_.common);
    const int t_len = common.rows();
    for (const Tensor& f : stream_features) {
        if (f.rows() != t_len) {
            throw ShapeError("co_attend: segment counts differ, " + shape_string(common) +
                             " vs " + shape_string(f));
        }
    }

    CoAttentionOutputs out;
    if (!cfg_.use_transformer) {
        // Identity pass-through keeps the fusion interface intact when the
        // transformer is ablated.
        for (Modality other : others_) {
            out.slots.push_back(common);
            out.slots.push_back(feature_of(stream_features, other));
        }
        return out;
    }

    for (size_t p = 0; p < others_.size(); ++p) {
        Tensor common_feat = common;
        Tensor other_feat = feature_of(stream_features, others_[p]);
        for (const Layer& layer : layers_) {
            const CrossAttentionBlock& common_block =
                cfg_.share_common_block ? layer.common_blocks[0] : layer.common_blocks[p];
            Tensor new_common = common_block.forward(common_feat, other_feat);
            Tensor new_other = layer.other_blocks[p].forward(other_feat, common_feat);
            common_feat = new_common;
            other_feat = new_other;
        }
        out.slots.push_back(common_feat);
        out.slots.push_back(other_feat);
    }
    return out;
}

FusionResult InterModalFusion::dynamic_fuse(const std::vector<Tensor>& conditioned) const {
    const int k = static_cast<int>(conditioned.size());
    if (k != num_slots()) {
        throw ShapeError("dynamic_fuse: expected " + std::to_string(num_slots()) +
                         " features, got " + std::to_string(k));
    }
    FusionResult result;
    if (cfg_.learnable_weights) {
        std::vector<Tensor> logits;
        logits.reserve(k);
        for (int i = 0; i < k; ++i) {
            logits.push_back(weight_heads_[i](mean_rows(conditioned[i])));
        }
        result.weights = softmax_rows(concat_cols(logits));
    } else {
        result.weights = Tensor::full(1, k, 1.0 / k);
    }
    Tensor fused = mul(conditioned[0], slice_cols(result.weights, 0, 1));
    for (int i = 1; i < k; ++i) {
        fused = add(fused, mul(conditioned[i], slice_cols(result.weights, i, i + 1)));
    }
    result.fused = fused;
    return result;
}

FusionResult InterModalFusion::forward(const std::vector<Tensor>& stream_features) const {
    return dynamic_fuse(co_attend(stream_features).slots);
}

}  // namespace drft
