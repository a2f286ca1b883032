#include "drft/model.hpp"

#include <algorithm>

#include "drft/errors.hpp"

namespace drft {

DrftModel::DrftModel(const RunConfig& cfg, const std::map<Modality, int>& input_dims,
                     int vocab_size)
    : cfg_(cfg) {
    cfg_.validate();
    Rng rng(cfg_.seed);
    const int c = cfg_.feature_dim;

    text_ = TextEncoder(params_, "text", vocab_size, c, rng);

    // Fixed construction order keeps parameter names and init deterministic.
    const Modality order[3] = {Modality::Rgb, Modality::Flow, Modality::Depth};
    for (Modality m : order) {
        if (std::find(cfg_.streams.begin(), cfg_.streams.end(), m) == cfg_.streams.end()) {
            continue;
        }
        auto dit = input_dims.find(m);
        if (dit == input_dims.end()) {
            throw ConfigError(std::string("no input dimension known for stream ") +
                              modality_name(m));
        }
        const std::string name = modality_name(m);
        encoders_.emplace(m, ModalityEncoder(params_, "encoder." + name, m, dit->second, c, rng));
        lgi_.emplace(m, LgiModule(params_, "lgi." + name, c, cfg_.sqa_steps, rng));
    }

    if (cfg_.streams.size() > 1) {
        FusionConfig fc;
        fc.dim = c;
        fc.heads = cfg_.heads;
        fc.layers = cfg_.coattn_layers;
        fc.ff_mult = cfg_.ff_mult;
        fc.use_transformer = cfg_.use_transformer;
        fc.share_common_block = cfg_.share_common_block;
        fc.learnable_weights = cfg_.learnable_weights;
        fc.common = cfg_.resolved_common();
        fusion_ = std::make_unique<InterModalFusion>(params_, "fusion", fc, cfg_.streams, rng);
    }

    reg_ = RegHead(params_, "reg", c, rng);

    if (cfg_.use_contrastive) {
        for (Modality m : order) {
            if (std::find(cfg_.streams.begin(), cfg_.streams.end(), m) == cfg_.streams.end()) {
                continue;
            }
            heads_.emplace(m, ProjectionHead(params_,
                                             std::string("contrastive.") + modality_name(m), c,
                                             c, rng));
        }
    }
}

DrftModel::StreamFeatures DrftModel::stream_features(const ModalityTensors& raw,
                                                     const QueryTokens& query) const {
    EncodedQuery eq = text_.encode(query);
    StreamFeatures out;
    for (Modality m : cfg_.streams) {
        auto rit = raw.find(m);
        if (rit == raw.end()) {
            throw ContractError(std::string("missing raw features for stream ") +
                                modality_name(m));
        }
        Tensor segments = encoders_.at(m).encode(rit->second);
        PhraseDecomposition dec = lgi_.at(m).sequential_query_attention(eq);
        out.m[m] = lgi_.at(m).local_global_interaction(segments, dec);
        out.attention_t.push_back(dec.attention_t);
    }
    return out;
}

DrftModel::ForwardResult DrftModel::forward(const ModalityTensors& raw,
                                            const QueryTokens& query) const {
    ForwardResult result;
    result.streams = stream_features(raw, query);
    Tensor fused;
    if (fusion_) {
        std::vector<Tensor> feats;
        feats.reserve(cfg_.streams.size());
        for (Modality m : cfg_.streams) feats.push_back(result.streams.m.at(m));
        result.fusion = fusion_->forward(feats);
        fused = result.fusion.fused;
    } else {
        fused = result.streams.m.at(cfg_.streams.front());
        result.fusion.fused = fused;
    }
    result.reg = reg_.forward(fused);
    return result;
}

ModalityTensors DrftModel::pooled_gt_features(const ModalityTensors& raw,
                                              const QueryTokens& query,
                                              const TimeInterval& gt) const {
    StreamFeatures sf = stream_features(raw, query);
    ModalityTensors pooled;
    for (auto& [m, feature] : sf.m) pooled[m] = pool_gt_segment(feature, gt);
    return pooled;
}

}  // namespace drft
