#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "drft/config.hpp"
#include "drft/contrastive.hpp"
#include "drft/encoders.hpp"
#include "drft/fusion.hpp"
#include "drft/grounding.hpp"
#include "drft/lgi.hpp"
#include "drft/nn.hpp"

namespace drft {

using ModalityTensors = std::map<Modality, Tensor>;

// The end-to-end grounding model: per-modality encoders, one LGI instance
// per stream, the inter-modal fusion stage, and the REG head. Projection
// heads ride along when intra-modal learning is enabled.
class DrftModel {
public:
    DrftModel(const RunConfig& cfg, const std::map<Modality, int>& input_dims, int vocab_size);

    struct StreamFeatures {
        ModalityTensors m;                   // text-conditioned features, T x c
        std::vector<Tensor> attention_t;     // per stream, S x N
    };

    struct ForwardResult {
        StreamFeatures streams;
        FusionResult fusion;  // weights undefined in single-stream mode
        RegOutput reg;
    };

    StreamFeatures stream_features(const ModalityTensors& raw, const QueryTokens& query) const;
    ForwardResult forward(const ModalityTensors& raw, const QueryTokens& query) const;

    // GT-pooled features per modality, for contrastive positives/negatives.
    ModalityTensors pooled_gt_features(const ModalityTensors& raw, const QueryTokens& query,
                                       const TimeInterval& gt) const;

    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }
    const RunConfig& config() const { return cfg_; }
    const std::vector<Modality>& streams() const { return cfg_.streams; }
    bool has_fusion() const { return fusion_ != nullptr; }
    const InterModalFusion& fusion() const { return *fusion_; }
    const ProjectionHead& projection_head(Modality m) const { return heads_.at(m); }
    const LgiModule& lgi(Modality m) const { return lgi_.at(m); }
    const TextEncoder& text_encoder() const { return text_; }

private:
    RunConfig cfg_;
    ParamStore params_;
    TextEncoder text_;
    std::map<Modality, ModalityEncoder> encoders_;
    std::map<Modality, LgiModule> lgi_;
    std::unique_ptr<InterModalFusion> fusion_;
    RegHead reg_;
    std::map<Modality, ProjectionHead> heads_;
};

}  // namespace drft
