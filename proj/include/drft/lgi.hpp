#pragma once

#include <string>
#include <vector>

#include "drft/encoders.hpp"
#include "drft/nn.hpp"
#include "drft/tensor.hpp"

namespace drft {

// Sequential query attention output: S phrase features plus the word
// attention distributions that produced them. `attention_t` holds A^T
// (S x N); each row is a distribution over the N words, i.e. each column
// of A sums to one.
struct PhraseDecomposition {
    Tensor phrases;      // S x c
    Tensor attention_t;  // S x N
};

// Query incorporation for one modality stream: the sentence is decomposed
// into S phrases which modulate the segment features locally, followed by a
// temporal self-attention pass; results are averaged over phrases.
class LgiModule {
public:
    LgiModule() = default;
    LgiModule(ParamStore& store, const std::string& prefix, int feature_dim, int num_steps,
              Rng& rng);

    PhraseDecomposition sequential_query_attention(const EncodedQuery& query) const;
    Tensor local_global_interaction(const Tensor& segments,
                                    const PhraseDecomposition& phrases) const;

    // Full pass: text-conditioned modality feature M (T x c).
    Tensor forward(const Tensor& segments, const EncodedQuery& query) const;

    int num_steps() const { return num_steps_; }

private:
    int feature_dim_ = 0;
    int num_steps_ = 0;
    Linear guide_proj_;   // [sentence ; prev phrase] -> attention guide
    Linear key_proj_;     // word features -> attention keys
    Linear modulation_;   // phrase -> per-channel gate (bias starts at 1)
    Linear attn_q_, attn_k_, attn_v_;
    LayerNorm attn_norm_;
};

}  // namespace drft
