#pragma once

#include <string>

#include "drft/data.hpp"
#include "drft/nn.hpp"
#include "drft/tensor.hpp"

namespace drft {

// Word-level features plus a whole-sentence feature. The sentence feature is
// the concatenation of the final forward and final backward hidden states.
struct EncodedQuery {
    Tensor word_features;     // N x c
    Tensor sentence_feature;  // 1 x c
};

// Bi-directional LSTM over learned word embeddings; each direction carries
// c/2 hidden units so word features line up with the visual feature width.
class TextEncoder {
public:
    TextEncoder() = default;
    TextEncoder(ParamStore& store, const std::string& prefix, int vocab_size, int feature_dim,
                Rng& rng);

    EncodedQuery encode(const QueryTokens& query) const;

    int vocab_size() const { return vocab_size_; }
    int feature_dim() const { return feature_dim_; }

private:
    Tensor run_direction(const Tensor& embedded, const Linear& input_proj,
                         const Linear& hidden_proj, bool reverse) const;

    int vocab_size_ = 0;
    int feature_dim_ = 0;
    int hidden_ = 0;  // per direction
    Tensor embeddings_;  // vocab x c
    Linear fwd_input_, fwd_hidden_;
    Linear bwd_input_, bwd_hidden_;
};

// Per-segment two-layer MLP with ReLU, replacing pixel-level extraction at
// desk scale; row-local by construction.
class ModalityEncoder {
public:
    ModalityEncoder() = default;
    ModalityEncoder(ParamStore& store, const std::string& prefix, Modality modality,
                    int input_dim, int feature_dim, Rng& rng);

    Tensor encode(const RawSegmentFeatures& x) const;
    Tensor encode(const Tensor& x) const;  // T x d_in

    Modality modality() const { return modality_; }
    int input_dim() const { return input_dim_; }

private:
    Modality modality_ = Modality::Rgb;
    int input_dim_ = 0;
    Linear first_, second_;
};

Tensor to_tensor(const RawSegmentFeatures& f);

}  // namespace drft
