#include "drft/encoders.hpp"

#include "drft/errors.hpp"

namespace drft {

Tensor to_tensor(const RawSegmentFeatures& f) {
    std::vector<double> data(f.values.begin(), f.values.end());
    return Tensor::from(f.segments, f.dim, std::move(data));
}

TextEncoder::TextEncoder(ParamStore& store, const std::string& prefix, int vocab_size,
                         int feature_dim, Rng& rng)
    : vocab_size_(vocab_size), feature_dim_(feature_dim), hidden_(feature_dim / 2) {
    if (feature_dim % 2 != 0) {
        throw ConfigError("text feature dimension must be even, got " +
                          std::to_string(feature_dim));
    }
    embeddings_ = store.create(prefix + ".embeddings", vocab_size, feature_dim, rng);
    fwd_input_ = Linear(store, prefix + ".fwd.input", feature_dim, 4 * hidden_, rng);
    fwd_hidden_ = Linear(store, prefix + ".fwd.hidden", hidden_, 4 * hidden_, rng);
    bwd_input_ = Linear(store, prefix + ".bwd.input", feature_dim, 4 * hidden_, rng);
    bwd_hidden_ = Linear(store, prefix + ".bwd.hidden", hidden_, 4 * hidden_, rng);
}

// Returns the N x hidden matrix of per-word hidden states for one direction.
Tensor TextEncoder::run_direction(const Tensor& embedded, const Linear& input_proj,
                                  const Linear& hidden_proj, bool reverse) const {
    const int n = embedded.rows();
    const int h = hidden_;
    Tensor hidden = Tensor::zeros(1, h);
    Tensor cell = Tensor::zeros(1, h);
    std::vector<Tensor> states(n);
    for (int step = 0; step < n; ++step) {
        const int t = reverse ? n - 1 - step : step;
        Tensor x = slice_rows(embedded, t, t + 1);
        Tensor gates = add(input_proj(x), hidden_proj(hidden));
        Tensor in_gate = sigmoid(slice_cols(gates, 0, h));
        Tensor forget_gate = sigmoid(slice_cols(gates, h, 2 * h));
        Tensor out_gate = sigmoid(slice_cols(gates, 2 * h, 3 * h));
        Tensor candidate = tanh(slice_cols(gates, 3 * h, 4 * h));
        cell = add(mul(forget_gate, cell), mul(in_gate, candidate));
        hidden = mul(out_gate, tanh(cell));
        states[t] = hidden;
    }
    return concat_rows(states);
}

EncodedQuery TextEncoder::encode(const QueryTokens& query) const {
    const int n = static_cast<int>(query.token_ids.size());
    if (n < 1) throw ContractError("encode_text: empty token sequence");
    for (int id : query.token_ids) {
        if (id < 0 || id >= vocab_size_) {
            throw VocabularyError("token id " + std::to_string(id) +
                                  " outside vocabulary of size " + std::to_string(vocab_size_));
        }
    }

    // Embedding lookup as one-hot matmul keeps the lookup differentiable
    // w.r.t. the embedding table without a dedicated gather op.
    std::vector<double> one_hot(static_cast<size_t>(n) * vocab_size_, 0.0);
    for (int i = 0; i < n; ++i) {
        one_hot[static_cast<size_t>(i) * vocab_size_ + query.token_ids[i]] = 1.0;
    }
    Tensor embedded = matmul(Tensor::from(n, vocab_size_, std::move(one_hot)), embeddings_);

    Tensor fwd = run_direction(embedded, fwd_input_, fwd_hidden_, /*reverse=*/false);
    Tensor bwd = run_direction(embedded, bwd_input_, bwd_hidden_, /*reverse=*/true);

    EncodedQuery out;
    out.word_features = concat_cols({fwd, bwd});
    out.sentence_feature = concat_cols({slice_rows(fwd, n - 1, n), slice_rows(bwd, 0, 1)});
    return out;
}

ModalityEncoder::ModalityEncoder(ParamStore& store, const std::string& prefix,
                                 Modality modality, int input_dim, int feature_dim, Rng& rng)
    : modality_(modality), input_dim_(input_dim) {
    first_ = Linear(store, prefix + ".first", input_dim, feature_dim, rng);
    second_ = Linear(store, prefix + ".second", feature_dim, feature_dim, rng);
}

Tensor ModalityEncoder::encode(const Tensor& x) const {
    if (x.cols() != input_dim_) {
        throw ShapeError(std::string("encode_modality(") + modality_name(modality_) +
                         "): input dim " + std::to_string(x.cols()) + " != configured " +
                         std::to_string(input_dim_));
    }
    return second_(relu(first_(x)));
}

Tensor ModalityEncoder::encode(const RawSegmentFeatures& x) const {
    if (x.modality != modality_) {
        throw ContractError(std::string("encode_modality: features are ") +
                            modality_name(x.modality) + " but encoder is " +
                            modality_name(modality_));
    }
    return encode(to_tensor(x));
}

}  // namespace drft
