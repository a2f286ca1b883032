#include "drft/lgi.hpp"

#include <cmath>

#include "drft/errors.hpp"

namespace drft {

LgiModule::LgiModule(ParamStore& store, const std::string& prefix, int feature_dim,
                     int num_steps, Rng& rng)
    : feature_dim_(feature_dim), num_steps_(num_steps) {
    if (num_steps < 1) {
        throw ContractError("sequential query attention needs at least one step, got " +
                            std::to_string(num_steps));
    }
    guide_proj_ = Linear(store, prefix + ".sqa.guide", 2 * feature_dim, feature_dim, rng);
    key_proj_ = Linear(store, prefix + ".sqa.key", feature_dim, feature_dim, rng);
    modulation_ = Linear(store, prefix + ".local.gate", feature_dim, feature_dim, rng,
                         /*bias_fill=*/1.0);
    attn_q_ = Linear(store, prefix + ".global.q", feature_dim, feature_dim, rng);
    attn_k_ = Linear(store, prefix + ".global.k", feature_dim, feature_dim, rng);
    attn_v_ = Linear(store, prefix + ".global.v", feature_dim, feature_dim, rng);
    attn_norm_ = LayerNorm(store, prefix + ".global.norm", feature_dim);
}

PhraseDecomposition LgiModule::sequential_query_attention(const EncodedQuery& query) const {
    const int c = feature_dim_;
    Tensor keys = tanh(key_proj_(query.word_features));  // N x c
    const double inv_sqrt_c = 1.0 / std::sqrt(static_cast<double>(c));

    Tensor prev_phrase = Tensor::zeros(1, c);
    std::vector<Tensor> phrase_rows, attention_rows;
    phrase_rows.reserve(num_steps_);
    attention_rows.reserve(num_steps_);
    for (int s = 0; s < num_steps_; ++s) {
        Tensor guide = tanh(guide_proj_(concat_cols({query.sentence_feature, prev_phrase})));
        Tensor logits = scale(matmul_nt(guide, keys), inv_sqrt_c);  // 1 x N
        Tensor alpha = softmax_rows(logits);
        Tensor phrase = matmul(alpha, query.word_features);  // 1 x c
        phrase_rows.push_back(phrase);
        attention_rows.push_back(alpha);
        prev_phrase = phrase;
    }
    return {concat_rows(phrase_rows), concat_rows(attention_rows)};
}

Tensor LgiModule::local_global_interaction(const Tensor& segments,
                                           const PhraseDecomposition& phrases) const {
    if (segments.cols() != feature_dim_) {
        throw ShapeError("local_global_interaction: segment dim " +
                         std::to_string(segments.cols()) + " != " +
                         std::to_string(feature_dim_));
    }
    if (phrases.phrases.cols() != feature_dim_) {
        throw ShapeError("local_global_interaction: phrase dim " +
                         std::to_string(phrases.phrases.cols()) + " != " +
                         std::to_string(feature_dim_));
    }
    const int num_phrases = phrases.phrases.rows();
    const double inv_sqrt_c = 1.0 / std::sqrt(static_cast<double>(feature_dim_));

    std::vector<Tensor> per_phrase;
    per_phrase.reserve(num_phrases);
    for (int s = 0; s < num_phrases; ++s) {
        Tensor phrase = slice_rows(phrases.phrases, s, s + 1);
        // Local: channel-wise modulation of every segment by the phrase.
        Tensor gate = modulation_(phrase);  // 1 x c
        Tensor modulated = mul(segments, gate);
        // Global: one temporal self-attention pass with residual + norm.
        Tensor q = attn_q_(modulated);
        Tensor k = attn_k_(modulated);
        Tensor v = attn_v_(modulated);
        Tensor attn = softmax_rows(scale(matmul_nt(q, k), inv_sqrt_c));
        Tensor context = matmul(attn, v);
        per_phrase.push_back(attn_norm_(add(modulated, context)));
    }
    if (num_phrases == 1) return per_phrase[0];

    Tensor acc = per_phrase[0];
    for (int s = 1; s < num_phrases; ++s) acc = add(acc, per_phrase[s]);
    return scale(acc, 1.0 / num_phrases);
}

Tensor LgiModule::forward(const Tensor& segments, const EncodedQuery& query) const {
    return local_global_interaction(segments, sequential_query_attention(query));
}

}  // namespace drft
