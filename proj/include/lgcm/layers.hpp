#pragma once

#include <random>
#include <vector>

#include "lgcm/embeddings.hpp"
#include "lgcm/tensor.hpp"

namespace lgcm {

/// Training-time dropout context; a null rng disables dropout entirely.
struct DropoutCtx {
    double rate = 0.0;
    std::mt19937_64* rng = nullptr;

    Tensor apply(const Tensor& x) const {
        if (rate > 0.0 && rng) return lgcm::dropout(x, rate, *rng);
        return x;
    }
};

struct LayerNormParams {
    Tensor gain; // [1 x d]
    Tensor bias; // [1 x d]

    static LayerNormParams init(int d);
    Tensor apply(const Tensor& x) const { return layer_norm(x, gain, bias); }
    void register_params(const std::string& prefix, std::vector<NamedParam>& out) const;
};

/// Position-wise feed-forward, inner width 4d with ReLU.
struct FeedForward {
    Tensor w1, b1; // [d x 4d], [1 x 4d]
    Tensor w2, b2; // [4d x d], [1 x d]

    static FeedForward init(int d, std::mt19937_64& rng, double init_std = 0.02);
    Tensor forward(const Tensor& x) const;
    void register_params(const std::string& prefix, std::vector<NamedParam>& out) const;
};

// Exclusion masks for masked_softmax: nonzero = key is not attendable.
Tensor key_exclude_mask(const std::vector<std::uint8_t>& key_valid);
Tensor causal_exclude_mask(std::size_t len, const std::vector<std::uint8_t>& key_valid);

/// Standard multi-head attention (projections without biases, per-head
/// scaling 1/sqrt(d/h), concatenated heads followed by an output projection).
struct MultiHeadAttention {
    int heads = 1;
    Tensor wq, wk, wv, wo; // [d x d] each

    static MultiHeadAttention init(int d, int heads, std::mt19937_64& rng, double init_std = 0.02);
    /// exclude: empty, [1 x Lk] or [Lq x Lk] exclusion mask.
    Tensor forward(const Tensor& query, const Tensor& keys, const Tensor& values,
                   const Tensor& exclude) const;
    void register_params(const std::string& prefix, std::vector<NamedParam>& out) const;
};

/// Post-LN transformer encoder layer: x -> LN(x + MHA(x)) -> LN(. + FFN(.)).
struct EncoderLayer {
    MultiHeadAttention attn;
    LayerNormParams ln_attn;
    FeedForward ffn;
    LayerNormParams ln_ffn;

    static EncoderLayer init(int d, int heads, std::mt19937_64& rng);
    Tensor forward(const Tensor& x, const Tensor& key_exclude, const DropoutCtx& drop) const;
    void register_params(const std::string& prefix, std::vector<NamedParam>& out) const;
};

/// Post-LN decoder layer: causal self-attention, cross-attention over the
/// encoder memory, then the feed-forward sublayer.
struct DecoderLayer {
    MultiHeadAttention self_attn;
    LayerNormParams ln_self;
    MultiHeadAttention cross_attn;
    LayerNormParams ln_cross;
    FeedForward ffn;
    LayerNormParams ln_ffn;

    static DecoderLayer init(int d, int heads, std::mt19937_64& rng);
    Tensor forward(const Tensor& x, const Tensor& self_exclude, const Tensor& memory,
                   const Tensor& memory_exclude, const DropoutCtx& drop) const;
    void register_params(const std::string& prefix, std::vector<NamedParam>& out) const;
};

} // namespace lgcm
