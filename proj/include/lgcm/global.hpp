#pragma once

#include <optional>
#include <random>
#include <vector>

#include "lgcm/layers.hpp"

namespace lgcm {

/// One context utterance as seen by the global encoder.
struct UttState {
    Tensor x;                        // [L x d] current representation
    std::vector<std::uint8_t> valid; // per-token, true = real
    int window_pos = 0;              // oldest-first position in the window
};

/// Per-layer inspection record written during a traced forward pass.
/// Weights are head-averaged; nothing here feeds back into the computation.
struct GlobalLayerTrace {
    // alpha[t] is [L_t x K_total] row-major over the joint key axis
    std::vector<std::vector<double>> alpha;
    std::vector<std::size_t> query_len;
    std::vector<std::size_t> key_offset; // start of each key segment s
    std::vector<std::size_t> key_len;
    // gate activations H per utterance, [L_t x d] row-major (empty when the
    // layer has no gate)
    std::vector<std::vector<double>> gate;
};

struct GlobalTrace {
    std::vector<GlobalLayerTrace> layers;
};

/// Attention across utterances: every token of utterance t attends jointly
/// over all tokens of all context utterances, with a learned bias added to
/// the keys of utterance s indexed by the offset s - t. The offset table
/// covers every offset realizable under n_max, so no clipping is applied.
struct InterAttention {
    int heads = 1;
    int n_max = 1;
    Tensor wq, wk, wv, wo; // [d x d]
    Tensor rpe;            // [2*n_max - 1 x d/heads], shared across heads

    static InterAttention init(int d, int heads, int n_max, std::mt19937_64& rng,
                               double init_std = 0.02);

    /// Pre-residual attention output per utterance.
    std::vector<Tensor> attend(const std::vector<UttState>& ctx, GlobalLayerTrace* trace) const;

    /// Ablation path: per-utterance self-attention, no offset bias, no
    /// cross-utterance keys. Same projection shapes as attend().
    std::vector<Tensor> attend_within(const std::vector<UttState>& ctx,
                                      GlobalLayerTrace* trace) const;

    void register_params(const std::string& prefix, std::vector<NamedParam>& out) const;
};

/// Sigmoid-gated convex combination of the local and global operands:
/// H = sigmoid([local; global] W + b), out = (1 - H) (.) global + H (.) local.
struct GateFuse {
    Tensor w; // [2d x d]
    Tensor b; // [1 x d]

    static GateFuse init(int d, std::mt19937_64& rng, double init_std = 0.02);
    Tensor fuse(const Tensor& local, const Tensor& global, std::vector<double>* h_out) const;
    void register_params(const std::string& prefix, std::vector<NamedParam>& out) const;
};

/// One global-encoder layer. The attention sublayer is inter-attention (or
/// per-utterance self-attention for the ablation); the fusion sublayer is
/// the gate (or a standard FFN for the ablation). Both sublayers are
/// followed by LayerNorm; the gate carries its input through the convex
/// combination, so only the attention sublayer has an explicit residual.
struct GlobalLayer {
    bool use_inter_attention = true;
    bool use_gate = true;

    InterAttention attn;
    LayerNormParams ln_attn;
    GateFuse gate;   // when use_gate
    FeedForward ffn; // when !use_gate
    LayerNormParams ln_out;

    static GlobalLayer init(int d, int heads, int n_max, bool inter_attention, bool with_gate,
                            std::mt19937_64& rng);
    std::vector<UttState> forward(const std::vector<UttState>& ctx, const DropoutCtx& drop,
                                  GlobalLayerTrace* trace) const;
    void register_params(const std::string& prefix, std::vector<NamedParam>& out) const;
};

} // namespace lgcm
