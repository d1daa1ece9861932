#include "lgcm/global.hpp"

#include <cmath>

namespace lgcm {

InterAttention InterAttention::init(int d, int heads, int n_max, std::mt19937_64& rng,
                                    double init_std) {
    if (heads <= 0 || d % heads != 0)
        throw ConfigError("inter-attention: width " + std::to_string(d) +
                          " not divisible by " + std::to_string(heads) + " heads");
    InterAttention a;
    a.heads = heads;
    a.n_max = n_max;
    a.wq = Tensor::randn(d, d, rng, init_std, true);
    a.wk = Tensor::randn(d, d, rng, init_std, true);
    a.wv = Tensor::randn(d, d, rng, init_std, true);
    a.wo = Tensor::randn(d, d, rng, init_std, true);
    a.rpe = Tensor::randn(2 * n_max - 1, d / heads, rng, init_std, true);
    return a;
}

std::vector<Tensor> InterAttention::attend(const std::vector<UttState>& ctx,
                                           GlobalLayerTrace* trace) const {
    const std::size_t d = wq.cols();
    const std::size_t dk = d / static_cast<std::size_t>(heads);
    const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dk));
    const std::size_t T = ctx.size();

    std::vector<Tensor> q(T), k(T), v(T);
    std::vector<std::uint8_t> joint_valid;
    for (std::size_t s = 0; s < T; ++s) {
        q[s] = matmul(ctx[s].x, wq);
        k[s] = matmul(ctx[s].x, wk);
        v[s] = matmul(ctx[s].x, wv);
        joint_valid.insert(joint_valid.end(), ctx[s].valid.begin(), ctx[s].valid.end());
    }
    Tensor exclude = key_exclude_mask(joint_valid);

    if (trace) {
        trace->alpha.assign(T, {});
        trace->query_len.resize(T);
        trace->key_offset.resize(T);
        trace->key_len.resize(T);
        std::size_t off = 0;
        for (std::size_t s = 0; s < T; ++s) {
            trace->key_offset[s] = off;
            trace->key_len[s] = ctx[s].valid.size();
            off += ctx[s].valid.size();
        }
    }

    std::vector<Tensor> out(T);
    for (std::size_t t = 0; t < T; ++t) {
        const std::size_t lt = ctx[t].x.rows();
        Tensor heads_out;
        for (int h = 0; h < heads; ++h) {
            Tensor qh = slice_cols(q[t], h * dk, dk);
            // logits block per key utterance s: (Q K_s^T + Q a_{s-t}^T) / sqrt(dk)
            Tensor scores;
            for (std::size_t s = 0; s < T; ++s) {
                Tensor kh = slice_cols(k[s], h * dk, dk);
                Tensor block = matmul(qh, transpose(kh));
                const int offset = ctx[s].window_pos - ctx[t].window_pos;
                const int row = offset + n_max - 1;
                if (row < 0 || row >= 2 * n_max - 1)
                    throw IndexError("inter-attention: utterance offset " +
                                     std::to_string(offset) + " outside the position table");
                Tensor bias = matmul(qh, transpose(slice_rows(rpe, row, 1)));
                block = add_col(block, bias);
                scores = s == 0 ? block : concat_cols(scores, block);
            }
            Tensor alpha = masked_softmax(scale(scores, inv_scale), exclude);
            if (trace) {
                auto& acc = trace->alpha[t];
                if (acc.empty()) acc.assign(alpha.size(), 0.0);
                for (std::size_t i = 0; i < alpha.size(); ++i)
                    acc[i] += alpha.data()[i] / static_cast<double>(heads);
                trace->query_len[t] = lt;
            }
            Tensor vh;
            for (std::size_t s = 0; s < T; ++s) {
                Tensor part = slice_cols(v[s], h * dk, dk);
                vh = s == 0 ? part : concat_rows({vh, part});
            }
            Tensor oh = matmul(alpha, vh);
            heads_out = h == 0 ? oh : concat_cols(heads_out, oh);
        }
        out[t] = matmul(heads_out, wo);
    }
    return out;
}

std::vector<Tensor> InterAttention::attend_within(const std::vector<UttState>& ctx,
                                                  GlobalLayerTrace* trace) const {
    const std::size_t d = wq.cols();
    const std::size_t dk = d / static_cast<std::size_t>(heads);
    const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dk));
    const std::size_t T = ctx.size();

    std::size_t key_total = 0;
    if (trace) {
        // keep the joint key layout so downstream aggregation is uniform;
        // never-attended segments stay at exactly zero weight
        trace->alpha.assign(T, {});
        trace->query_len.resize(T);
        trace->key_offset.resize(T);
        trace->key_len.resize(T);
        for (std::size_t s = 0; s < T; ++s) {
            trace->key_offset[s] = key_total;
            trace->key_len[s] = ctx[s].valid.size();
            key_total += ctx[s].valid.size();
        }
    }

    std::vector<Tensor> out(T);
    for (std::size_t t = 0; t < T; ++t) {
        Tensor q = matmul(ctx[t].x, wq);
        Tensor k = matmul(ctx[t].x, wk);
        Tensor v = matmul(ctx[t].x, wv);
        Tensor exclude = key_exclude_mask(ctx[t].valid);
        const std::size_t lt = ctx[t].x.rows();
        Tensor heads_out;
        for (int h = 0; h < heads; ++h) {
            Tensor qh = slice_cols(q, h * dk, dk);
            Tensor kh = slice_cols(k, h * dk, dk);
            Tensor vh = slice_cols(v, h * dk, dk);
            Tensor alpha = masked_softmax(scale(matmul(qh, transpose(kh)), inv_scale), exclude);
            if (trace) {
                auto& acc = trace->alpha[t];
                if (acc.empty()) acc.assign(lt * key_total, 0.0);
                const std::size_t base = trace->key_offset[t];
                for (std::size_t i = 0; i < lt; ++i)
                    for (std::size_t j = 0; j < ctx[t].valid.size(); ++j)
                        acc[i * key_total + base + j] +=
                            alpha.at(i, j) / static_cast<double>(heads);
                trace->query_len[t] = lt;
            }
            Tensor oh = matmul(alpha, vh);
            heads_out = h == 0 ? oh : concat_cols(heads_out, oh);
        }
        out[t] = matmul(heads_out, wo);
    }
    return out;
}

void InterAttention::register_params(const std::string& prefix,
                                     std::vector<NamedParam>& out) const {
    out.push_back({prefix + ".wq", wq});
    out.push_back({prefix + ".wk", wk});
    out.push_back({prefix + ".wv", wv});
    out.push_back({prefix + ".wo", wo});
    out.push_back({prefix + ".rpe", rpe});
}

GateFuse GateFuse::init(int d, std::mt19937_64& rng, double init_std) {
    GateFuse g;
    g.w = Tensor::randn(2 * d, d, rng, init_std, true);
    g.b = Tensor::zeros(1, d, true);
    return g;
}

Tensor GateFuse::fuse(const Tensor& local, const Tensor& global,
                      std::vector<double>* h_out) const {
    Tensor h = sigmoid(add_row(matmul(concat_cols(local, global), w), b));
    if (h_out) *h_out = h.data();
    return add(hadamard(affine(h, -1.0, 1.0), global), hadamard(h, local));
}

void GateFuse::register_params(const std::string& prefix, std::vector<NamedParam>& out) const {
    out.push_back({prefix + ".w", w});
    out.push_back({prefix + ".b", b});
}

GlobalLayer GlobalLayer::init(int d, int heads, int n_max, bool inter_attention, bool with_gate,
                              std::mt19937_64& rng) {
    GlobalLayer l;
    l.use_inter_attention = inter_attention;
    l.use_gate = with_gate;
    l.attn = InterAttention::init(d, heads, n_max, rng);
    if (!inter_attention) l.attn.rpe = Tensor(); // ablation keeps no offset table
    l.ln_attn = LayerNormParams::init(d);
    if (with_gate) {
        l.gate = GateFuse::init(d, rng);
    } else {
        l.ffn = FeedForward::init(d, rng);
    }
    l.ln_out = LayerNormParams::init(d);
    return l;
}

std::vector<UttState> GlobalLayer::forward(const std::vector<UttState>& ctx,
                                           const DropoutCtx& drop,
                                           GlobalLayerTrace* trace) const {
    std::vector<Tensor> attended = use_inter_attention ? attn.attend(ctx, trace)
                                                       : attn.attend_within(ctx, trace);
    if (trace && use_gate) trace->gate.resize(ctx.size());
    std::vector<UttState> out(ctx.size());
    for (std::size_t t = 0; t < ctx.size(); ++t) {
        // attention sublayer: residual + LayerNorm
        Tensor global = ln_attn.apply(add(ctx[t].x, drop.apply(attended[t])));
        Tensor fused;
        if (use_gate) {
            fused = gate.fuse(ctx[t].x, global, trace ? &trace->gate[t] : nullptr);
        } else {
            fused = add(global, drop.apply(ffn.forward(global)));
        }
        out[t].x = ln_out.apply(fused);
        out[t].valid = ctx[t].valid;
        out[t].window_pos = ctx[t].window_pos;
    }
    return out;
}

void GlobalLayer::register_params(const std::string& prefix, std::vector<NamedParam>& out) const {
    out.push_back({prefix + ".attn.wq", attn.wq});
    out.push_back({prefix + ".attn.wk", attn.wk});
    out.push_back({prefix + ".attn.wv", attn.wv});
    out.push_back({prefix + ".attn.wo", attn.wo});
    if (use_inter_attention) out.push_back({prefix + ".attn.rpe", attn.rpe});
    ln_attn.register_params(prefix + ".ln_attn", out);
    if (use_gate) {
        gate.register_params(prefix + ".gate", out);
    } else {
        ffn.register_params(prefix + ".ffn", out);
    }
    ln_out.register_params(prefix + ".ln_out", out);
}

} // namespace lgcm
