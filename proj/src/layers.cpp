#include "lgcm/layers.hpp"

#include <cmath>

namespace lgcm {

LayerNormParams LayerNormParams::init(int d) {
    LayerNormParams p;
    p.gain = Tensor::full(1, d, 1.0, true);
    p.bias = Tensor::zeros(1, d, true);
    return p;
}

void LayerNormParams::register_params(const std::string& prefix,
                                      std::vector<NamedParam>& out) const {
    out.push_back({prefix + ".gain", gain});
    out.push_back({prefix + ".bias", bias});
}

FeedForward FeedForward::init(int d, std::mt19937_64& rng, double init_std) {
    FeedForward f;
    f.w1 = Tensor::randn(d, 4 * d, rng, init_std, true);
    f.b1 = Tensor::zeros(1, 4 * d, true);
    f.w2 = Tensor::randn(4 * d, d, rng, init_std, true);
    f.b2 = Tensor::zeros(1, d, true);
    return f;
}

Tensor FeedForward::forward(const Tensor& x) const {
    return add_row(matmul(relu(add_row(matmul(x, w1), b1)), w2), b2);
}

void FeedForward::register_params(const std::string& prefix, std::vector<NamedParam>& out) const {
    out.push_back({prefix + ".w1", w1});
    out.push_back({prefix + ".b1", b1});
    out.push_back({prefix + ".w2", w2});
    out.push_back({prefix + ".b2", b2});
}

Tensor key_exclude_mask(const std::vector<std::uint8_t>& key_valid) {
    Tensor m = Tensor::zeros(1, key_valid.size());
    for (std::size_t j = 0; j < key_valid.size(); ++j) m.data()[j] = key_valid[j] ? 0.0 : 1.0;
    return m;
}

Tensor causal_exclude_mask(std::size_t len, const std::vector<std::uint8_t>& key_valid) {
    Tensor m = Tensor::zeros(len, len);
    for (std::size_t i = 0; i < len; ++i)
        for (std::size_t j = 0; j < len; ++j)
            m.at(i, j) = (j > i || !key_valid[j]) ? 1.0 : 0.0;
    return m;
}

MultiHeadAttention MultiHeadAttention::init(int d, int heads, std::mt19937_64& rng,
                                            double init_std) {
    if (heads <= 0 || d % heads != 0)
        throw ConfigError("attention: width " + std::to_string(d) + " not divisible by " +
                          std::to_string(heads) + " heads");
    MultiHeadAttention a;
    a.heads = heads;
    a.wq = Tensor::randn(d, d, rng, init_std, true);
    a.wk = Tensor::randn(d, d, rng, init_std, true);
    a.wv = Tensor::randn(d, d, rng, init_std, true);
    a.wo = Tensor::randn(d, d, rng, init_std, true);
    return a;
}

Tensor MultiHeadAttention::forward(const Tensor& query, const Tensor& keys, const Tensor& values,
                                   const Tensor& exclude) const {
    const std::size_t d = wq.cols();
    const std::size_t dk = d / static_cast<std::size_t>(heads);
    const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dk));
    Tensor q = matmul(query, wq);
    Tensor k = matmul(keys, wk);
    Tensor v = matmul(values, wv);
    Tensor out;
    for (int h = 0; h < heads; ++h) {
        Tensor qh = slice_cols(q, h * dk, dk);
        Tensor kh = slice_cols(k, h * dk, dk);
        Tensor vh = slice_cols(v, h * dk, dk);
        Tensor scores = scale(matmul(qh, transpose(kh)), inv_scale);
        Tensor alpha = masked_softmax(scores, exclude);
        Tensor oh = matmul(alpha, vh);
        out = h == 0 ? oh : concat_cols(out, oh);
    }
    return matmul(out, wo);
}

void MultiHeadAttention::register_params(const std::string& prefix,
                                         std::vector<NamedParam>& out) const {
    out.push_back({prefix + ".wq", wq});
    out.push_back({prefix + ".wk", wk});
    out.push_back({prefix + ".wv", wv});
    out.push_back({prefix + ".wo", wo});
}

EncoderLayer EncoderLayer::init(int d, int heads, std::mt19937_64& rng) {
    EncoderLayer l;
    l.attn = MultiHeadAttention::init(d, heads, rng);
    l.ln_attn = LayerNormParams::init(d);
    l.ffn = FeedForward::init(d, rng);
    l.ln_ffn = LayerNormParams::init(d);
    return l;
}

Tensor EncoderLayer::forward(const Tensor& x, const Tensor& key_exclude,
                             const DropoutCtx& drop) const {
    Tensor a = ln_attn.apply(add(x, drop.apply(attn.forward(x, x, x, key_exclude))));
    return ln_ffn.apply(add(a, drop.apply(ffn.forward(a))));
}

void EncoderLayer::register_params(const std::string& prefix, std::vector<NamedParam>& out) const {
    attn.register_params(prefix + ".attn", out);
    ln_attn.register_params(prefix + ".ln_attn", out);
    ffn.register_params(prefix + ".ffn", out);
    ln_ffn.register_params(prefix + ".ln_ffn", out);
}

DecoderLayer DecoderLayer::init(int d, int heads, std::mt19937_64& rng) {
    DecoderLayer l;
    l.self_attn = MultiHeadAttention::init(d, heads, rng);
    l.ln_self = LayerNormParams::init(d);
    l.cross_attn = MultiHeadAttention::init(d, heads, rng);
    l.ln_cross = LayerNormParams::init(d);
    l.ffn = FeedForward::init(d, rng);
    l.ln_ffn = LayerNormParams::init(d);
    return l;
}

Tensor DecoderLayer::forward(const Tensor& x, const Tensor& self_exclude, const Tensor& memory,
                             const Tensor& memory_exclude, const DropoutCtx& drop) const {
    Tensor a = ln_self.apply(add(x, drop.apply(self_attn.forward(x, x, x, self_exclude))));
    Tensor b = ln_cross.apply(add(a, drop.apply(cross_attn.forward(a, memory, memory, memory_exclude))));
    return ln_ffn.apply(add(b, drop.apply(ffn.forward(b))));
}

void DecoderLayer::register_params(const std::string& prefix, std::vector<NamedParam>& out) const {
    self_attn.register_params(prefix + ".self_attn", out);
    ln_self.register_params(prefix + ".ln_self", out);
    cross_attn.register_params(prefix + ".cross_attn", out);
    ln_cross.register_params(prefix + ".ln_cross", out);
    ffn.register_params(prefix + ".ffn", out);
    ln_ffn.register_params(prefix + ".ln_ffn", out);
}

} // namespace lgcm
