#include "lgcm/flops.hpp"

#include <sstream>

namespace lgcm {

namespace {

double attn_flops(double L, double d) { return 6.0 * L * d * d + 4.0 * L * L * d; }
double ffn_flops(double L, double d) { return 16.0 * L * d * d; }
double gate_flops(double L, double d) { return 4.0 * L * d * d; }

} // namespace

FlopReport count_flops(const LGCMConfig& cfg, int L, int N) {
    if (L <= 0 || N <= 0) throw ConfigError("count_flops: L and N must be positive");
    FlopReport r;
    r.L = L;
    r.d = cfg.d;
    r.N = N;
    r.n_local = cfg.n_local;
    r.n_global = cfg.n_global;
    const double Ld = L, dd = cfg.d, Nd = N;
    r.per_layer.self_attention_full = attn_flops(Ld, dd);
    r.per_layer.self_attention_local = 6.0 * Ld * dd * dd + 4.0 * Ld * Ld * dd / Nd;
    r.per_layer.inter_attention = r.per_layer.self_attention_full;
    r.per_layer.ffn = ffn_flops(Ld, dd);
    r.per_layer.gate = gate_flops(Ld, dd);
    r.lgcm_encoder_total =
        cfg.n_local * (r.per_layer.self_attention_local + r.per_layer.ffn) +
        cfg.n_global * (r.per_layer.inter_attention + r.per_layer.gate);
    r.flat_encoder_total =
        cfg.flat_layers() * (r.per_layer.self_attention_full + r.per_layer.ffn);
    return r;
}

std::uint64_t local_attention_flops(const std::vector<int>& lengths, int d) {
    std::uint64_t total = 0;
    const std::uint64_t dd = static_cast<std::uint64_t>(d);
    for (int len : lengths) {
        const std::uint64_t l = static_cast<std::uint64_t>(len);
        total += 6 * l * dd * dd + 4 * l * l * dd;
    }
    return total;
}

std::uint64_t inter_attention_flops(const std::vector<int>& lengths, int d) {
    std::uint64_t total_len = 0;
    for (int len : lengths) total_len += static_cast<std::uint64_t>(len);
    const std::uint64_t dd = static_cast<std::uint64_t>(d);
    // projections are per token; scores/values pair every query token with
    // every key token across all utterances
    return 6 * total_len * dd * dd + 4 * total_len * total_len * dd;
}

FullFlopReport count_flops_full(const LGCMConfig& cfg, int L, int N) {
    const double Ld = L, dd = cfg.d, Nd = N;
    // per-element costs: softmax 4 per score, layer norm 8 per element,
    // residual/bias 1 per element, sigmoid 4, gate products 3
    const double out_proj = 2.0 * Ld * dd * dd;
    const double softmax_full = 4.0 * Ld * Ld;
    const double softmax_local = 4.0 * Ld * Ld / Nd;
    const double ln = 8.0 * Ld * dd;
    const double residual = Ld * dd;

    const double attn_full = attn_flops(Ld, dd) + out_proj + softmax_full + residual + ln;
    const double attn_local =
        6.0 * Ld * dd * dd + 4.0 * Ld * Ld * dd / Nd + out_proj + softmax_local + residual + ln;
    const double ffn = ffn_flops(Ld, dd) + Ld * 4.0 * dd + Ld * dd /* biases */ +
                       4.0 * Ld * dd /* relu */ + residual + ln;
    const double gate = gate_flops(Ld, dd) + Ld * dd /* bias */ + 4.0 * Ld * dd /* sigmoid */ +
                        3.0 * Ld * dd /* convex combination */ + ln;

    FullFlopReport r;
    r.lgcm_encoder_total = cfg.n_local * (attn_local + ffn) + cfg.n_global * (attn_full + gate);
    r.flat_encoder_total = cfg.flat_layers() * (attn_full + ffn);
    return r;
}

std::string flop_table(const FlopReport& r, const FullFlopReport* full) {
    std::ostringstream out;
    out << "FLOP accounting (matrix multiplies only, 1 MAC = 2 FLOPs)\n";
    out << "L=" << r.L << " d=" << r.d << " N=" << r.N << " layers: " << r.n_local << " local + "
        << r.n_global << " global vs " << (r.n_local + r.n_global) << " flat\n";
    out << "  self-attention (full length):  " << r.per_layer.self_attention_full << "\n";
    out << "  self-attention (per-utterance): " << r.per_layer.self_attention_local << "\n";
    out << "  inter-attention:                " << r.per_layer.inter_attention << "\n";
    out << "  feed-forward:                   " << r.per_layer.ffn << "\n";
    out << "  gate:                           " << r.per_layer.gate << "\n";
    out << "  hierarchical encoder total:     " << r.lgcm_encoder_total << "\n";
    out << "  flat encoder total:             " << r.flat_encoder_total << "\n";
    out << "  verdict: gate " << (r.per_layer.gate < r.per_layer.ffn ? "<" : ">=")
        << " ffn; hierarchical "
        << (r.lgcm_encoder_total < r.flat_encoder_total ? "<" : ">=") << " flat\n";
    if (full) {
        out << "full accounting (adds output projections and elementwise work):\n";
        out << "  hierarchical encoder total:     " << full->lgcm_encoder_total << "\n";
        out << "  flat encoder total:             " << full->flat_encoder_total << "\n";
    }
    return out.str();
}

std::string flop_csv(const FlopReport& r) {
    std::ostringstream out;
    out << "L,d,N,self_attention_full,self_attention_local,inter_attention,ffn,gate,"
           "lgcm_encoder_total,flat_encoder_total\n";
    out << r.L << ',' << r.d << ',' << r.N << ',' << r.per_layer.self_attention_full << ','
        << r.per_layer.self_attention_local << ',' << r.per_layer.inter_attention << ','
        << r.per_layer.ffn << ',' << r.per_layer.gate << ',' << r.lgcm_encoder_total << ','
        << r.flat_encoder_total << "\n";
    return out.str();
}

} // namespace lgcm
