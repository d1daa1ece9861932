#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lgcm/model.hpp"

namespace lgcm {

/// Per-layer matrix-multiply FLOP counts over an input of L tokens split
/// into N equal utterances, hidden width d. One multiply-accumulate counts
/// as 2 FLOPs. This accounting covers the Q/K/V projections and the
/// score/value products only: attention output projections, softmax,
/// layer norms and bias adds are excluded. The offset-bias addition in
/// inter-attention is treated as free, so inter-attention costs the same
/// as full-length self-attention.
struct FlopCounts {
    double self_attention_full = 0;  // 6 L d^2 + 4 L^2 d
    double self_attention_local = 0; // 6 L d^2 + 4 L^2 d / N
    double inter_attention = 0;      // == self_attention_full
    double ffn = 0;                  // 16 L d^2
    double gate = 0;                 // 4 L d^2
};

struct FlopReport {
    int L = 0;
    int d = 0;
    int N = 0;
    int n_local = 0;
    int n_global = 0;
    FlopCounts per_layer;
    double lgcm_encoder_total = 0; // n_local*(local attn + ffn) + n_global*(inter + gate)
    double flat_encoder_total = 0; // (n_local + n_global) * (full attn + ffn)
};

FlopReport count_flops(const LGCMConfig& cfg, int L, int N);

// Exact summation over unequal utterance lengths, same conventions.
std::uint64_t local_attention_flops(const std::vector<int>& lengths, int d);
std::uint64_t inter_attention_flops(const std::vector<int>& lengths, int d);

/// Full matrix-multiply accounting: adds the attention output projection
/// and counts elementwise work (softmax, layer norm, biases, residuals,
/// gate sigmoid/products) at fixed per-element costs. Reported separately
/// and never mixed into the headline numbers above.
struct FullFlopReport {
    double lgcm_encoder_total = 0;
    double flat_encoder_total = 0;
};

FullFlopReport count_flops_full(const LGCMConfig& cfg, int L, int N);

std::string flop_table(const FlopReport& report, const FullFlopReport* full = nullptr);
std::string flop_csv(const FlopReport& report);

} // namespace lgcm
