#pragma once

#include <random>
#include <string>
#include <vector>

#include "lgcm/data.hpp"
#include "lgcm/tensor.hpp"

namespace lgcm {

struct NamedParam {
    std::string name;
    Tensor tensor;
};

/// Token, token-position, role and utterance-position tables. The token
/// table doubles as the output projection: logits are always hidden * E^T,
/// there is no separate output matrix.
struct EmbeddingTables {
    Tensor token;     // [V x d]
    Tensor token_pos; // [l_utt_max x d]
    Tensor role;      // [2 x d]
    Tensor utt_pos;   // [n_max x d]

    static EmbeddingTables init(int vocab, int d, int l_utt_max, int n_max,
                                std::mt19937_64& rng, double init_std = 0.02);

    /// Row i = E[id_i] + p[pos_i] + r[role].
    Tensor embed_utterance(const std::vector<int>& ids, Role role,
                           const std::vector<int>& positions) const;

    /// Adds the utterance-position row to every token row; applied once,
    /// before the first global layer.
    Tensor add_utterance_positions(const Tensor& x, int window_pos) const;

    /// hidden [L x d] -> logits [L x V] via the shared token table.
    Tensor output_logits(const Tensor& hidden) const;

    void register_params(std::vector<NamedParam>& out) const;
};

} // namespace lgcm
