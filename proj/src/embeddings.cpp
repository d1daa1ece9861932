#include "lgcm/embeddings.hpp"

namespace lgcm {

EmbeddingTables EmbeddingTables::init(int vocab, int d, int l_utt_max, int n_max,
                                      std::mt19937_64& rng, double init_std) {
    EmbeddingTables t;
    t.token = Tensor::randn(vocab, d, rng, init_std, true);
    t.token_pos = Tensor::randn(l_utt_max, d, rng, init_std, true);
    t.role = Tensor::randn(2, d, rng, init_std, true);
    t.utt_pos = Tensor::randn(n_max, d, rng, init_std, true);
    return t;
}

Tensor EmbeddingTables::embed_utterance(const std::vector<int>& ids, Role speaker,
                                        const std::vector<int>& positions) const {
    if (ids.size() != positions.size())
        throw ShapeError("embed_utterance: " + std::to_string(ids.size()) + " ids vs " +
                         std::to_string(positions.size()) + " positions");
    Tensor tok = embedding_lookup(token, ids);
    Tensor pos = embedding_lookup(token_pos, positions);
    Tensor rol = embedding_lookup(role, {static_cast<int>(speaker)});
    return add_row(add(tok, pos), rol);
}

Tensor EmbeddingTables::add_utterance_positions(const Tensor& x, int window_pos) const {
    return add_row(x, embedding_lookup(utt_pos, {window_pos}));
}

Tensor EmbeddingTables::output_logits(const Tensor& hidden) const {
    return matmul(hidden, transpose(token));
}

void EmbeddingTables::register_params(std::vector<NamedParam>& out) const {
    out.push_back({"embed.token", token});
    out.push_back({"embed.token_pos", token_pos});
    out.push_back({"embed.role", role});
    out.push_back({"embed.utt_pos", utt_pos});
}

} // namespace lgcm
