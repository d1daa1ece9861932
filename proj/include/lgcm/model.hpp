#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lgcm/data.hpp"
#include "lgcm/global.hpp"
#include "lgcm/layers.hpp"

namespace lgcm {

enum class Variant {
    LGCM,               // inter-attention + gate
    NO_INTER_ATTENTION, // per-utterance self-attention in the global stack
    NO_GATE,            // FFN sublayer instead of the gate
    FLAT_TRANSFORMER,   // single encoder over the concatenated context
};

Variant variant_from_string(const std::string& s);
const char* variant_to_string(Variant v);

struct LGCMConfig {
    int d = 64;
    int heads = 4;
    int n_local = 2;
    int n_global = 2;
    int n_dec = 2;
    int vocab = 0;
    int n_max = 7;
    int l_utt_max = 32;
    Variant variant = Variant::LGCM;
    double dropout = 0.0;
    bool scale_embeddings = false; // multiply embeddings by sqrt(d); off by default
    std::uint64_t seed = 0;

    void validate() const;
    /// Encoder depth of the flat baseline: matches the hierarchical stack.
    int flat_layers() const { return n_local + n_global; }
    /// Reference configuration at full scale (d=512, h=8, 3/3/6).
    static LGCMConfig reference_scale(int vocab);
};

/// Final encoder state for one example: fused per-utterance encodings plus
/// the flattened memory the decoder cross-attends to.
struct EncodedContext {
    std::vector<UttState> utterances;
    Tensor memory; // [K_total x d]
    std::vector<std::uint8_t> memory_valid;
};

class Model {
public:
    static Model init(const LGCMConfig& cfg);

    const LGCMConfig& config() const { return cfg_; }
    const EmbeddingTables& embeddings() const { return emb_; }
    EmbeddingTables& embeddings() { return emb_; }
    const std::vector<GlobalLayer>& global_layers() const { return global_; }
    std::vector<GlobalLayer>& global_layers() { return global_; }
    const std::vector<EncoderLayer>& local_layers() const { return local_; }
    const std::vector<DecoderLayer>& decoder_layers() const { return dec_; }

    const std::vector<NamedParam>& params() const { return params_; }
    std::size_t param_count() const;
    void zero_grads() const;

    /// Encodes the b-th example of a batch through the local and global
    /// stacks (or the flat encoder for that variant).
    EncodedContext encode(const Batch& batch, std::size_t b, GlobalTrace* trace = nullptr,
                          std::mt19937_64* drop_rng = nullptr) const;

    /// Teacher-forced decoder logits [resp_len x V] for one example.
    Tensor decode_logits(const std::vector<int>& resp_input,
                         const std::vector<std::uint8_t>& resp_valid, Role resp_role,
                         const EncodedContext& enc, std::mt19937_64* drop_rng = nullptr) const;

    /// Sum of -log p(target) over unpadded targets, plus the token count.
    std::pair<Tensor, std::size_t> nll_sum(const Batch& batch,
                                           std::mt19937_64* drop_rng = nullptr) const;

    /// Mean NLL over all unpadded response target tokens of the batch.
    Tensor loss(const Batch& batch, std::mt19937_64* drop_rng = nullptr) const;

    /// Greedy decoding from [bos]; stops at [eos] or max_new_tokens. Ties
    /// break toward the smallest token id. Returns content ids only.
    std::vector<int> greedy_generate(const std::vector<Utterance>& context, Role resp_role,
                                     int max_new_tokens) const;

private:
    LGCMConfig cfg_;
    EmbeddingTables emb_;
    std::vector<EncoderLayer> local_; // parameter-shared per utterance; the
                                      // whole flat stack for FLAT_TRANSFORMER
    std::vector<GlobalLayer> global_; // empty for FLAT_TRANSFORMER
    std::vector<DecoderLayer> dec_;
    std::vector<NamedParam> params_;

    std::vector<UttState> embed_context(const Batch& batch, std::size_t b) const;
};

// ---- checkpointing ----

struct Checkpoint {
    LGCMConfig config;
    std::vector<std::string> vocab_tokens; // embedded so generation is self-contained
    std::vector<NamedParam> tensors;
    std::vector<NamedParam> opt_first_moment;
    std::vector<NamedParam> opt_second_moment;
    std::int64_t opt_step = 0;
    std::int64_t train_step = 0;
    double valid_score = 0.0;

    static Checkpoint from_model(const Model& model, const std::vector<std::string>& vocab);
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

/// Rebuilds a model and copies parameters bit-exactly.
Model model_from_checkpoint(const Checkpoint& ckpt);

/// Raises ConfigError when a run configuration disagrees with the
/// architecture recorded in the checkpoint.
void check_config_compatible(const LGCMConfig& expected, const LGCMConfig& loaded);

/// Sum of -log softmax(logits)[target] over positions where valid is set.
Tensor masked_nll(const Tensor& logits, const std::vector<int>& targets,
                  const std::vector<std::uint8_t>& valid);

} // namespace lgcm
