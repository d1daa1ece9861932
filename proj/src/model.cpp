#include "lgcm/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace lgcm {

Variant variant_from_string(const std::string& s) {
    if (s == "lgcm") return Variant::LGCM;
    if (s == "no_inter_attention") return Variant::NO_INTER_ATTENTION;
    if (s == "no_gate") return Variant::NO_GATE;
    if (s == "flat_transformer") return Variant::FLAT_TRANSFORMER;
    throw ConfigError("unknown model variant '" + s +
                      "' (expected lgcm, no_inter_attention, no_gate or flat_transformer)");
}

const char* variant_to_string(Variant v) {
    switch (v) {
        case Variant::LGCM: return "lgcm";
        case Variant::NO_INTER_ATTENTION: return "no_inter_attention";
        case Variant::NO_GATE: return "no_gate";
        case Variant::FLAT_TRANSFORMER: return "flat_transformer";
    }
    throw ConfigError("invalid variant tag");
}

void LGCMConfig::validate() const {
    if (d <= 0 || heads <= 0 || d % heads != 0)
        throw ConfigError("model: d=" + std::to_string(d) + " must be divisible by heads=" +
                          std::to_string(heads));
    if (vocab < kNumSpecials) throw ConfigError("model: vocabulary too small");
    if (n_local < 0 || n_global < 0 || n_dec <= 0)
        throw ConfigError("model: layer counts must be nonnegative (decoder positive)");
    if (n_max <= 0 || l_utt_max < 3) throw ConfigError("model: bad n_max / l_utt_max");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("model: dropout must be in [0, 1)");
}

LGCMConfig LGCMConfig::reference_scale(int vocab) {
    LGCMConfig c;
    c.d = 512;
    c.heads = 8;
    c.n_local = 3;
    c.n_global = 3;
    c.n_dec = 6;
    c.vocab = vocab;
    c.n_max = 7;
    return c;
}

Model Model::init(const LGCMConfig& cfg) {
    cfg.validate();
    Model m;
    m.cfg_ = cfg;
    std::mt19937_64 rng(cfg.seed);
    m.emb_ = EmbeddingTables::init(cfg.vocab, cfg.d, cfg.l_utt_max, cfg.n_max, rng);
    if (cfg.variant == Variant::FLAT_TRANSFORMER) {
        for (int i = 0; i < cfg.flat_layers(); ++i)
            m.local_.push_back(EncoderLayer::init(cfg.d, cfg.heads, rng));
    } else {
        for (int i = 0; i < cfg.n_local; ++i)
            m.local_.push_back(EncoderLayer::init(cfg.d, cfg.heads, rng));
        const bool ia = cfg.variant != Variant::NO_INTER_ATTENTION;
        const bool gate = cfg.variant != Variant::NO_GATE;
        for (int i = 0; i < cfg.n_global; ++i)
            m.global_.push_back(GlobalLayer::init(cfg.d, cfg.heads, cfg.n_max, ia, gate, rng));
    }
    for (int i = 0; i < cfg.n_dec; ++i) m.dec_.push_back(DecoderLayer::init(cfg.d, cfg.heads, rng));

    m.emb_.register_params(m.params_);
    const char* enc_prefix = cfg.variant == Variant::FLAT_TRANSFORMER ? "flat." : "local.";
    for (std::size_t i = 0; i < m.local_.size(); ++i)
        m.local_[i].register_params(enc_prefix + std::to_string(i), m.params_);
    for (std::size_t i = 0; i < m.global_.size(); ++i)
        m.global_[i].register_params("global." + std::to_string(i), m.params_);
    for (std::size_t i = 0; i < m.dec_.size(); ++i)
        m.dec_[i].register_params("dec." + std::to_string(i), m.params_);
    return m;
}

std::size_t Model::param_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.tensor.size();
    return n;
}

void Model::zero_grads() const {
    for (const auto& p : params_) {
        Tensor t = p.tensor;
        t.zero_grad();
    }
}

std::vector<UttState> Model::embed_context(const Batch& batch, std::size_t b) const {
    const std::size_t count = static_cast<std::size_t>(batch.ctx_counts[b]);
    if (count == 0) throw ContractError("encode: example has no context utterances");
    std::vector<UttState> states(count);
    for (std::size_t n = 0; n < count; ++n) {
        const std::size_t base = (b * batch.max_ctx + n) * batch.max_len;
        std::vector<int> ids(batch.ctx_ids.begin() + base,
                             batch.ctx_ids.begin() + base + batch.max_len);
        std::vector<int> pos(batch.ctx_token_pos.begin() + base,
                             batch.ctx_token_pos.begin() + base + batch.max_len);
        const Role role = static_cast<Role>(batch.ctx_roles[b * batch.max_ctx + n]);
        states[n].x = emb_.embed_utterance(ids, role, pos);
        if (cfg_.scale_embeddings)
            states[n].x = scale(states[n].x, std::sqrt(static_cast<double>(cfg_.d)));
        states[n].valid.assign(batch.ctx_valid.begin() + base,
                               batch.ctx_valid.begin() + base + batch.max_len);
        states[n].window_pos = batch.utt_pos[b * batch.max_ctx + n];
    }
    return states;
}

EncodedContext Model::encode(const Batch& batch, std::size_t b, GlobalTrace* trace,
                             std::mt19937_64* drop_rng) const {
    DropoutCtx drop{cfg_.dropout, drop_rng};
    std::vector<UttState> states = embed_context(batch, b);

    if (cfg_.variant == Variant::FLAT_TRANSFORMER) {
        // utterance positions at input, then one encoder over all tokens
        std::vector<Tensor> rows;
        std::vector<std::uint8_t> valid;
        for (auto& st : states) {
            rows.push_back(emb_.add_utterance_positions(st.x, st.window_pos));
            valid.insert(valid.end(), st.valid.begin(), st.valid.end());
        }
        Tensor x = concat_rows(rows);
        Tensor exclude = key_exclude_mask(valid);
        for (const auto& layer : local_) x = layer.forward(x, exclude, drop);
        EncodedContext enc;
        std::size_t off = 0;
        for (auto& st : states) {
            UttState out;
            out.x = slice_rows(x, off, st.valid.size());
            out.valid = st.valid;
            out.window_pos = st.window_pos;
            off += st.valid.size();
            enc.utterances.push_back(std::move(out));
        }
        enc.memory = x;
        enc.memory_valid = std::move(valid);
        return enc;
    }

    // local encoder: one shared parameter set applied per utterance
    for (auto& st : states) {
        Tensor exclude = key_exclude_mask(st.valid);
        for (const auto& layer : local_) st.x = layer.forward(st.x, exclude, drop);
    }
    // utterance positions enter once, before the first global layer
    for (auto& st : states) st.x = emb_.add_utterance_positions(st.x, st.window_pos);

    if (trace) trace->layers.assign(global_.size(), {});
    for (std::size_t l = 0; l < global_.size(); ++l)
        states = global_[l].forward(states, drop, trace ? &trace->layers[l] : nullptr);

    EncodedContext enc;
    std::vector<Tensor> rows;
    for (auto& st : states) {
        rows.push_back(st.x);
        enc.memory_valid.insert(enc.memory_valid.end(), st.valid.begin(), st.valid.end());
    }
    enc.memory = concat_rows(rows);
    enc.utterances = std::move(states);
    return enc;
}

Tensor Model::decode_logits(const std::vector<int>& resp_input,
                            const std::vector<std::uint8_t>& resp_valid, Role resp_role,
                            const EncodedContext& enc, std::mt19937_64* drop_rng) const {
    if (resp_input.empty()) throw ContractError("decode: empty response input");
    DropoutCtx drop{cfg_.dropout, drop_rng};
    std::vector<int> positions(resp_input.size());
    for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = static_cast<int>(i);
    Tensor x = emb_.embed_utterance(resp_input, resp_role, positions);
    if (cfg_.scale_embeddings) x = scale(x, std::sqrt(static_cast<double>(cfg_.d)));
    Tensor self_exclude = causal_exclude_mask(resp_input.size(), resp_valid);
    Tensor mem_exclude = key_exclude_mask(enc.memory_valid);
    for (const auto& layer : dec_)
        x = layer.forward(x, self_exclude, enc.memory, mem_exclude, drop);
    return emb_.output_logits(x);
}

Tensor masked_nll(const Tensor& logits, const std::vector<int>& targets,
                  const std::vector<std::uint8_t>& valid) {
    Tensor logp = gather_rows(log_softmax(logits), targets);
    Tensor mask = Tensor::zeros(logp.rows(), 1);
    for (std::size_t i = 0; i < valid.size(); ++i) mask.data()[i] = valid[i] ? 1.0 : 0.0;
    return scale(sum(hadamard(logp, mask)), -1.0);
}

std::pair<Tensor, std::size_t> Model::nll_sum(const Batch& batch,
                                              std::mt19937_64* drop_rng) const {
    Tensor total;
    std::size_t count = 0;
    for (std::size_t b = 0; b < batch.size; ++b) {
        EncodedContext enc = encode(batch, b, nullptr, drop_rng);
        std::vector<int> input(batch.resp_input.begin() + b * batch.resp_len,
                               batch.resp_input.begin() + (b + 1) * batch.resp_len);
        std::vector<std::uint8_t> valid(batch.resp_valid.begin() + b * batch.resp_len,
                                        batch.resp_valid.begin() + (b + 1) * batch.resp_len);
        std::vector<int> target(batch.resp_target.begin() + b * batch.resp_len,
                                batch.resp_target.begin() + (b + 1) * batch.resp_len);
        const Role role = static_cast<Role>(batch.resp_roles[b]);
        Tensor logits = decode_logits(input, valid, role, enc, drop_rng);
        Tensor nll = masked_nll(logits, target, valid);
        for (std::uint8_t v : valid)
            if (v) ++count;
        total = total.defined() ? add(total, nll) : nll;
    }
    return {total, count};
}

Tensor Model::loss(const Batch& batch, std::mt19937_64* drop_rng) const {
    auto [total, count] = nll_sum(batch, drop_rng);
    if (count == 0) throw ContractError("loss: batch has zero unpadded target tokens");
    return scale(total, 1.0 / static_cast<double>(count));
}

std::vector<int> Model::greedy_generate(const std::vector<Utterance>& context, Role resp_role,
                                        int max_new_tokens) const {
    if (context.empty()) throw ContractError("generate: empty context");
    if (max_new_tokens < 1) throw ConfigError("generate: max_new_tokens must be >= 1");
    TrainingExample ex;
    ex.context = context;
    ex.response = Utterance{resp_role, {kBosId, kEosId}}; // placeholder, not decoded
    Batch batch = collate({ex}, cfg_.l_utt_max);
    EncodedContext enc = encode(batch, 0);

    // full-prefix recomputation each step; prefix positions are bounded by
    // the token-position table
    const int cap = std::min(max_new_tokens, cfg_.l_utt_max - 1);
    std::vector<int> prefix = {kBosId};
    std::vector<int> out;
    for (int step = 0; step < cap; ++step) {
        std::vector<std::uint8_t> valid(prefix.size(), 1);
        Tensor logits = decode_logits(prefix, valid, resp_role, enc);
        const std::size_t last = logits.rows() - 1;
        int best = 0;
        double best_val = -std::numeric_limits<double>::infinity();
        for (int v = 0; v < cfg_.vocab; ++v) {
            const double val = logits.at(last, v);
            if (val > best_val) { // strict: ties keep the smallest id
                best_val = val;
                best = v;
            }
        }
        if (best == kEosId) break;
        out.push_back(best);
        prefix.push_back(best);
    }
    return out;
}

// ---- checkpoint format ----
//
// LGCMCKP1 | config text block | vocab | tensors | adam moments | counters
// All integers are little-endian u64/i64; tensor payloads are raw doubles.

namespace {

constexpr char kMagic[8] = {'L', 'G', 'C', 'M', 'C', 'K', 'P', '1'};

void write_u64(std::ostream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_i64(std::ostream& out, std::int64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_f64(std::ostream& out, double v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_str(std::ostream& out, const std::string& s) {
    write_u64(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void write_tensors(std::ostream& out, const std::vector<NamedParam>& tensors) {
    write_u64(out, tensors.size());
    for (const auto& p : tensors) {
        write_str(out, p.name);
        write_u64(out, p.tensor.rows());
        write_u64(out, p.tensor.cols());
        out.write(reinterpret_cast<const char*>(p.tensor.data().data()),
                  static_cast<std::streamsize>(p.tensor.size() * sizeof(double)));
    }
}

std::uint64_t read_u64(std::istream& in) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) throw DataError("checkpoint: truncated file");
    return v;
}

std::int64_t read_i64(std::istream& in) {
    std::int64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) throw DataError("checkpoint: truncated file");
    return v;
}

double read_f64(std::istream& in) {
    double v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) throw DataError("checkpoint: truncated file");
    return v;
}

std::string read_str(std::istream& in) {
    const std::uint64_t len = read_u64(in);
    if (len > (1ull << 32)) throw DataError("checkpoint: corrupt string length");
    std::string s(len, '\0');
    in.read(s.data(), static_cast<std::streamsize>(len));
    if (!in) throw DataError("checkpoint: truncated file");
    return s;
}

std::vector<NamedParam> read_tensors(std::istream& in) {
    const std::uint64_t count = read_u64(in);
    std::vector<NamedParam> out;
    out.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        NamedParam p;
        p.name = read_str(in);
        const std::uint64_t rows = read_u64(in);
        const std::uint64_t cols = read_u64(in);
        if (rows * cols > (1ull << 31)) throw DataError("checkpoint: corrupt tensor shape");
        p.tensor = Tensor::zeros(rows, cols);
        in.read(reinterpret_cast<char*>(p.tensor.data().data()),
                static_cast<std::streamsize>(rows * cols * sizeof(double)));
        if (!in) throw DataError("checkpoint: truncated tensor payload");
        out.push_back(std::move(p));
    }
    return out;
}

std::string config_to_text(const LGCMConfig& c) {
    std::ostringstream out;
    out << "d=" << c.d << "\nheads=" << c.heads << "\nn_local=" << c.n_local
        << "\nn_global=" << c.n_global << "\nn_dec=" << c.n_dec << "\nvocab=" << c.vocab
        << "\nn_max=" << c.n_max << "\nl_utt_max=" << c.l_utt_max
        << "\nvariant=" << variant_to_string(c.variant) << "\ndropout=" << c.dropout
        << "\nscale_embeddings=" << (c.scale_embeddings ? 1 : 0) << "\nseed=" << c.seed << "\n";
    return out.str();
}

LGCMConfig config_from_text(const std::string& text) {
    LGCMConfig c;
    std::istringstream in(text);
    std::string line;
    std::map<std::string, std::string> kv;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw DataError("checkpoint: bad config line '" + line + "'");
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    auto need = [&](const char* key) {
        auto it = kv.find(key);
        if (it == kv.end()) throw DataError(std::string("checkpoint: config missing ") + key);
        return it->second;
    };
    c.d = std::stoi(need("d"));
    c.heads = std::stoi(need("heads"));
    c.n_local = std::stoi(need("n_local"));
    c.n_global = std::stoi(need("n_global"));
    c.n_dec = std::stoi(need("n_dec"));
    c.vocab = std::stoi(need("vocab"));
    c.n_max = std::stoi(need("n_max"));
    c.l_utt_max = std::stoi(need("l_utt_max"));
    c.variant = variant_from_string(need("variant"));
    c.dropout = std::stod(need("dropout"));
    c.scale_embeddings = std::stoi(need("scale_embeddings")) != 0;
    c.seed = std::stoull(need("seed"));
    return c;
}

} // namespace

Checkpoint Checkpoint::from_model(const Model& model, const std::vector<std::string>& vocab) {
    Checkpoint ckpt;
    ckpt.config = model.config();
    ckpt.vocab_tokens = vocab;
    for (const auto& p : model.params()) {
        Tensor copy = Tensor::from(p.tensor.rows(), p.tensor.cols(), p.tensor.data());
        ckpt.tensors.push_back({p.name, copy});
    }
    return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint: " + path);
    out.write(kMagic, sizeof(kMagic));
    write_str(out, config_to_text(ckpt.config));
    write_u64(out, ckpt.vocab_tokens.size());
    for (const auto& t : ckpt.vocab_tokens) write_str(out, t);
    write_tensors(out, ckpt.tensors);
    write_tensors(out, ckpt.opt_first_moment);
    write_tensors(out, ckpt.opt_second_moment);
    write_i64(out, ckpt.opt_step);
    write_i64(out, ckpt.train_step);
    write_f64(out, ckpt.valid_score);
    if (!out) throw DataError("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw DataError("checkpoint: bad magic/version tag in " + path);
    Checkpoint ckpt;
    ckpt.config = config_from_text(read_str(in));
    const std::uint64_t vcount = read_u64(in);
    for (std::uint64_t i = 0; i < vcount; ++i) ckpt.vocab_tokens.push_back(read_str(in));
    ckpt.tensors = read_tensors(in);
    ckpt.opt_first_moment = read_tensors(in);
    ckpt.opt_second_moment = read_tensors(in);
    ckpt.opt_step = read_i64(in);
    ckpt.train_step = read_i64(in);
    ckpt.valid_score = read_f64(in);
    return ckpt;
}

Model model_from_checkpoint(const Checkpoint& ckpt) {
    Model m = Model::init(ckpt.config);
    std::map<std::string, Tensor> by_name;
    for (const auto& p : ckpt.tensors) by_name.emplace(p.name, p.tensor);
    if (by_name.size() != m.params().size())
        throw DataError("checkpoint: expected " + std::to_string(m.params().size()) +
                        " tensors, found " + std::to_string(by_name.size()));
    for (const auto& p : m.params()) {
        auto it = by_name.find(p.name);
        if (it == by_name.end()) throw DataError("checkpoint: missing tensor " + p.name);
        if (it->second.rows() != p.tensor.rows() || it->second.cols() != p.tensor.cols())
            throw DataError("checkpoint: tensor " + p.name + " has shape " +
                            it->second.shape_str() + ", expected " + p.tensor.shape_str());
        Tensor dst = p.tensor;
        dst.data() = it->second.data();
    }
    return m;
}

void check_config_compatible(const LGCMConfig& expected, const LGCMConfig& loaded) {
    auto fail = [](const std::string& what) {
        throw ConfigError("checkpoint does not match run config: " + what);
    };
    if (expected.d != loaded.d) fail("d " + std::to_string(loaded.d) + " vs " + std::to_string(expected.d));
    if (expected.heads != loaded.heads) fail("heads differ");
    if (expected.n_local != loaded.n_local) fail("n_local differs");
    if (expected.n_global != loaded.n_global) fail("n_global differs");
    if (expected.n_dec != loaded.n_dec) fail("n_dec differs");
    if (expected.vocab != loaded.vocab) fail("vocabulary size differs");
    if (expected.n_max != loaded.n_max) fail("n_max differs");
    if (expected.l_utt_max != loaded.l_utt_max) fail("l_utt_max differs");
    if (expected.variant != loaded.variant) fail("variant differs");
}

} // namespace lgcm
