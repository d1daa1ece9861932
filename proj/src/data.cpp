#include "lgcm/data.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include <json.hpp>

namespace lgcm {

Role role_from_string(const std::string& s) {
    if (s == "A") return Role::A;
    if (s == "B") return Role::B;
    throw DataError("unknown speaker tag '" + s + "' (expected \"A\" or \"B\")");
}

const char* role_to_string(Role r) { return r == Role::A ? "A" : "B"; }

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    };
    for (char raw : text) {
        const unsigned char ch = static_cast<unsigned char>(raw);
        if (std::isspace(ch)) {
            flush();
        } else if (ch < 0x80 && std::ispunct(ch)) {
            flush();
            out.emplace_back(1, static_cast<char>(ch));
        } else {
            cur.push_back(static_cast<char>(std::tolower(ch)));
        }
    }
    flush();
    return out;
}

std::string detokenize(const std::vector<std::string>& tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out.push_back(' ');
        out += tokens[i];
    }
    return out;
}

std::vector<RawDialog> load_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open corpus file: " + path);
    std::vector<RawDialog> dialogs;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw DataError(path + ":" + std::to_string(lineno) + ": malformed record: " + e.what());
        }
        if (!rec.is_object() || !rec.contains("dialog") || !rec["dialog"].is_array()) {
            throw DataError(path + ":" + std::to_string(lineno) + ": record has no \"dialog\" array");
        }
        RawDialog d;
        for (const auto& turn : rec["dialog"]) {
            if (!turn.is_object() || !turn.contains("speaker") || !turn.contains("text")) {
                throw DataError(path + ":" + std::to_string(lineno) +
                                ": turn needs \"speaker\" and \"text\"");
            }
            RawUtterance u;
            try {
                u.speaker = role_from_string(turn["speaker"].get<std::string>());
                u.words = tokenize(turn["text"].get<std::string>());
            } catch (const DataError& e) {
                throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
            } catch (const nlohmann::json::exception& e) {
                throw DataError(path + ":" + std::to_string(lineno) +
                                ": malformed turn: " + e.what());
            }
            if (!d.utterances.empty() && d.utterances.back().speaker == u.speaker) {
                throw DataError(path + ":" + std::to_string(lineno) +
                                ": speakers do not alternate");
            }
            d.utterances.push_back(std::move(u));
        }
        dialogs.push_back(std::move(d));
    }
    return dialogs;
}

Vocabulary Vocabulary::build(const std::vector<RawDialog>& dialogs, int min_freq) {
    std::unordered_map<std::string, std::size_t> counts;
    for (const auto& d : dialogs)
        for (const auto& u : d.utterances)
            for (const auto& w : u.words) ++counts[w];
    if (counts.empty()) throw DataError("build_vocab: empty corpus");

    std::vector<std::pair<std::string, std::size_t>> entries(counts.begin(), counts.end());
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::vector<std::string> tokens = {kPadTok, kBosTok, kEosTok, kUnkTok};
    for (const auto& [tok, freq] : entries) {
        if (freq >= static_cast<std::size_t>(min_freq)) tokens.push_back(tok);
    }
    return from_tokens(std::move(tokens));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
    if (tokens.size() < kNumSpecials || tokens[0] != kPadTok || tokens[1] != kBosTok ||
        tokens[2] != kEosTok || tokens[3] != kUnkTok) {
        throw DataError("vocabulary must start with [pad] [bos] [eos] [unk]");
    }
    Vocabulary v;
    v.tokens_ = std::move(tokens);
    for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
        if (!v.index_.emplace(v.tokens_[i], static_cast<int>(i)).second) {
            throw DataError("vocabulary has duplicate token '" + v.tokens_[i] + "'");
        }
    }
    return v;
}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open vocabulary file: " + path);
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        tokens.push_back(line);
    }
    return from_tokens(std::move(tokens));
}

void Vocabulary::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write vocabulary file: " + path);
    for (const auto& t : tokens_) out << t << '\n';
}

int Vocabulary::encode(const std::string& word) const {
    auto it = index_.find(word);
    return it == index_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::token(int id) const {
    if (id < 0 || id >= size()) {
        throw IndexError("vocabulary id " + std::to_string(id) + " out of range [0, " +
                         std::to_string(size()) + ")");
    }
    return tokens_[id];
}

std::vector<Dialog> encode_dialogs(const std::vector<RawDialog>& raw, const Vocabulary& vocab) {
    std::vector<Dialog> out;
    out.reserve(raw.size());
    for (const auto& rd : raw) {
        Dialog d;
        for (const auto& ru : rd.utterances) {
            Utterance u;
            u.speaker = ru.speaker;
            u.tokens.reserve(ru.words.size() + 2);
            u.tokens.push_back(kBosId);
            for (const auto& w : ru.words) u.tokens.push_back(vocab.encode(w));
            u.tokens.push_back(kEosId);
            d.utterances.push_back(std::move(u));
        }
        out.push_back(std::move(d));
    }
    return out;
}

std::vector<TrainingExample> make_examples(const Dialog& dialog, int n_max) {
    const int t_count = static_cast<int>(dialog.utterances.size());
    std::vector<TrainingExample> out;
    // one example per turn t in [2, T] (1-based); context = max(1, t-n_max)..t-1
    for (int t = 2; t <= t_count; ++t) {
        TrainingExample ex;
        const int first = std::max(1, t - n_max);
        for (int s = first; s <= t - 1; ++s) ex.context.push_back(dialog.utterances[s - 1]);
        ex.response = dialog.utterances[t - 1];
        out.push_back(std::move(ex));
    }
    return out;
}

std::vector<TrainingExample> make_examples(const std::vector<Dialog>& dialogs, int n_max) {
    std::vector<TrainingExample> out;
    for (const auto& d : dialogs) {
        auto part = make_examples(d, n_max);
        out.insert(out.end(), part.begin(), part.end());
    }
    return out;
}

namespace {

std::vector<int> clip_utterance(const std::vector<int>& tokens, int l_utt_max, std::size_t& truncated) {
    if (tokens.size() <= static_cast<std::size_t>(l_utt_max)) return tokens;
    std::vector<int> clipped(tokens.begin(), tokens.begin() + (l_utt_max - 1));
    clipped.push_back(kEosId);
    ++truncated;
    return clipped;
}

} // namespace

std::size_t Batch::ctx_len(std::size_t b, std::size_t n) const {
    const std::uint8_t* v = ctx_valid_row(b, n);
    std::size_t len = 0;
    while (len < max_len && v[len]) ++len;
    return len;
}

Batch collate(const std::vector<TrainingExample>& examples, int l_utt_max) {
    if (examples.empty()) throw DataError("collate: empty example list");
    if (l_utt_max < 3) throw ConfigError("collate: l_utt_max must be at least 3");

    Batch batch;
    batch.size = examples.size();

    std::vector<std::vector<std::vector<int>>> ctx(examples.size());
    std::vector<std::vector<int>> resp(examples.size());
    for (std::size_t b = 0; b < examples.size(); ++b) {
        const auto& ex = examples[b];
        if (ex.context.empty()) throw DataError("collate: example has no context");
        for (const auto& u : ex.context) {
            if (u.tokens.size() < 2 || u.tokens.front() != kBosId || u.tokens.back() != kEosId)
                throw DataError("collate: utterance is not [bos]...[eos] framed");
            ctx[b].push_back(clip_utterance(u.tokens, l_utt_max, batch.truncated));
            batch.max_len = std::max(batch.max_len, ctx[b].back().size());
        }
        resp[b] = clip_utterance(ex.response.tokens, l_utt_max, batch.truncated);
        batch.max_ctx = std::max(batch.max_ctx, ctx[b].size());
        batch.resp_len = std::max(batch.resp_len, resp[b].size() - 1);
    }

    const std::size_t B = batch.size, N = batch.max_ctx, L = batch.max_len, R = batch.resp_len;
    batch.ctx_ids.assign(B * N * L, kPadId);
    batch.ctx_valid.assign(B * N * L, 0);
    batch.ctx_token_pos.assign(B * N * L, 0);
    batch.ctx_roles.assign(B * N, -1);
    batch.utt_pos.assign(B * N, -1);
    batch.ctx_counts.assign(B, 0);
    batch.resp_input.assign(B * R, kPadId);
    batch.resp_target.assign(B * R, kPadId);
    batch.resp_valid.assign(B * R, 0);
    batch.resp_roles.assign(B, 0);

    for (std::size_t b = 0; b < B; ++b) {
        const auto& ex = examples[b];
        batch.ctx_counts[b] = static_cast<int>(ctx[b].size());
        for (std::size_t n = 0; n < ctx[b].size(); ++n) {
            const auto& toks = ctx[b][n];
            const std::size_t base = (b * N + n) * L;
            for (std::size_t i = 0; i < L; ++i) {
                batch.ctx_token_pos[base + i] = static_cast<int>(i);
                if (i < toks.size()) {
                    batch.ctx_ids[base + i] = toks[i];
                    batch.ctx_valid[base + i] = 1;
                }
            }
            batch.ctx_roles[b * N + n] = static_cast<int>(ex.context[n].speaker);
            batch.utt_pos[b * N + n] = static_cast<int>(n); // oldest-first window index
        }
        // teacher forcing: input = [bos] w1..wk, target = w1..wk [eos]
        const auto& r = resp[b];
        for (std::size_t i = 0; i + 1 < r.size(); ++i) {
            batch.resp_input[b * R + i] = r[i];
            batch.resp_target[b * R + i] = r[i + 1];
            batch.resp_valid[b * R + i] = 1;
        }
        batch.resp_roles[b] = static_cast<int>(ex.response.speaker);
    }
    return batch;
}

} // namespace lgcm
