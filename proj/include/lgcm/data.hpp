#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "lgcm/errors.hpp"

namespace lgcm {

// Fixed special token ids; every vocabulary starts with these four rows.
constexpr int kPadId = 0;
constexpr int kBosId = 1;
constexpr int kEosId = 2;
constexpr int kUnkId = 3;
constexpr int kNumSpecials = 4;

inline const char* kPadTok = "[pad]";
inline const char* kBosTok = "[bos]";
inline const char* kEosTok = "[eos]";
inline const char* kUnkTok = "[unk]";

/// One of the two conversation roles.
enum class Role : int { A = 0, B = 1 };

Role role_from_string(const std::string& s);
const char* role_to_string(Role r);
inline Role other_role(Role r) { return r == Role::A ? Role::B : Role::A; }

// ---- raw (string-level) corpus ----

struct RawUtterance {
    Role speaker;
    std::vector<std::string> words;
};

struct RawDialog {
    std::vector<RawUtterance> utterances;
};

/// Lowercases, splits punctuation characters into their own tokens and
/// otherwise splits on whitespace. Empty input gives an empty list.
std::vector<std::string> tokenize(const std::string& text);

/// Joins tokens with single spaces (the normalized text form).
std::string detokenize(const std::vector<std::string>& tokens);

/// Reads newline-delimited records {"dialog": [{"speaker": "A"|"B",
/// "text": ...}, ...]}, validating speaker alternation and tokenizing.
std::vector<RawDialog> load_jsonl(const std::string& path);

// ---- vocabulary ----

class Vocabulary {
public:
    /// Tokens with corpus frequency >= min_freq, ordered by
    /// (frequency desc, token asc) after the four specials.
    static Vocabulary build(const std::vector<RawDialog>& dialogs, int min_freq);
    static Vocabulary from_tokens(std::vector<std::string> tokens);
    static Vocabulary load(const std::string& path);
    void save(const std::string& path) const;

    int size() const { return static_cast<int>(tokens_.size()); }
    int encode(const std::string& word) const; // OOV -> [unk]
    const std::string& token(int id) const;
    const std::vector<std::string>& tokens() const { return tokens_; }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> index_;
};

// ---- id-level structures ----

struct Utterance {
    Role speaker;
    std::vector<int> tokens; // [bos] content... [eos]
};

struct Dialog {
    std::vector<Utterance> utterances; // strictly alternating speakers
};

std::vector<Dialog> encode_dialogs(const std::vector<RawDialog>& raw, const Vocabulary& vocab);

struct TrainingExample {
    std::vector<Utterance> context; // 1..n_max utterances, oldest first
    Utterance response;
    Role response_role() const { return response.speaker; }
};

/// One example per turn index t in [2, T]; the context is the window of up
/// to n_max consecutive utterances immediately preceding the response.
std::vector<TrainingExample> make_examples(const Dialog& dialog, int n_max);
std::vector<TrainingExample> make_examples(const std::vector<Dialog>& dialogs, int n_max);

// ---- padded batch ----

struct Batch {
    std::size_t size = 0;    // B
    std::size_t max_ctx = 0; // N: context slots
    std::size_t max_len = 0; // L: context utterance length (with bos/eos)
    std::size_t resp_len = 0;

    // context, row-major [B x N x L] / [B x N]
    std::vector<int> ctx_ids;
    std::vector<std::uint8_t> ctx_valid; // true = real token, false = pad
    std::vector<int> ctx_token_pos;
    std::vector<int> ctx_roles;  // [B x N], -1 for empty slots
    std::vector<int> utt_pos;    // [B x N], window position oldest-first, -1 empty
    std::vector<int> ctx_counts; // [B]

    // response, [B x resp_len]; input position i predicts target position i
    std::vector<int> resp_input;
    std::vector<int> resp_target;
    std::vector<std::uint8_t> resp_valid;
    std::vector<int> resp_roles; // [B]

    std::size_t truncated = 0; // utterances clipped to l_utt_max

    const int* ctx_row(std::size_t b, std::size_t n) const {
        return ctx_ids.data() + (b * max_ctx + n) * max_len;
    }
    const std::uint8_t* ctx_valid_row(std::size_t b, std::size_t n) const {
        return ctx_valid.data() + (b * max_ctx + n) * max_len;
    }
    std::size_t ctx_len(std::size_t b, std::size_t n) const; // real tokens in slot
};

/// Pads a nonempty example list to common context/response sizes.
/// Utterances longer than l_utt_max are clipped to l_utt_max - 2 content
/// tokens and re-terminated with [eos]; the count is reported on the batch.
Batch collate(const std::vector<TrainingExample>& examples, int l_utt_max);

} // namespace lgcm
