#pragma once

// Shared synthetic fixtures for the test suites.

#include <fstream>
#include <string>
#include <vector>

#include "lgcm/data.hpp"
#include "lgcm/model.hpp"

namespace lgcm::testutil {

inline Utterance utt(Role speaker, std::vector<int> content) {
    Utterance u;
    u.speaker = speaker;
    u.tokens.push_back(kBosId);
    for (int id : content) u.tokens.push_back(id);
    u.tokens.push_back(kEosId);
    return u;
}

inline TrainingExample example(std::vector<Utterance> context, Utterance response) {
    TrainingExample ex;
    ex.context = std::move(context);
    ex.response = std::move(response);
    return ex;
}

inline LGCMConfig tiny_config(int vocab = 16, Variant variant = Variant::LGCM) {
    LGCMConfig cfg;
    cfg.d = 8;
    cfg.heads = 2;
    cfg.n_local = 1;
    cfg.n_global = 1;
    cfg.n_dec = 1;
    cfg.vocab = vocab;
    cfg.n_max = 4;
    cfg.l_utt_max = 10;
    cfg.variant = variant;
    cfg.seed = 99;
    return cfg;
}

// The memorization corpus: 32 two-turn dialogs over a small closed
// vocabulary where the response is a deterministic function of the context.
inline const std::vector<std::string>& fixture_colors() {
    static const std::vector<std::string> v = {"red", "green", "blue", "gold"};
    return v;
}

inline const std::vector<std::string>& fixture_animals() {
    static const std::vector<std::string> v = {"cat", "dog", "fox", "owl",
                                               "bee", "ant", "elk", "hen"};
    return v;
}

inline std::string fixture_context_text(int k) {
    return fixture_colors()[k / 8] + " " + fixture_animals()[k % 8] + " ?";
}

inline std::string fixture_response_text(int k) {
    return "the " + fixture_animals()[k % 8] + " is " + fixture_colors()[k / 8] + " .";
}

inline std::string fixture_jsonl() {
    std::string out;
    for (int k = 0; k < 32; ++k) {
        out += R"({"dialog": [{"speaker": "A", "text": ")" + fixture_context_text(k) +
               R"("}, {"speaker": "B", "text": ")" + fixture_response_text(k) + R"("}]})" + "\n";
    }
    return out;
}

inline void write_fixture_jsonl(const std::string& path) {
    std::ofstream out(path);
    out << fixture_jsonl();
}

struct FixtureData {
    Vocabulary vocab;
    std::vector<TrainingExample> examples;
};

inline FixtureData fixture_data() {
    std::vector<RawDialog> raw;
    for (int k = 0; k < 32; ++k) {
        RawDialog d;
        d.utterances.push_back({Role::A, tokenize(fixture_context_text(k))});
        d.utterances.push_back({Role::B, tokenize(fixture_response_text(k))});
        raw.push_back(std::move(d));
    }
    FixtureData f{Vocabulary::build(raw, 1), {}};
    f.examples = make_examples(encode_dialogs(raw, f.vocab), 7);
    return f;
}

} // namespace lgcm::testutil
