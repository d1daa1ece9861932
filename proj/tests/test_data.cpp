#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>

#include "lgcm/data.hpp"

using namespace lgcm;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name, const std::string& content) {
    fs::path dir = fs::temp_directory_path() / "lgcm_data_tests";
    fs::create_directories(dir);
    fs::path p = dir / name;
    std::ofstream out(p);
    out << content;
    return p;
}

} // namespace

TEST_CASE("tokenize rules") {
    CHECK(tokenize("Hello, world!") == std::vector<std::string>{"hello", ",", "world", "!"});
    CHECK(tokenize("A  B") == std::vector<std::string>{"a", "b"});
    CHECK(tokenize("") == std::vector<std::string>{});
    // hand-tokenized oracle for a fuller sentence
    CHECK(tokenize("It's 5 o'clock; don't be late.") ==
          std::vector<std::string>{"it", "'", "s", "5", "o", "'", "clock", ";", "don", "'", "t",
                                   "be", "late", "."});
}

TEST_CASE("load_jsonl basics") {
    auto two = temp_file("two_turn.jsonl",
                         R"({"dialog": [{"speaker": "A", "text": "Hi there"}, {"speaker": "B", "text": "Hello!"}]})"
                         "\n");
    auto dialogs = load_jsonl(two.string());
    REQUIRE(dialogs.size() == 1);
    REQUIRE(dialogs[0].utterances.size() == 2);
    CHECK(dialogs[0].utterances[0].speaker == Role::A);
    CHECK(dialogs[0].utterances[1].words == std::vector<std::string>{"hello", "!"});

    auto empty = temp_file("empty.jsonl", "");
    CHECK(load_jsonl(empty.string()).empty());
}

TEST_CASE("load_jsonl error reporting carries line numbers") {
    auto bad = temp_file("bad.jsonl",
                         R"({"dialog": [{"speaker": "A", "text": "ok"}, {"speaker": "B", "text": "ok"}]})"
                         "\n{not json\n");
    CHECK_THROWS_WITH_AS(load_jsonl(bad.string()), doctest::Contains(":2:"), DataError);

    auto nonalt = temp_file("nonalt.jsonl",
                            R"({"dialog": [{"speaker": "A", "text": "x"}, {"speaker": "A", "text": "y"}]})"
                            "\n");
    CHECK_THROWS_WITH_AS(load_jsonl(nonalt.string()), doctest::Contains("alternate"), DataError);
}

TEST_CASE("round-trip: token stream re-detokenizes to normalized source text") {
    auto fixture = temp_file("roundtrip.jsonl",
                             R"({"dialog": [{"speaker": "A", "text": "Good morning, Sam."}, {"speaker": "B", "text": "morning! how are you?"}, {"speaker": "A", "text": "I am fine."}]})"
                             "\n");
    auto dialogs = load_jsonl(fixture.string());
    REQUIRE(dialogs.size() == 1);
    const std::vector<std::string> sources = {"Good morning, Sam.", "morning! how are you?",
                                              "I am fine."};
    for (std::size_t i = 0; i < sources.size(); ++i) {
        const std::string normalized = detokenize(tokenize(sources[i]));
        CHECK(detokenize(dialogs[0].utterances[i].words) == normalized);
    }
}

TEST_CASE("build_vocab frequency threshold and ordering") {
    RawDialog d;
    d.utterances.push_back({Role::A, {"a", "a"}});
    d.utterances.push_back({Role::B, {"a"}});
    std::vector<RawDialog> corpus = {d};
    CHECK(Vocabulary::build(corpus, 2).size() == 5); // 4 specials + "a"
    CHECK(Vocabulary::build(corpus, 10).size() == 4);
    CHECK_THROWS_AS(Vocabulary::build({}, 1), DataError);

    Vocabulary v = Vocabulary::build(corpus, 1);
    CHECK(v.encode("a") == 4);
    CHECK(v.encode("zzz") == kUnkId);
    CHECK(v.token(kBosId) == "[bos]");
}

TEST_CASE("build_vocab counts match a brute-force counter on a 10-sentence fixture") {
    const std::vector<std::string> sentences = {
        "the cat sat on the mat",   "the dog ran",         "a cat and a dog",
        "the mat was red",          "cats are not dogs",   "run dog run",
        "the red cat sat",          "a dog sat on a mat",  "red mat red cat",
        "the the the rare"};
    std::vector<RawDialog> corpus;
    RawDialog d;
    Role r = Role::A;
    for (const auto& s : sentences) {
        d.utterances.push_back({r, tokenize(s)});
        r = other_role(r);
    }
    corpus.push_back(d);

    // independent counter
    std::map<std::string, int> counts;
    for (const auto& s : sentences)
        for (const auto& w : tokenize(s)) ++counts[w];

    const int min_freq = 2;
    Vocabulary v = Vocabulary::build(corpus, min_freq);
    int expected = kNumSpecials;
    for (const auto& [w, c] : counts)
        if (c >= min_freq) ++expected;
    CHECK(v.size() == expected);
    for (const auto& [w, c] : counts) {
        if (c >= min_freq) {
            CHECK(v.encode(w) >= kNumSpecials);
            CHECK(v.token(v.encode(w)) == w);
        } else {
            CHECK(v.encode(w) == kUnkId);
        }
    }
    // ordering: higher frequency first; ties alphabetical
    CHECK(v.token(4) == "the"); // most frequent token
}

TEST_CASE("vocabulary save/load round-trips byte-identically") {
    RawDialog d;
    d.utterances.push_back({Role::A, {"b", "a", "b"}});
    std::vector<RawDialog> corpus = {d};
    Vocabulary v = Vocabulary::build(corpus, 1);
    fs::path p = fs::temp_directory_path() / "lgcm_data_tests" / "vocab.txt";
    fs::create_directories(p.parent_path());
    v.save(p.string());
    Vocabulary w = Vocabulary::load(p.string());
    CHECK(w.tokens() == v.tokens());
    fs::path p2 = p;
    p2 += ".again";
    w.save(p2.string());
    std::ifstream f1(p), f2(p2);
    std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(s1 == s2);
}

namespace {

Dialog make_dialog(int turns) {
    Dialog d;
    for (int t = 1; t <= turns; ++t) {
        Utterance u;
        u.speaker = (t % 2 == 1) ? Role::A : Role::B;
        u.tokens = {kBosId, kNumSpecials + t, kEosId}; // distinct content token per turn
        d.utterances.push_back(u);
    }
    return d;
}

} // namespace

TEST_CASE("make_examples window arithmetic") {
    CHECK(make_examples(make_dialog(2), 7).size() == 1);
    CHECK(make_examples(make_dialog(2), 7)[0].context.size() == 1);

    auto nine = make_examples(make_dialog(9), 7);
    REQUIRE(nine.size() == 8);
    const auto& last = nine.back();
    CHECK(last.context.size() == 7);
    // turns 2..8 (content token = specials + t)
    CHECK(last.context.front().tokens[1] == kNumSpecials + 2);
    CHECK(last.context.back().tokens[1] == kNumSpecials + 8);
    CHECK(last.response.tokens[1] == kNumSpecials + 9);

    // hand enumeration for a 5-turn dialog
    auto five = make_examples(make_dialog(5), 7);
    REQUIRE(five.size() == 4);
    for (int i = 0; i < 4; ++i) {
        const int t = i + 2;
        CHECK(five[i].context.size() == static_cast<std::size_t>(t - 1));
        for (int s = 1; s <= t - 1; ++s)
            CHECK(five[i].context[s - 1].tokens[1] == kNumSpecials + s);
        CHECK(five[i].response.tokens[1] == kNumSpecials + t);
    }
}

TEST_CASE("make_examples properties: count and window bounds") {
    for (int turns = 2; turns <= 11; ++turns) {
        for (int n_max : {1, 3, 7}) {
            auto exs = make_examples(make_dialog(turns), n_max);
            CHECK(exs.size() == static_cast<std::size_t>(turns - 1));
            for (std::size_t i = 0; i < exs.size(); ++i) {
                const int t = static_cast<int>(i) + 2;
                CHECK(exs[i].context.size() <= static_cast<std::size_t>(n_max));
                // every context utterance precedes the response, within n_max
                const int first_turn = exs[i].context.front().tokens[1] - kNumSpecials;
                const int last_turn = exs[i].context.back().tokens[1] - kNumSpecials;
                CHECK(last_turn == t - 1);
                CHECK(first_turn >= t - n_max);
            }
        }
    }
}

TEST_CASE("collate masks, padding and teacher-forcing offset") {
    Dialog d = make_dialog(3);
    auto exs = make_examples(d, 7);
    Batch solo = collate({exs[0]}, 32);
    CHECK(solo.size == 1);
    CHECK(solo.max_ctx == 1);
    CHECK(solo.max_len == 3);
    for (std::size_t i = 0; i < solo.max_len; ++i) CHECK(solo.ctx_valid[i] == 1);

    // two examples of unequal context count: shorter one padded, its
    // unpadded prefix bit-identical to the solo collation
    Batch both = collate({exs[0], exs[1]}, 32);
    CHECK(both.max_ctx == 2);
    CHECK(both.ctx_counts[0] == 1);
    CHECK(both.ctx_counts[1] == 2);
    for (std::size_t i = 0; i < both.max_len; ++i) {
        CHECK(both.ctx_row(0, 0)[i] == solo.ctx_row(0, 0)[i]);
        CHECK(both.ctx_valid_row(0, 0)[i] == solo.ctx_valid_row(0, 0)[i]);
    }
    for (std::size_t i = 0; i < both.max_len; ++i) CHECK(both.ctx_valid_row(0, 1)[i] == 0);
    CHECK(both.utt_pos[0 * both.max_ctx + 0] == 0);
    CHECK(both.utt_pos[1 * both.max_ctx + 1] == 1);

    // 4-content-token response: hand layout of input/target alignment
    TrainingExample ex;
    ex.context.push_back({Role::A, {kBosId, 5, kEosId}});
    ex.response = {Role::B, {kBosId, 6, 7, 8, 9, kEosId}};
    Batch b = collate({ex}, 32);
    REQUIRE(b.resp_len == 5);
    const std::vector<int> want_in = {kBosId, 6, 7, 8, 9};
    const std::vector<int> want_tg = {6, 7, 8, 9, kEosId};
    for (int i = 0; i < 5; ++i) {
        CHECK(b.resp_input[i] == want_in[i]);
        CHECK(b.resp_target[i] == want_tg[i]);
        CHECK(b.resp_valid[i] == 1);
    }
    CHECK(b.resp_roles[0] == static_cast<int>(Role::B));
}

TEST_CASE("collate truncates over-length utterances and re-appends [eos]") {
    TrainingExample ex;
    std::vector<int> longtoks = {kBosId};
    for (int i = 0; i < 12; ++i) longtoks.push_back(kNumSpecials + i);
    longtoks.push_back(kEosId);
    ex.context.push_back({Role::A, longtoks});
    ex.response = {Role::B, {kBosId, 5, kEosId}};
    Batch b = collate({ex}, 8);
    CHECK(b.truncated == 1);
    CHECK(b.max_len == 8);
    CHECK(b.ctx_row(0, 0)[0] == kBosId);
    CHECK(b.ctx_row(0, 0)[7] == kEosId);
    CHECK(b.ctx_len(0, 0) == 8);
}

TEST_CASE("collate then un-pad is the identity on token content") {
    std::vector<TrainingExample> exs;
    for (int turns : {2, 4, 5}) {
        auto part = make_examples(make_dialog(turns), 3);
        exs.insert(exs.end(), part.begin(), part.end());
    }
    Batch b = collate(exs, 32);
    for (std::size_t e = 0; e < exs.size(); ++e) {
        REQUIRE(static_cast<std::size_t>(b.ctx_counts[e]) == exs[e].context.size());
        for (std::size_t n = 0; n < exs[e].context.size(); ++n) {
            const auto& want = exs[e].context[n].tokens;
            REQUIRE(b.ctx_len(e, n) == want.size());
            for (std::size_t i = 0; i < want.size(); ++i) CHECK(b.ctx_row(e, n)[i] == want[i]);
        }
        const auto& r = exs[e].response.tokens;
        for (std::size_t i = 0; i + 1 < r.size(); ++i) {
            CHECK(b.resp_input[e * b.resp_len + i] == r[i]);
            CHECK(b.resp_target[e * b.resp_len + i] == r[i + 1]);
        }
    }
    CHECK_THROWS_AS(collate({}, 32), DataError);
}
