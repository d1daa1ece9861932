#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "lgcm/embeddings.hpp"
#include "testutil.hpp"

using namespace lgcm;
using lgcm::testutil::fd_check;

namespace {

EmbeddingTables small_tables(std::mt19937_64& rng) {
    return EmbeddingTables::init(/*vocab=*/8, /*d=*/4, /*l_utt_max=*/6, /*n_max=*/3, rng);
}

} // namespace

TEST_CASE("embed_utterance with zeroed position/role tables is a plain lookup") {
    std::mt19937_64 rng(1);
    EmbeddingTables t = small_tables(rng);
    std::fill(t.token_pos.data().begin(), t.token_pos.data().end(), 0.0);
    std::fill(t.role.data().begin(), t.role.data().end(), 0.0);
    Tensor out = t.embed_utterance({2, 5, 7}, Role::A, {0, 1, 2});
    for (int i = 0; i < 3; ++i) {
        const int id = std::vector<int>{2, 5, 7}[i];
        for (int j = 0; j < 4; ++j) CHECK(out.at(i, j) == t.token.at(id, j));
    }
}

TEST_CASE("role change shifts every row by the same constant vector") {
    std::mt19937_64 rng(2);
    EmbeddingTables t = small_tables(rng);
    Tensor a = t.embed_utterance({1, 2, 3}, Role::A, {0, 1, 2});
    Tensor b = t.embed_utterance({1, 2, 3}, Role::B, {0, 1, 2});
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 4; ++j)
            CHECK(a.at(i, j) - b.at(i, j) ==
                  doctest::Approx(t.role.at(0, j) - t.role.at(1, j)).epsilon(1e-12));
}

TEST_CASE("embed_utterance matches a hand-summed matrix") {
    std::mt19937_64 rng(3);
    EmbeddingTables t = small_tables(rng);
    // hand-filled tiny tables, d = 4
    t.token.data().assign(t.token.size(), 0.0);
    t.token_pos.data().assign(t.token_pos.size(), 0.0);
    t.role.data().assign(t.role.size(), 0.0);
    for (int j = 0; j < 4; ++j) {
        t.token.at(4, j) = 1.0 + j;     // id 4 -> [1 2 3 4]
        t.token.at(6, j) = 10.0 * j;    // id 6 -> [0 10 20 30]
        t.token_pos.at(0, j) = 0.5;     // pos 0 -> [.5 .5 .5 .5]
        t.token_pos.at(1, j) = -1.0;    // pos 1 -> [-1 -1 -1 -1]
        t.role.at(1, j) = 100.0;        // role B -> [100 ...]
    }
    Tensor out = t.embed_utterance({4, 6}, Role::B, {0, 1});
    const double want0[4] = {1 + 0.5 + 100, 2 + 0.5 + 100, 3 + 0.5 + 100, 4 + 0.5 + 100};
    const double want1[4] = {0 - 1 + 100, 10 - 1 + 100, 20 - 1 + 100, 30 - 1 + 100};
    for (int j = 0; j < 4; ++j) {
        CHECK(out.at(0, j) == want0[j]);
        CHECK(out.at(1, j) == want1[j]);
    }
}

TEST_CASE("embed_utterance rejects out-of-range ids and positions") {
    std::mt19937_64 rng(4);
    EmbeddingTables t = small_tables(rng);
    CHECK_THROWS_AS(t.embed_utterance({8}, Role::A, {0}), IndexError);
    CHECK_THROWS_AS(t.embed_utterance({0}, Role::A, {6}), IndexError);
}

TEST_CASE("add_utterance_positions") {
    std::mt19937_64 rng(5);
    EmbeddingTables t = small_tables(rng);
    Tensor x = Tensor::randn(3, 4, rng, 1.0);

    SUBCASE("zeroed table is the identity") {
        std::fill(t.utt_pos.data().begin(), t.utt_pos.data().end(), 0.0);
        Tensor out = t.add_utterance_positions(x, 1);
        for (std::size_t i = 0; i < x.size(); ++i) CHECK(out.data()[i] == x.data()[i]);
    }
    SUBCASE("single utterance at position 0 shifts all rows by that row") {
        Tensor out = t.add_utterance_positions(x, 0);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 4; ++j)
                CHECK(out.at(i, j) == x.at(i, j) + t.utt_pos.at(0, j));
    }
    SUBCASE("two utterances match manual addition") {
        Tensor y = Tensor::randn(2, 4, rng, 1.0);
        Tensor ox = t.add_utterance_positions(x, 0);
        Tensor oy = t.add_utterance_positions(y, 2);
        for (int j = 0; j < 4; ++j) {
            CHECK(ox.at(1, j) == x.at(1, j) + t.utt_pos.at(0, j));
            CHECK(oy.at(0, j) == y.at(0, j) + t.utt_pos.at(2, j));
        }
    }
    SUBCASE("position overflow raises") {
        CHECK_THROWS_AS(t.add_utterance_positions(x, 3), IndexError);
    }
}

TEST_CASE("output_logits uses the shared token table") {
    std::mt19937_64 rng(6);
    EmbeddingTables t = small_tables(rng);

    SUBCASE("orthonormal rows give argmax at the matching id") {
        std::fill(t.token.data().begin(), t.token.data().end(), 0.0);
        for (int k = 0; k < 4; ++k) t.token.at(k, k) = 1.0; // orthonormal block
        Tensor hidden = embedding_lookup(t.token, {2});
        Tensor logits = t.output_logits(hidden);
        int best = 0;
        for (int v = 1; v < 8; ++v)
            if (logits.at(0, v) > logits.at(0, best)) best = v;
        CHECK(best == 2);
    }
    SUBCASE("zero hidden gives zero logits") {
        Tensor logits = t.output_logits(Tensor::zeros(2, 4));
        for (double v : logits.data()) CHECK(v == 0.0);
    }
    SUBCASE("hand matmul on a 2x3 case") {
        EmbeddingTables s = t;
        s.token = Tensor::from(3, 2, {1, 0, 0, 1, 2, 3}, true); // V=3, d=2
        Tensor hidden = Tensor::from(2, 2, {1, 2, 3, 4});
        Tensor logits = s.output_logits(hidden);
        // hidden . E^T by hand
        CHECK(logits.at(0, 0) == 1.0);
        CHECK(logits.at(0, 1) == 2.0);
        CHECK(logits.at(0, 2) == 8.0);
        CHECK(logits.at(1, 0) == 3.0);
        CHECK(logits.at(1, 1) == 4.0);
        CHECK(logits.at(1, 2) == 18.0);
    }
}

TEST_CASE("token table gradient flows from both lookup and output projection") {
    std::mt19937_64 rng(7);
    EmbeddingTables t = small_tables(rng);
    auto f = [&] {
        Tensor x = t.embed_utterance({1, 2}, Role::A, {0, 1});
        return sum(sigmoid(t.output_logits(x)));
    };
    CHECK(fd_check(t.token, f, 1e-5) < 1e-4);

    // both paths contribute: zeroing the projection side changes the grad
    t.token.zero_grad();
    backward(f());
    double grad_norm = 0.0;
    for (double g : t.token.grad()) grad_norm += g * g;
    CHECK(grad_norm > 0.0);
}
