#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "lgcm/trainer.hpp"
#include "testutil.hpp"

using namespace lgcm;
using namespace lgcm::testutil;

namespace {

LGCMConfig fixture_config(int vocab, Variant variant = Variant::LGCM) {
    LGCMConfig cfg;
    cfg.d = 32;
    cfg.heads = 4;
    cfg.n_local = 1;
    cfg.n_global = 1;
    cfg.n_dec = 1;
    cfg.vocab = vocab;
    cfg.n_max = 7;
    cfg.l_utt_max = 16;
    cfg.variant = variant;
    cfg.seed = 5;
    return cfg;
}

} // namespace

TEST_CASE("one AdamW step matches the hand-executed update rule") {
    Tensor p = Tensor::from(1, 1, {0.5}, true);
    p.grad()[0] = 0.3;
    AdamWOptions opts;
    opts.lr = 0.1;
    opts.beta1 = 0.9;
    opts.beta2 = 0.999;
    opts.eps = 1e-8;
    opts.weight_decay = 0.01;
    AdamW adam({{"p", p}}, opts);
    adam.step();

    // hand execution: m = 0.1*g, v = 0.001*g^2, bias-corrected back to g and
    // g^2 at t=1, decoupled decay applied directly to the weight
    const double g = 0.3;
    const double mhat = (0.1 * g) / (1.0 - 0.9);
    const double vhat = (0.001 * g * g) / (1.0 - 0.999);
    const double want = 0.5 - 0.1 * (mhat / (std::sqrt(vhat) + 1e-8) + 0.01 * 0.5);
    CHECK(p.data()[0] == doctest::Approx(want).epsilon(1e-15));

    // second step with a fresh gradient
    p.zero_grad();
    p.grad()[0] = -0.2;
    const double before = p.data()[0];
    adam.step();
    const double m2 = 0.9 * (0.1 * g) + 0.1 * (-0.2);
    const double v2 = 0.999 * (0.001 * g * g) + 0.001 * 0.04;
    const double mhat2 = m2 / (1.0 - 0.9 * 0.9);
    const double vhat2 = v2 / (1.0 - 0.999 * 0.999);
    const double want2 = before - 0.1 * (mhat2 / (std::sqrt(vhat2) + 1e-8) + 0.01 * before);
    CHECK(p.data()[0] == doctest::Approx(want2).epsilon(1e-15));
}

TEST_CASE("gradient clipping preserves direction") {
    Tensor a = Tensor::from(1, 2, {0.0, 0.0}, true);
    a.grad()[0] = 3.0;
    a.grad()[1] = 4.0; // norm 5
    AdamW adam({{"a", a}}, AdamWOptions{});
    const double norm = adam.clip_grad_norm(1.0);
    CHECK(norm == doctest::Approx(5.0).epsilon(1e-15));
    CHECK(a.grad()[0] == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(a.grad()[1] == doctest::Approx(0.8).epsilon(1e-12));
    // already-small gradients are untouched
    const double norm2 = adam.clip_grad_norm(10.0);
    CHECK(norm2 == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(a.grad()[0] == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
    auto data = fixture_data();
    Model m = Model::init(fixture_config(data.vocab.size()));
    std::vector<std::vector<double>> before;
    for (const auto& p : m.params()) before.push_back(p.tensor.data());

    TrainConfig cfg;
    cfg.lr = 1e-30; // positive but negligible; exact-zero is rejected as config error
    cfg.weight_decay = 0.0;
    cfg.max_steps = 3;
    cfg.batch_size = 8;
    cfg.eval_interval = 3;
    train(m, data.examples, data.examples, cfg, data.vocab.tokens());
    for (std::size_t i = 0; i < before.size(); ++i)
        CHECK(max_abs_diff(before[i], m.params()[i].tensor.data()) < 1e-20);

    TrainConfig bad;
    bad.lr = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("training reduces the loss on the memorization fixture") {
    auto data = fixture_data();
    Model m = Model::init(fixture_config(data.vocab.size()));
    const double ppl0 = evaluate_ppl(m, data.examples, 8);

    TrainConfig cfg;
    cfg.lr = 3e-3;
    cfg.max_steps = 40;
    cfg.batch_size = 8;
    cfg.eval_interval = 10;
    TrainResult res = train(m, data.examples, data.examples, cfg, data.vocab.tokens());
    const double ppl1 = evaluate_ppl(m, data.examples, 8);
    CHECK(ppl1 < ppl0);
    CHECK(res.best_valid_ppl <= ppl0);
    CHECK(res.log.size() == 4);
    CHECK(res.log.front().step == 10);
    CHECK(res.best.train_step > 0);
}

TEST_CASE("perplexity: uniform logits give exactly the vocabulary size") {
    auto data = fixture_data();
    Model m = Model::init(fixture_config(data.vocab.size()));
    zero_tensor(m.embeddings().token); // uniform output distribution
    const double ppl = evaluate_ppl(m, data.examples, 8);
    CHECK(ppl == doctest::Approx(static_cast<double>(data.vocab.size())).epsilon(1e-12));
}

TEST_CASE("perplexity is independent of batch size") {
    auto data = fixture_data();
    Model m = Model::init(fixture_config(data.vocab.size()));
    const double a = evaluate_ppl(m, data.examples, 1);
    const double b = evaluate_ppl(m, data.examples, 8);
    CHECK(std::abs(a - b) < 1e-9);
    CHECK_THROWS_AS(evaluate_ppl(m, {}, 8), DataError);
}

TEST_CASE("perplexity matches a scalar hand computation on a 2-example dataset") {
    LGCMConfig cfg = tiny_config(14);
    Model m = Model::init(cfg);
    auto ex1 = example({utt(Role::A, {5, 6})}, utt(Role::B, {7}));
    auto ex2 = example({utt(Role::B, {8})}, utt(Role::A, {9, 10}));

    // hand aggregation: per-example token NLLs from the raw logits
    double total = 0.0;
    std::size_t count = 0;
    for (const auto& ex : {ex1, ex2}) {
        Batch b = collate({ex}, cfg.l_utt_max);
        EncodedContext enc = m.encode(b, 0);
        std::vector<int> input(b.resp_input.begin(), b.resp_input.begin() + b.resp_len);
        std::vector<std::uint8_t> valid(b.resp_valid.begin(), b.resp_valid.begin() + b.resp_len);
        std::vector<int> target(b.resp_target.begin(), b.resp_target.begin() + b.resp_len);
        Tensor logits = m.decode_logits(input, valid, ex.response.speaker, enc);
        for (std::size_t i = 0; i < valid.size(); ++i) {
            if (!valid[i]) continue;
            double denom = 0.0;
            for (int v = 0; v < 14; ++v) denom += std::exp(logits.at(i, v));
            total += -std::log(std::exp(logits.at(i, target[i])) / denom);
            ++count;
        }
    }
    const double want = std::exp(total / static_cast<double>(count));
    CHECK(evaluate_ppl(m, {ex1, ex2}, 2) == doctest::Approx(want).epsilon(1e-9));
}

TEST_CASE("identical seeds reproduce training bit-exactly") {
    auto data = fixture_data();
    auto run = [&] {
        Model m = Model::init(fixture_config(data.vocab.size()));
        TrainConfig cfg;
        cfg.lr = 1e-3;
        cfg.max_steps = 12;
        cfg.batch_size = 8;
        cfg.eval_interval = 6;
        cfg.seed = 7;
        TrainResult res = train(m, data.examples, data.examples, cfg, data.vocab.tokens());
        std::vector<std::vector<double>> params;
        for (const auto& p : m.params()) params.push_back(p.tensor.data());
        return std::make_pair(params, res.log);
    };
    auto [p1, log1] = run();
    auto [p2, log2] = run();
    REQUIRE(p1.size() == p2.size());
    for (std::size_t i = 0; i < p1.size(); ++i) CHECK(p1[i] == p2[i]);
    REQUIRE(log1.size() == log2.size());
    for (std::size_t i = 0; i < log1.size(); ++i) {
        CHECK(log1[i].train_loss == log2[i].train_loss);
        CHECK(log1[i].valid_ppl == log2[i].valid_ppl);
    }
}

TEST_CASE("divergence aborts with a numeric error") {
    auto data = fixture_data();
    Model m = Model::init(fixture_config(data.vocab.size()));
    Tensor t = m.params()[0].tensor;
    t.data()[0] = std::numeric_limits<double>::quiet_NaN();
    TrainConfig cfg;
    cfg.max_steps = 2;
    cfg.batch_size = 8;
    CHECK_THROWS_AS(train(m, data.examples, data.examples, cfg, data.vocab.tokens()),
                    NumericError);
}

TEST_CASE("metric log CSV layout") {
    std::vector<MetricLogRow> rows = {{10, 1.5, 20.25}, {20, 0.75, 10.5}};
    const std::string csv = metric_log_csv(rows);
    CHECK(csv == "step,train_loss,valid_ppl\n10,1.5,20.25\n20,0.75,10.5\n");
}
