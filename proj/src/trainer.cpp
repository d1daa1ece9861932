#include "lgcm/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

namespace lgcm {

AdamW::AdamW(std::vector<NamedParam> params, AdamWOptions opts)
    : params_(std::move(params)), opts_(opts) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& p : params_) {
        m_.emplace_back(p.tensor.size(), 0.0);
        v_.emplace_back(p.tensor.size(), 0.0);
    }
}

void AdamW::step(double lr_scale) {
    ++step_;
    const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(step_));
    const double lr = opts_.lr * lr_scale;
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Tensor t = params_[i].tensor;
        if (!t.has_grad()) continue;
        auto& data = t.data();
        const auto& grad = t.grad();
        auto& m = m_[i];
        auto& v = v_[i];
        for (std::size_t j = 0; j < data.size(); ++j) {
            const double g = grad[j];
            m[j] = opts_.beta1 * m[j] + (1.0 - opts_.beta1) * g;
            v[j] = opts_.beta2 * v[j] + (1.0 - opts_.beta2) * g * g;
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            data[j] -= lr * (mhat / (std::sqrt(vhat) + opts_.eps) +
                             opts_.weight_decay * data[j]);
        }
    }
}

double AdamW::clip_grad_norm(double max_norm) {
    double sq = 0.0;
    for (const auto& p : params_) {
        Tensor t = p.tensor;
        if (!t.has_grad()) continue;
        for (double g : t.grad()) sq += g * g;
    }
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        const double scale = max_norm / norm;
        for (const auto& p : params_) {
            Tensor t = p.tensor;
            if (!t.has_grad()) continue;
            for (double& g : t.grad()) g *= scale;
        }
    }
    return norm;
}

void AdamW::zero_grad() {
    for (const auto& p : params_) {
        Tensor t = p.tensor;
        t.zero_grad();
    }
}

std::vector<NamedParam> AdamW::first_moments(const std::string& prefix) const {
    std::vector<NamedParam> out;
    for (std::size_t i = 0; i < params_.size(); ++i) {
        const auto& t = params_[i].tensor;
        out.push_back({prefix + params_[i].name, Tensor::from(t.rows(), t.cols(), m_[i])});
    }
    return out;
}

std::vector<NamedParam> AdamW::second_moments(const std::string& prefix) const {
    std::vector<NamedParam> out;
    for (std::size_t i = 0; i < params_.size(); ++i) {
        const auto& t = params_[i].tensor;
        out.push_back({prefix + params_[i].name, Tensor::from(t.rows(), t.cols(), v_[i])});
    }
    return out;
}

void TrainConfig::validate() const {
    if (lr <= 0 || batch_size <= 0 || max_steps <= 0 || eval_interval <= 0)
        throw ConfigError("train: lr, batch_size, max_steps and eval_interval must be positive");
    if (clip_norm < 0 || warmup_steps < 0)
        throw ConfigError("train: clip_norm and warmup_steps must be nonnegative");
}

double evaluate_ppl(const Model& model, const std::vector<TrainingExample>& dataset,
                    int batch_size) {
    if (dataset.empty()) throw DataError("evaluate_ppl: empty dataset");
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t start = 0; start < dataset.size();
         start += static_cast<std::size_t>(batch_size)) {
        const std::size_t end = std::min(dataset.size(), start + batch_size);
        std::vector<TrainingExample> chunk(dataset.begin() + start, dataset.begin() + end);
        Batch batch = collate(chunk, model.config().l_utt_max);
        auto [nll, n] = model.nll_sum(batch);
        total += nll.value();
        count += n;
    }
    if (count == 0) throw ContractError("evaluate_ppl: no target tokens");
    return std::exp(total / static_cast<double>(count));
}

TrainResult train(Model& model, const std::vector<TrainingExample>& train_set,
                  const std::vector<TrainingExample>& valid_set, const TrainConfig& cfg,
                  const std::vector<std::string>& vocab_tokens, std::ostream* progress) {
    cfg.validate();
    if (train_set.empty() || valid_set.empty())
        throw DataError("train: empty train or validation split");

    AdamWOptions opts;
    opts.lr = cfg.lr;
    opts.beta1 = cfg.beta1;
    opts.beta2 = cfg.beta2;
    opts.eps = cfg.eps;
    opts.weight_decay = cfg.weight_decay;
    AdamW optimizer(model.params(), opts);

    std::mt19937_64 drop_rng(cfg.seed ^ 0xD1CEB011ull);
    const bool use_dropout = model.config().dropout > 0.0;

    TrainResult result;
    result.best_valid_ppl = std::numeric_limits<double>::infinity();

    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    int step = 0;
    for (std::uint64_t epoch = 0; step < cfg.max_steps; ++epoch) {
        // epoch order reproducible from (seed, epoch)
        std::mt19937_64 shuffle_rng(cfg.seed + 0x9E3779B97F4A7C15ull * (epoch + 1));
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        for (std::size_t start = 0; start < order.size() && step < cfg.max_steps;
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end =
                std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            std::vector<TrainingExample> chunk;
            chunk.reserve(end - start);
            for (std::size_t i = start; i < end; ++i) chunk.push_back(train_set[order[i]]);
            Batch batch = collate(chunk, model.config().l_utt_max);

            Tensor loss = model.loss(batch, use_dropout ? &drop_rng : nullptr);
            const double loss_val = loss.value();
            if (!std::isfinite(loss_val))
                throw NumericError("train: loss diverged (non-finite) at step " +
                                   std::to_string(step + 1));
            optimizer.zero_grad();
            backward(loss);
            optimizer.clip_grad_norm(cfg.clip_norm);
            const double lr_scale =
                cfg.warmup_steps > 0
                    ? std::min(1.0, static_cast<double>(step + 1) / cfg.warmup_steps)
                    : 1.0;
            optimizer.step(lr_scale);
            ++step;
            result.final_train_loss = loss_val;

            if (step % cfg.eval_interval == 0 || step == cfg.max_steps) {
                const double ppl = evaluate_ppl(model, valid_set, cfg.batch_size);
                result.log.push_back({step, loss_val, ppl});
                if (progress)
                    (*progress) << "step " << step << " train_loss " << loss_val
                                << " valid_ppl " << ppl << "\n";
                if (ppl < result.best_valid_ppl) {
                    result.best_valid_ppl = ppl;
                    result.best_step = step;
                    result.best = Checkpoint::from_model(model, vocab_tokens);
                    result.best.opt_first_moment = optimizer.first_moments();
                    result.best.opt_second_moment = optimizer.second_moments();
                    result.best.opt_step = optimizer.step_count();
                    result.best.train_step = step;
                    result.best.valid_score = ppl;
                }
            }
        }
    }
    return result;
}

std::string metric_log_csv(const std::vector<MetricLogRow>& rows) {
    std::ostringstream out;
    out << "step,train_loss,valid_ppl\n";
    out.precision(17);
    for (const auto& r : rows) out << r.step << ',' << r.train_loss << ',' << r.valid_ppl << '\n';
    return out.str();
}

} // namespace lgcm
