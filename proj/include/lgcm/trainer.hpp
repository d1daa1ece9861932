#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "lgcm/model.hpp"

namespace lgcm {

struct AdamWOptions {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01; // decoupled: applied to weights directly
};

class AdamW {
public:
    AdamW(std::vector<NamedParam> params, AdamWOptions opts);

    /// One update from the gradients currently on the parameters.
    /// lr_scale multiplies the base learning rate (warmup).
    void step(double lr_scale = 1.0);

    /// Scales all gradients so their global norm is at most max_norm.
    /// Returns the pre-clip norm. Direction is preserved.
    double clip_grad_norm(double max_norm);

    void zero_grad();
    std::int64_t step_count() const { return step_; }

    std::vector<NamedParam> first_moments(const std::string& prefix = "m.") const;
    std::vector<NamedParam> second_moments(const std::string& prefix = "v.") const;

private:
    std::vector<NamedParam> params_;
    std::vector<std::vector<double>> m_, v_;
    AdamWOptions opts_;
    std::int64_t step_ = 0;
};

struct TrainConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
    double clip_norm = 1.0;
    int batch_size = 8;
    int max_steps = 500;
    int eval_interval = 50;
    int warmup_steps = 0; // 0 = constant learning rate
    std::uint64_t seed = 0;

    void validate() const;
};

struct MetricLogRow {
    int step = 0;
    double train_loss = 0.0;
    double valid_ppl = 0.0;
};

struct TrainResult {
    Checkpoint best; // parameters at the lowest validation perplexity
    double best_valid_ppl = 0.0;
    int best_step = 0;
    double final_train_loss = 0.0;
    std::vector<MetricLogRow> log;
};

/// Supervised loop: seeded shuffling per epoch, AdamW with gradient
/// clipping, periodic validation, best-on-validation checkpoint selection.
/// Deterministic given (seed, data, config). NaN loss aborts.
TrainResult train(Model& model, const std::vector<TrainingExample>& train_set,
                  const std::vector<TrainingExample>& valid_set, const TrainConfig& cfg,
                  const std::vector<std::string>& vocab_tokens, std::ostream* progress = nullptr);

/// exp(total NLL / total target tokens); independent of batch size.
double evaluate_ppl(const Model& model, const std::vector<TrainingExample>& dataset,
                    int batch_size);

std::string metric_log_csv(const std::vector<MetricLogRow>& rows);

} // namespace lgcm
