#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "lgcm/errors.hpp"

namespace lgcm {

/// Dense 2-D tensor of 64-bit floats with reverse-mode autodiff.
///
/// Every value in the model is a row-major [rows x cols] matrix; scalars are
/// [1 x 1] and vectors [1 x n] or [n x 1]. Operations record a tape node per
/// result; backward() replays the tape in reverse creation order, so each
/// node is visited exactly once and leaf gradients accumulate across calls.
struct TensorNode {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;
    std::vector<double> grad; // empty until first touched; same size as data
    bool requires_grad = false;
    const char* op = "leaf";
    std::uint64_t seq = 0; // creation order; ascending order is topological
    std::vector<std::shared_ptr<TensorNode>> inputs;
    std::function<void(TensorNode&)> backward_fn; // null for leaves

    std::size_t size() const { return data.size(); }

    std::vector<double>& ensure_grad() {
        if (grad.empty()) grad.assign(data.size(), 0.0);
        return grad;
    }
};

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}

    static Tensor zeros(std::size_t rows, std::size_t cols, bool requires_grad = false);
    static Tensor full(std::size_t rows, std::size_t cols, double value, bool requires_grad = false);
    static Tensor from(std::size_t rows, std::size_t cols, std::vector<double> values,
                       bool requires_grad = false);
    /// Gaussian init, mean 0. The generator is the only nondeterminism source.
    static Tensor randn(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double stddev,
                        bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    std::size_t rows() const { return node_->rows; }
    std::size_t cols() const { return node_->cols; }
    std::size_t size() const { return node_->data.size(); }
    bool requires_grad() const { return node_->requires_grad; }

    std::vector<double>& data() { return node_->data; }
    const std::vector<double>& data() const { return node_->data; }
    std::vector<double>& grad() { return node_->ensure_grad(); }
    bool has_grad() const { return !node_->grad.empty(); }

    double at(std::size_t r, std::size_t c) const { return node_->data[r * node_->cols + c]; }
    double& at(std::size_t r, std::size_t c) { return node_->data[r * node_->cols + c]; }

    /// Value of a [1 x 1] tensor.
    double value() const;

    void zero_grad() { if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0); }

    std::shared_ptr<TensorNode> node() const { return node_; }
    std::string shape_str() const;

private:
    std::shared_ptr<TensorNode> node_;
};

// ---- primitive operations (all record backward rules) ----

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);          // same shape
Tensor add_row(const Tensor& a, const Tensor& row);    // [m x n] + [1 x n]
Tensor add_col(const Tensor& a, const Tensor& col);    // [m x n] + [m x 1]
Tensor hadamard(const Tensor& a, const Tensor& b);     // elementwise product
Tensor affine(const Tensor& a, double k, double c);    // k * a + c elementwise
Tensor scale(const Tensor& a, double k);
Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor concat_rows(const std::vector<Tensor>& parts);  // vertical stack
Tensor concat_cols(const Tensor& a, const Tensor& b);  // join along last axis
Tensor slice_rows(const Tensor& a, std::size_t start, std::size_t len);
Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t len);
Tensor sum(const Tensor& a);                           // -> [1 x 1]
Tensor mean(const Tensor& a);                          // -> [1 x 1]

/// Row-wise softmax over the last axis. `mask` is a non-grad tensor whose
/// nonzero entries are excluded from the distribution; it must have the same
/// shape as `x` or be a [1 x cols] row broadcast over all rows. Masked
/// entries receive weight exactly 0; a fully masked row is a contract error.
Tensor masked_softmax(const Tensor& x, const Tensor& mask);
Tensor softmax(const Tensor& x);

/// Row-wise log-softmax (numerically stabilized).
Tensor log_softmax(const Tensor& x);

/// y = (x - mean) / sqrt(var + eps) * gain + bias, per row.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

/// Gather rows of `table` at `ids`; gradient scatter-adds over repeats.
Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids);

/// y[i, 0] = x[i, ids[i]].
Tensor gather_rows(const Tensor& x, const std::vector<int>& ids);

/// Inverted dropout; identity when rate == 0.
Tensor dropout(const Tensor& x, double rate, std::mt19937_64& rng);

/// Reverse-mode sweep from a scalar loss. Interior gradients are fresh per
/// call; leaf gradients accumulate until zero_grad().
void backward(const Tensor& loss);

} // namespace lgcm
