#include "lgcm/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <unordered_set>

namespace lgcm {

namespace {

std::atomic<std::uint64_t> g_seq{1};

std::string shape_of(std::size_t r, std::size_t c) {
    return "[" + std::to_string(r) + "x" + std::to_string(c) + "]";
}

std::shared_ptr<TensorNode> make_node(const char* op, std::size_t rows, std::size_t cols,
                                      std::vector<std::shared_ptr<TensorNode>> inputs) {
    auto n = std::make_shared<TensorNode>();
    n->rows = rows;
    n->cols = cols;
    n->data.assign(rows * cols, 0.0);
    n->op = op;
    n->seq = g_seq.fetch_add(1, std::memory_order_relaxed);
    for (const auto& in : inputs) {
        if (in->requires_grad) n->requires_grad = true;
    }
    n->inputs = std::move(inputs);
    return n;
}

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ShapeError(std::string(op) + ": shapes " + a.shape_str() + " and " + b.shape_str() +
                         " do not match");
    }
}

} // namespace

Tensor Tensor::zeros(std::size_t rows, std::size_t cols, bool requires_grad) {
    auto n = make_node("leaf", rows, cols, {});
    n->requires_grad = requires_grad;
    return Tensor(n);
}

Tensor Tensor::full(std::size_t rows, std::size_t cols, double value, bool requires_grad) {
    Tensor t = zeros(rows, cols, requires_grad);
    std::fill(t.data().begin(), t.data().end(), value);
    return t;
}

Tensor Tensor::from(std::size_t rows, std::size_t cols, std::vector<double> values,
                    bool requires_grad) {
    if (values.size() != rows * cols) {
        throw ShapeError("Tensor::from: " + std::to_string(values.size()) +
                         " values for shape " + shape_of(rows, cols));
    }
    Tensor t = zeros(rows, cols, requires_grad);
    t.data() = std::move(values);
    return t;
}

Tensor Tensor::randn(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double stddev,
                     bool requires_grad) {
    Tensor t = zeros(rows, cols, requires_grad);
    std::normal_distribution<double> dist(0.0, stddev);
    for (auto& v : t.data()) v = dist(rng);
    return t;
}

double Tensor::value() const {
    if (size() != 1) throw ContractError("value(): tensor " + shape_str() + " is not scalar");
    return node_->data[0];
}

std::string Tensor::shape_str() const { return shape_of(rows(), cols()); }

// ---- binary elementwise ----

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape("add", a, b);
    auto n = make_node("add", a.rows(), a.cols(), {a.node(), b.node()});
    const auto& av = a.data();
    const auto& bv = b.data();
    for (std::size_t i = 0; i < n->data.size(); ++i) n->data[i] = av[i] + bv[i];
    if (n->requires_grad) {
        n->backward_fn = [](TensorNode& self) {
            for (int k = 0; k < 2; ++k) {
                auto& in = self.inputs[k];
                if (!in->requires_grad) continue;
                auto& g = in->ensure_grad();
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
            }
        };
    }
    return Tensor(n);
}

Tensor add_row(const Tensor& a, const Tensor& row) {
    if (row.rows() != 1 || row.cols() != a.cols()) {
        throw ShapeError("add_row: " + a.shape_str() + " + " + row.shape_str());
    }
    auto n = make_node("add_row", a.rows(), a.cols(), {a.node(), row.node()});
    const std::size_t m = a.rows(), c = a.cols();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < c; ++j)
            n->data[i * c + j] = a.data()[i * c + j] + row.data()[j];
    if (n->requires_grad) {
        n->backward_fn = [m, c](TensorNode& self) {
            if (self.inputs[0]->requires_grad) {
                auto& g = self.inputs[0]->ensure_grad();
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
            }
            if (self.inputs[1]->requires_grad) {
                auto& g = self.inputs[1]->ensure_grad();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < c; ++j) g[j] += self.grad[i * c + j];
            }
        };
    }
    return Tensor(n);
}

Tensor add_col(const Tensor& a, const Tensor& col) {
    if (col.cols() != 1 || col.rows() != a.rows()) {
        throw ShapeError("add_col: " + a.shape_str() + " + " + col.shape_str());
    }
    auto n = make_node("add_col", a.rows(), a.cols(), {a.node(), col.node()});
    const std::size_t m = a.rows(), c = a.cols();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < c; ++j)
            n->data[i * c + j] = a.data()[i * c + j] + col.data()[i];
    if (n->requires_grad) {
        n->backward_fn = [m, c](TensorNode& self) {
            if (self.inputs[0]->requires_grad) {
                auto& g = self.inputs[0]->ensure_grad();
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
            }
            if (self.inputs[1]->requires_grad) {
                auto& g = self.inputs[1]->ensure_grad();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < c; ++j) g[i] += self.grad[i * c + j];
            }
        };
    }
    return Tensor(n);
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
    check_same_shape("hadamard", a, b);
    auto n = make_node("hadamard", a.rows(), a.cols(), {a.node(), b.node()});
    for (std::size_t i = 0; i < n->data.size(); ++i) n->data[i] = a.data()[i] * b.data()[i];
    if (n->requires_grad) {
        n->backward_fn = [](TensorNode& self) {
            const auto& av = self.inputs[0]->data;
            const auto& bv = self.inputs[1]->data;
            if (self.inputs[0]->requires_grad) {
                auto& g = self.inputs[0]->ensure_grad();
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * bv[i];
            }
            if (self.inputs[1]->requires_grad) {
                auto& g = self.inputs[1]->ensure_grad();
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * av[i];
            }
        };
    }
    return Tensor(n);
}

Tensor affine(const Tensor& a, double k, double c) {
    auto n = make_node("affine", a.rows(), a.cols(), {a.node()});
    for (std::size_t i = 0; i < n->data.size(); ++i) n->data[i] = k * a.data()[i] + c;
    if (n->requires_grad) {
        n->backward_fn = [k](TensorNode& self) {
            auto& g = self.inputs[0]->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += k * self.grad[i];
        };
    }
    return Tensor(n);
}

Tensor scale(const Tensor& a, double k) { return affine(a, k, 0.0); }

// ---- unary nonlinearities ----

Tensor sigmoid(const Tensor& a) {
    auto n = make_node("sigmoid", a.rows(), a.cols(), {a.node()});
    for (std::size_t i = 0; i < n->data.size(); ++i) {
        double x = a.data()[i];
        // split on sign to avoid overflow in exp
        n->data[i] = x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    }
    if (n->requires_grad) {
        n->backward_fn = [](TensorNode& self) {
            auto& g = self.inputs[0]->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) {
                double y = self.data[i];
                g[i] += self.grad[i] * y * (1.0 - y);
            }
        };
    }
    return Tensor(n);
}

Tensor relu(const Tensor& a) {
    auto n = make_node("relu", a.rows(), a.cols(), {a.node()});
    for (std::size_t i = 0; i < n->data.size(); ++i) n->data[i] = a.data()[i] > 0 ? a.data()[i] : 0.0;
    if (n->requires_grad) {
        n->backward_fn = [](TensorNode& self) {
            auto& g = self.inputs[0]->ensure_grad();
            const auto& x = self.inputs[0]->data;
            for (std::size_t i = 0; i < g.size(); ++i)
                if (x[i] > 0) g[i] += self.grad[i];
        };
    }
    return Tensor(n);
}

// ---- linear algebra ----

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: inner dimensions of " + a.shape_str() + " and " + b.shape_str() +
                         " do not agree");
    }
    const std::size_t m = a.rows(), k = a.cols(), p = b.cols();
    auto n = make_node("matmul", m, p, {a.node(), b.node()});
    const double* av = a.data().data();
    const double* bv = b.data().data();
    double* out = n->data.data();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double aik = av[i * k + kk];
            if (aik == 0.0) continue;
            const double* brow = bv + kk * p;
            double* orow = out + i * p;
            for (std::size_t j = 0; j < p; ++j) orow[j] += aik * brow[j];
        }
    }
    if (n->requires_grad) {
        n->backward_fn = [m, k, p](TensorNode& self) {
            const auto& av = self.inputs[0]->data;
            const auto& bv = self.inputs[1]->data;
            if (self.inputs[0]->requires_grad) {
                auto& ga = self.inputs[0]->ensure_grad();
                // dA = G * B^T
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t kk = 0; kk < k; ++kk) {
                        double acc = 0.0;
                        for (std::size_t j = 0; j < p; ++j)
                            acc += self.grad[i * p + j] * bv[kk * p + j];
                        ga[i * k + kk] += acc;
                    }
            }
            if (self.inputs[1]->requires_grad) {
                auto& gb = self.inputs[1]->ensure_grad();
                // dB = A^T * G
                for (std::size_t kk = 0; kk < k; ++kk)
                    for (std::size_t i = 0; i < m; ++i) {
                        const double aik = av[i * k + kk];
                        if (aik == 0.0) continue;
                        for (std::size_t j = 0; j < p; ++j)
                            gb[kk * p + j] += aik * self.grad[i * p + j];
                    }
            }
        };
    }
    return Tensor(n);
}

Tensor transpose(const Tensor& a) {
    const std::size_t m = a.rows(), c = a.cols();
    auto n = make_node("transpose", c, m, {a.node()});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < c; ++j) n->data[j * m + i] = a.data()[i * c + j];
    if (n->requires_grad) {
        n->backward_fn = [m, c](TensorNode& self) {
            auto& g = self.inputs[0]->ensure_grad();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[j * m + i];
        };
    }
    return Tensor(n);
}

// ---- structural ops ----

Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("concat_rows: no inputs");
    const std::size_t c = parts[0].cols();
    std::size_t m = 0;
    std::vector<std::shared_ptr<TensorNode>> ins;
    for (const auto& p : parts) {
        if (p.cols() != c)
            throw ShapeError("concat_rows: column mismatch " + parts[0].shape_str() + " vs " +
                             p.shape_str());
        m += p.rows();
        ins.push_back(p.node());
    }
    auto n = make_node("concat_rows", m, c, std::move(ins));
    std::size_t r0 = 0;
    for (const auto& p : parts) {
        std::copy(p.data().begin(), p.data().end(), n->data.begin() + r0 * c);
        r0 += p.rows();
    }
    if (n->requires_grad) {
        n->backward_fn = [c](TensorNode& self) {
            std::size_t r0 = 0;
            for (auto& in : self.inputs) {
                const std::size_t sz = in->data.size();
                if (in->requires_grad) {
                    auto& g = in->ensure_grad();
                    for (std::size_t i = 0; i < sz; ++i) g[i] += self.grad[r0 * c + i];
                }
                r0 += in->rows;
            }
        };
    }
    return Tensor(n);
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
    if (a.rows() != b.rows())
        throw ShapeError("concat_cols: row mismatch " + a.shape_str() + " vs " + b.shape_str());
    const std::size_t m = a.rows(), ca = a.cols(), cb = b.cols();
    auto n = make_node("concat_cols", m, ca + cb, {a.node(), b.node()});
    for (std::size_t i = 0; i < m; ++i) {
        std::copy(a.data().begin() + i * ca, a.data().begin() + (i + 1) * ca,
                  n->data.begin() + i * (ca + cb));
        std::copy(b.data().begin() + i * cb, b.data().begin() + (i + 1) * cb,
                  n->data.begin() + i * (ca + cb) + ca);
    }
    if (n->requires_grad) {
        n->backward_fn = [m, ca, cb](TensorNode& self) {
            if (self.inputs[0]->requires_grad) {
                auto& g = self.inputs[0]->ensure_grad();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < ca; ++j)
                        g[i * ca + j] += self.grad[i * (ca + cb) + j];
            }
            if (self.inputs[1]->requires_grad) {
                auto& g = self.inputs[1]->ensure_grad();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < cb; ++j)
                        g[i * cb + j] += self.grad[i * (ca + cb) + ca + j];
            }
        };
    }
    return Tensor(n);
}

Tensor slice_rows(const Tensor& a, std::size_t start, std::size_t len) {
    if (start + len > a.rows())
        throw ShapeError("slice_rows: [" + std::to_string(start) + ", " +
                         std::to_string(start + len) + ") out of " + a.shape_str());
    const std::size_t c = a.cols();
    auto n = make_node("slice_rows", len, c, {a.node()});
    std::copy(a.data().begin() + start * c, a.data().begin() + (start + len) * c, n->data.begin());
    if (n->requires_grad) {
        n->backward_fn = [start, c](TensorNode& self) {
            auto& g = self.inputs[0]->ensure_grad();
            for (std::size_t i = 0; i < self.data.size(); ++i) g[start * c + i] += self.grad[i];
        };
    }
    return Tensor(n);
}

Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t len) {
    if (start + len > a.cols())
        throw ShapeError("slice_cols: [" + std::to_string(start) + ", " +
                         std::to_string(start + len) + ") out of " + a.shape_str());
    const std::size_t m = a.rows(), c = a.cols();
    auto n = make_node("slice_cols", m, len, {a.node()});
    for (std::size_t i = 0; i < m; ++i)
        std::copy(a.data().begin() + i * c + start, a.data().begin() + i * c + start + len,
                  n->data.begin() + i * len);
    if (n->requires_grad) {
        n->backward_fn = [m, c, start, len](TensorNode& self) {
            auto& g = self.inputs[0]->ensure_grad();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < len; ++j)
                    g[i * c + start + j] += self.grad[i * len + j];
        };
    }
    return Tensor(n);
}

// ---- reductions ----

Tensor sum(const Tensor& a) {
    auto n = make_node("sum", 1, 1, {a.node()});
    double acc = 0.0;
    for (double v : a.data()) acc += v;
    n->data[0] = acc;
    if (n->requires_grad) {
        n->backward_fn = [](TensorNode& self) {
            auto& g = self.inputs[0]->ensure_grad();
            for (auto& v : g) v += self.grad[0];
        };
    }
    return Tensor(n);
}

Tensor mean(const Tensor& a) {
    if (a.size() == 0) throw ContractError("mean: empty tensor");
    return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

// ---- softmax family ----

namespace {

// Resolves the exclusion mask for row i; mask may be empty (nothing
// excluded), a [1 x cols] row, or a full matrix.
struct MaskView {
    const std::vector<double>* vals = nullptr;
    std::size_t cols = 0;
    bool per_row = false;

    bool excluded(std::size_t i, std::size_t j) const {
        if (!vals) return false;
        return (*vals)[(per_row ? i * cols : 0) + j] != 0.0;
    }
};

MaskView mask_view(const Tensor& x, const Tensor& mask) {
    MaskView mv;
    if (!mask.defined()) return mv;
    if (mask.rows() == x.rows() && mask.cols() == x.cols()) {
        mv.per_row = true;
    } else if (mask.rows() == 1 && mask.cols() == x.cols()) {
        mv.per_row = false;
    } else {
        throw ShapeError("masked_softmax: mask " + mask.shape_str() +
                         " not broadcastable to " + x.shape_str());
    }
    mv.vals = &mask.data();
    mv.cols = x.cols();
    return mv;
}

} // namespace

Tensor masked_softmax(const Tensor& x, const Tensor& mask) {
    const std::size_t m = x.rows(), c = x.cols();
    MaskView mv = mask_view(x, mask);
    std::vector<std::shared_ptr<TensorNode>> ins = {x.node()};
    auto n = make_node("masked_softmax", m, c, std::move(ins));
    // keep a copy of the exclusion pattern for the backward rule
    auto excl = std::make_shared<std::vector<std::uint8_t>>(m * c, 0);
    for (std::size_t i = 0; i < m; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < c; ++j) {
            if (mv.excluded(i, j)) {
                (*excl)[i * c + j] = 1;
            } else {
                mx = std::max(mx, x.data()[i * c + j]);
            }
        }
        if (mx == -std::numeric_limits<double>::infinity()) {
            throw ContractError("masked_softmax: row " + std::to_string(i) + " is fully masked");
        }
        double denom = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            if ((*excl)[i * c + j]) continue;
            double e = std::exp(x.data()[i * c + j] - mx);
            n->data[i * c + j] = e;
            denom += e;
        }
        for (std::size_t j = 0; j < c; ++j) {
            if ((*excl)[i * c + j]) {
                n->data[i * c + j] = 0.0;
            } else {
                n->data[i * c + j] /= denom;
            }
        }
    }
    if (n->requires_grad) {
        n->backward_fn = [m, c, excl](TensorNode& self) {
            auto& g = self.inputs[0]->ensure_grad();
            for (std::size_t i = 0; i < m; ++i) {
                double dot = 0.0;
                for (std::size_t j = 0; j < c; ++j)
                    dot += self.grad[i * c + j] * self.data[i * c + j];
                for (std::size_t j = 0; j < c; ++j) {
                    if ((*excl)[i * c + j]) continue;
                    g[i * c + j] += self.data[i * c + j] * (self.grad[i * c + j] - dot);
                }
            }
        };
    }
    return Tensor(n);
}

Tensor softmax(const Tensor& x) { return masked_softmax(x, Tensor()); }

Tensor log_softmax(const Tensor& x) {
    const std::size_t m = x.rows(), c = x.cols();
    if (c == 0) throw ContractError("log_softmax: empty rows");
    auto n = make_node("log_softmax", m, c, {x.node()});
    for (std::size_t i = 0; i < m; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < c; ++j) mx = std::max(mx, x.data()[i * c + j]);
        double denom = 0.0;
        for (std::size_t j = 0; j < c; ++j) denom += std::exp(x.data()[i * c + j] - mx);
        const double lse = mx + std::log(denom);
        for (std::size_t j = 0; j < c; ++j) n->data[i * c + j] = x.data()[i * c + j] - lse;
    }
    if (n->requires_grad) {
        n->backward_fn = [m, c](TensorNode& self) {
            auto& g = self.inputs[0]->ensure_grad();
            for (std::size_t i = 0; i < m; ++i) {
                double gsum = 0.0;
                for (std::size_t j = 0; j < c; ++j) gsum += self.grad[i * c + j];
                for (std::size_t j = 0; j < c; ++j) {
                    const double p = std::exp(self.data[i * c + j]);
                    g[i * c + j] += self.grad[i * c + j] - p * gsum;
                }
            }
        };
    }
    return Tensor(n);
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    const std::size_t m = x.rows(), c = x.cols();
    if (gain.rows() != 1 || gain.cols() != c || bias.rows() != 1 || bias.cols() != c) {
        throw ShapeError("layer_norm: gain " + gain.shape_str() + " / bias " + bias.shape_str() +
                         " do not match last axis of " + x.shape_str());
    }
    auto n = make_node("layer_norm", m, c, {x.node(), gain.node(), bias.node()});
    auto stats = std::make_shared<std::vector<double>>(2 * m); // mean, inv_std per row
    for (std::size_t i = 0; i < m; ++i) {
        double mu = 0.0;
        for (std::size_t j = 0; j < c; ++j) mu += x.data()[i * c + j];
        mu /= static_cast<double>(c);
        double var = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            const double d = x.data()[i * c + j] - mu;
            var += d * d;
        }
        var /= static_cast<double>(c);
        const double inv = 1.0 / std::sqrt(var + eps);
        (*stats)[2 * i] = mu;
        (*stats)[2 * i + 1] = inv;
        for (std::size_t j = 0; j < c; ++j) {
            const double xh = (x.data()[i * c + j] - mu) * inv;
            n->data[i * c + j] = gain.data()[j] * xh + bias.data()[j];
        }
    }
    if (n->requires_grad) {
        n->backward_fn = [m, c, stats](TensorNode& self) {
            const auto& xv = self.inputs[0]->data;
            const auto& gv = self.inputs[1]->data;
            const bool need_x = self.inputs[0]->requires_grad;
            const bool need_g = self.inputs[1]->requires_grad;
            const bool need_b = self.inputs[2]->requires_grad;
            for (std::size_t i = 0; i < m; ++i) {
                const double mu = (*stats)[2 * i];
                const double inv = (*stats)[2 * i + 1];
                double sum_dxh = 0.0, sum_dxh_xh = 0.0;
                for (std::size_t j = 0; j < c; ++j) {
                    const double xh = (xv[i * c + j] - mu) * inv;
                    const double dxh = self.grad[i * c + j] * gv[j];
                    sum_dxh += dxh;
                    sum_dxh_xh += dxh * xh;
                }
                if (need_x) {
                    auto& gx = self.inputs[0]->ensure_grad();
                    for (std::size_t j = 0; j < c; ++j) {
                        const double xh = (xv[i * c + j] - mu) * inv;
                        const double dxh = self.grad[i * c + j] * gv[j];
                        gx[i * c + j] += inv * (dxh - sum_dxh / static_cast<double>(c) -
                                                xh * sum_dxh_xh / static_cast<double>(c));
                    }
                }
                if (need_g) {
                    auto& gg = self.inputs[1]->ensure_grad();
                    for (std::size_t j = 0; j < c; ++j) {
                        const double xh = (xv[i * c + j] - mu) * inv;
                        gg[j] += self.grad[i * c + j] * xh;
                    }
                }
                if (need_b) {
                    auto& gb = self.inputs[2]->ensure_grad();
                    for (std::size_t j = 0; j < c; ++j) gb[j] += self.grad[i * c + j];
                }
            }
        };
    }
    return Tensor(n);
}

// ---- gather ops ----

Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids) {
    const std::size_t v = table.rows(), d = table.cols();
    auto checked = std::make_shared<std::vector<int>>(ids);
    for (int id : ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= v) {
            throw IndexError("embedding_lookup: index " + std::to_string(id) +
                             " out of table " + table.shape_str());
        }
    }
    auto n = make_node("embedding_lookup", ids.size(), d, {table.node()});
    for (std::size_t i = 0; i < ids.size(); ++i)
        std::copy(table.data().begin() + ids[i] * d, table.data().begin() + (ids[i] + 1) * d,
                  n->data.begin() + i * d);
    if (n->requires_grad) {
        n->backward_fn = [checked, d](TensorNode& self) {
            auto& g = self.inputs[0]->ensure_grad();
            for (std::size_t i = 0; i < checked->size(); ++i)
                for (std::size_t j = 0; j < d; ++j)
                    g[(*checked)[i] * d + j] += self.grad[i * d + j];
        };
    }
    return Tensor(n);
}

Tensor gather_rows(const Tensor& x, const std::vector<int>& ids) {
    const std::size_t m = x.rows(), c = x.cols();
    if (ids.size() != m)
        throw ShapeError("gather_rows: " + std::to_string(ids.size()) + " indices for " +
                         x.shape_str());
    auto checked = std::make_shared<std::vector<int>>(ids);
    for (int id : ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= c) {
            throw IndexError("gather_rows: column " + std::to_string(id) + " out of " +
                             x.shape_str());
        }
    }
    auto n = make_node("gather_rows", m, 1, {x.node()});
    for (std::size_t i = 0; i < m; ++i) n->data[i] = x.data()[i * c + ids[i]];
    if (n->requires_grad) {
        n->backward_fn = [checked, c](TensorNode& self) {
            auto& g = self.inputs[0]->ensure_grad();
            for (std::size_t i = 0; i < checked->size(); ++i)
                g[i * c + (*checked)[i]] += self.grad[i];
        };
    }
    return Tensor(n);
}

Tensor dropout(const Tensor& x, double rate, std::mt19937_64& rng) {
    if (rate <= 0.0) return x;
    if (rate >= 1.0) throw ContractError("dropout: rate must be < 1");
    auto keep = std::make_shared<std::vector<std::uint8_t>>(x.size());
    std::bernoulli_distribution dist(1.0 - rate);
    for (auto& k : *keep) k = dist(rng) ? 1 : 0;
    const double inv_keep = 1.0 / (1.0 - rate);
    auto n = make_node("dropout", x.rows(), x.cols(), {x.node()});
    for (std::size_t i = 0; i < n->data.size(); ++i)
        n->data[i] = (*keep)[i] ? x.data()[i] * inv_keep : 0.0;
    if (n->requires_grad) {
        n->backward_fn = [keep, inv_keep](TensorNode& self) {
            auto& g = self.inputs[0]->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i)
                if ((*keep)[i]) g[i] += self.grad[i] * inv_keep;
        };
    }
    return Tensor(n);
}

// ---- backward sweep ----

void backward(const Tensor& loss) {
    if (!loss.defined() || loss.size() != 1)
        throw ContractError("backward: loss must be a scalar tensor");
    auto root = loss.node();
    if (!root->requires_grad) return;

    // Gather the grad-requiring subgraph without recursion.
    std::vector<TensorNode*> nodes;
    std::unordered_set<TensorNode*> seen;
    std::vector<TensorNode*> stack{root.get()};
    seen.insert(root.get());
    while (!stack.empty()) {
        TensorNode* cur = stack.back();
        stack.pop_back();
        nodes.push_back(cur);
        for (const auto& in : cur->inputs) {
            if (in->requires_grad && seen.insert(in.get()).second) stack.push_back(in.get());
        }
    }
    // Interior gradients are per-sweep scratch; only leaves accumulate.
    for (TensorNode* nd : nodes) {
        if (nd->backward_fn && !nd->grad.empty())
            std::fill(nd->grad.begin(), nd->grad.end(), 0.0);
    }
    // Creation order is a topological order: inputs precede outputs.
    std::sort(nodes.begin(), nodes.end(),
              [](const TensorNode* a, const TensorNode* b) { return a->seq > b->seq; });
    root->ensure_grad()[0] += 1.0;
    for (TensorNode* nd : nodes) {
        if (nd->backward_fn && !nd->grad.empty()) nd->backward_fn(*nd);
    }
}

} // namespace lgcm
