#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "lgcm/tensor.hpp"

namespace lgcm::testutil {

inline double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

/// Central finite-difference check of d(f())/dx against autodiff.
/// `f` must rebuild the loss from current tensor contents on every call.
/// Returns the worst relative error over all elements of `x`.
inline double fd_check(Tensor& x, const std::function<Tensor()>& f, double step = 1e-5) {
    x.zero_grad();
    Tensor loss = f();
    backward(loss);
    std::vector<double> analytic = x.grad();
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = x.data()[i];
        x.data()[i] = orig + step;
        const double fp = f().value();
        x.data()[i] = orig - step;
        const double fm = f().value();
        x.data()[i] = orig;
        const double fd = (fp - fm) / (2.0 * step);
        worst = std::max(worst, rel_err(analytic[i], fd));
    }
    x.zero_grad();
    return worst;
}

/// Same as fd_check but only probes the listed elements (for big tables).
inline double fd_check_sampled(Tensor& x, const std::function<Tensor()>& f,
                               const std::vector<std::size_t>& elems, double step = 1e-5) {
    x.zero_grad();
    Tensor loss = f();
    backward(loss);
    std::vector<double> analytic = x.grad();
    double worst = 0.0;
    for (std::size_t i : elems) {
        const double orig = x.data()[i];
        x.data()[i] = orig + step;
        const double fp = f().value();
        x.data()[i] = orig - step;
        const double fm = f().value();
        x.data()[i] = orig;
        const double fd = (fp - fm) / (2.0 * step);
        worst = std::max(worst, rel_err(analytic[i], fd));
    }
    x.zero_grad();
    return worst;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    return worst;
}

inline void zero_tensor(Tensor t) { std::fill(t.data().begin(), t.data().end(), 0.0); }

} // namespace lgcm::testutil
