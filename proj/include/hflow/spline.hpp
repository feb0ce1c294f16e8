#pragma once

#include <cstddef>
#include <vector>

#include "hflow/errors.hpp"

namespace hflow {

// Natural cubic spline with analytic first derivative. Outside the knot range
// the boundary cubics extend, which is adequate here: flow integration never
// leaves [k_min, N] by more than round-off.
class CubicSpline {
  public:
    CubicSpline() = default;

    CubicSpline(std::vector<double> x, std::vector<double> y)
        : x_(std::move(x)), y_(std::move(y)) {
        const std::size_t n = x_.size();
        if (n != y_.size() || n < 2) throw DimensionMismatch("spline needs >= 2 matched knots");
        for (std::size_t i = 0; i + 1 < n; ++i)
            if (!(x_[i] < x_[i + 1]))
                throw Error("spline knots must be strictly increasing");
        m_.assign(n, 0.0); // second derivatives, natural boundary m_0 = m_{n-1} = 0
        if (n == 2) return;

        std::vector<double> diag(n - 2), rhs(n - 2), upper(n - 2, 0.0);
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const double h0 = x_[i] - x_[i - 1], h1 = x_[i + 1] - x_[i];
            diag[i - 1] = 2.0 * (h0 + h1);
            upper[i - 1] = h1;
            rhs[i - 1] = 6.0 * ((y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0);
        }
        // Thomas solve; sub-diagonal equals the previous row's upper entry
        for (std::size_t i = 1; i < n - 2; ++i) {
            const double w = (x_[i + 1] - x_[i]) / diag[i - 1];
            diag[i] -= w * upper[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        for (std::size_t i = n - 2; i-- > 0;) {
            const double up = (i + 1 < n - 2) ? upper[i] * m_[i + 2] : 0.0;
            m_[i + 1] = (rhs[i] - up) / diag[i];
        }
    }

    double operator()(double x) const {
        const std::size_t i = interval(x);
        const double h = x_[i + 1] - x_[i];
        const double t = x - x_[i], u = x_[i + 1] - x;
        return (m_[i] * u * u * u + m_[i + 1] * t * t * t) / (6.0 * h) +
               (y_[i] / h - m_[i] * h / 6.0) * u + (y_[i + 1] / h - m_[i + 1] * h / 6.0) * t;
    }

    double derivative(double x) const {
        const std::size_t i = interval(x);
        const double h = x_[i + 1] - x_[i];
        const double t = x - x_[i], u = x_[i + 1] - x;
        return (-m_[i] * u * u + m_[i + 1] * t * t) / (2.0 * h) +
               (y_[i + 1] - y_[i]) / h - (m_[i + 1] - m_[i]) * h / 6.0;
    }

    double x_min() const { return x_.front(); }
    double x_max() const { return x_.back(); }

  private:
    std::size_t interval(double x) const {
        std::size_t lo = 0, hi = x_.size() - 1;
        while (hi - lo > 1) {
            const std::size_t mid = (lo + hi) / 2;
            (x_[mid] <= x ? lo : hi) = mid;
        }
        return lo;
    }

    std::vector<double> x_, y_, m_;
};

} // namespace hflow
