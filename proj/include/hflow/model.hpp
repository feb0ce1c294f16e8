#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "hflow/errors.hpp"
#include "hflow/rng.hpp"

namespace hflow {

// H(g) = diag(epsilon) + g * v in the coordinate basis; epsilon sorted
// non-decreasing so the last index is always the highest unperturbed level.
struct Model {
    Eigen::VectorXd epsilon;
    Eigen::MatrixXd v; // exactly symmetric as stored
    double g = 0.0;
    std::vector<std::string> warnings;

    Eigen::Index dim() const { return epsilon.size(); }
};

inline Eigen::VectorXd ladder_spectrum(Eigen::Index n, double min = 0.0, double step = 1.0) {
    Eigen::VectorXd eps(n);
    for (Eigen::Index i = 0; i < n; ++i) eps[i] = min + static_cast<double>(i) * step;
    return eps;
}

// Entries sigma*(2u - 1), u from splitmix64, filled over the upper triangle
// row-major (i <= j, diagonal included), one draw per entry, mirrored.
inline Eigen::MatrixXd random_symmetric(Eigen::Index n, double sigma, std::uint64_t seed) {
    SplitMix64 rng(seed);
    Eigen::MatrixXd v(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i; j < n; ++j)
            v(i, j) = v(j, i) = sigma * rng.symmetric_unit();
    return v;
}

inline Model make_model(Eigen::VectorXd eps, Eigen::MatrixXd v, double g) {
    const Eigen::Index n = eps.size();
    if (n < 1) throw DimensionMismatch("model dimension must be >= 1");
    if (v.rows() != n || v.cols() != n)
        throw DimensionMismatch("v is " + std::to_string(v.rows()) + "x" +
                                std::to_string(v.cols()) + " but epsilon has length " +
                                std::to_string(n));
    if (!eps.allFinite() || !v.allFinite())
        throw NonFinite("model contains NaN/Inf entries");
    const double scale = std::max(v.cwiseAbs().maxCoeff(), 1e-300);
    const double dev = (v - v.transpose()).cwiseAbs().maxCoeff() / scale;
    if (dev > 1e-12) throw NonSymmetricInput(dev);

    Model m;
    m.g = g;
    m.epsilon = std::move(eps);
    m.v = 0.5 * (v + v.transpose()); // exact symmetry even after fp round-off
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
        if (m.epsilon[i] > m.epsilon[i + 1])
            throw ConfigError("h0 spectrum must be sorted non-decreasing (violated at index " +
                              std::to_string(i) + ")");
        if (m.epsilon[i] == m.epsilon[i + 1])
            m.warnings.push_back("degenerate unperturbed levels at indices " + std::to_string(i) +
                                 "," + std::to_string(i + 1));
    }
    return m;
}

inline Model random_model(Eigen::Index n, double sigma, std::uint64_t seed, double g,
                          double eps_min = 0.0, double eps_step = 1.0) {
    return make_model(ladder_spectrum(n, eps_min, eps_step), random_symmetric(n, sigma, seed), g);
}

// Canonical 3-level fixture: ladder spectrum, nearest-neighbour perturbation.
inline Model model_a(double g = 0.5) {
    Eigen::MatrixXd v(3, 3);
    v << 0, 1, 0,
         1, 0, 1,
         0, 1, 0;
    return make_model(ladder_spectrum(3), v, g);
}

inline Eigen::MatrixXd hamiltonian(const Model& m, std::optional<double> g_override = {}) {
    const double g = g_override.value_or(m.g);
    Eigen::MatrixXd h = g * m.v;
    h.diagonal() += m.epsilon;
    return h;
}

namespace detail {
// Leading k-by-k restriction without the public k >= 2 precondition
// (thermal matching legitimately reaches 1-dimensional spaces).
inline Model head(const Model& m, Eigen::Index k) {
    Model t;
    t.epsilon = m.epsilon.head(k);
    t.v = m.v.topLeftCorner(k, k);
    t.g = m.g;
    return t;
}
} // namespace detail

// Restriction to the first k basis states; drops the highest-lying levels.
// The coupling is copied unchanged -- the caller installs renormalized values.
inline Model truncate(const Model& m, Eigen::Index k) {
    if (k < 2 || k > m.dim())
        throw DimensionMismatch("truncation size " + std::to_string(k) +
                                " out of range [2, " + std::to_string(m.dim()) + "]");
    return detail::head(m, k);
}

namespace detail {
inline void fnv1a(std::uint64_t& h, const char* s) {
    for (; *s; ++s) {
        h ^= static_cast<unsigned char>(*s);
        h *= 0x100000001B3ULL;
    }
}
inline void fnv1a(std::uint64_t& h, double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g;", x);
    fnv1a(h, buf);
}
} // namespace detail

// FNV-1a over a canonical 17-digit text serialization: stable across runs and
// platforms with IEEE doubles, independent of memory layout.
inline std::uint64_t fingerprint(const Model& m) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    detail::fnv1a(h, ("N=" + std::to_string(m.dim()) + ";").c_str());
    detail::fnv1a(h, m.g);
    for (Eigen::Index i = 0; i < m.dim(); ++i) detail::fnv1a(h, m.epsilon[i]);
    for (Eigen::Index i = 0; i < m.dim(); ++i)
        for (Eigen::Index j = i; j < m.dim(); ++j) detail::fnv1a(h, m.v(i, j));
    return h;
}

} // namespace hflow
