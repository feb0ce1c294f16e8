#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "hflow/errors.hpp"
#include "hflow/rng.hpp"

namespace hflow {

struct EigenPair {
    double value = 0.0;
    Eigen::VectorXd vector; // unit norm, largest-|component| entry positive
    double residual = 0.0;  // ||H x - value x||_2
};

namespace detail {
inline void fix_sign(Eigen::VectorXd& x) {
    Eigen::Index imax = 0;
    x.cwiseAbs().maxCoeff(&imax);
    if (x[imax] < 0.0) x = -x;
}
} // namespace detail

struct Spectrum {
    Eigen::VectorXd values;  // ascending
    Eigen::MatrixXd vectors; // columns, matching order
};

inline Spectrum dense_spectrum(const Eigen::MatrixXd& h) {
    if (h.rows() != h.cols()) throw DimensionMismatch("spectrum of non-square matrix");
    if (!h.allFinite()) throw NonFinite("matrix contains NaN/Inf entries");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
    if (es.info() != Eigen::Success)
        throw NoConvergence(0, std::numeric_limits<double>::infinity());
    return {es.eigenvalues(), es.eigenvectors()};
}

inline EigenPair dense_lowest(const Eigen::MatrixXd& h) {
    Spectrum s = dense_spectrum(h);
    EigenPair p{s.values[0], s.vectors.col(0), 0.0};
    detail::fix_sign(p.vector);
    p.residual = (h * p.vector - p.value * p.vector).norm();
    return p;
}

struct LanczosOptions {
    int max_iterations = 300;
    double tolerance = 1e-12; // relative to max(1, max|H_ij|), on beta_j * |s_last|
    std::uint64_t start_seed = 0x5EEDULL;
    std::vector<double>* estimates = nullptr;      // per-iteration lowest Ritz value
    std::vector<Eigen::VectorXd>* basis_out = nullptr; // final Krylov basis, if wanted
};

// Lowest eigenpair by Lanczos with full reorthogonalization (applied twice per
// step, which keeps the basis orthogonal to machine precision and the Ritz
// estimates variational). On happy breakdown the Krylov space is invariant but
// may miss the ground state, so iteration restarts with a fresh orthogonalized
// random direction.
inline EigenPair lanczos_lowest(const Eigen::MatrixXd& h, LanczosOptions opt = {}) {
    const Eigen::Index n = h.rows();
    if (h.rows() != h.cols()) throw DimensionMismatch("spectrum of non-square matrix");
    if (!h.allFinite()) throw NonFinite("matrix contains NaN/Inf entries");
    if (n == 1) return {h(0, 0), Eigen::VectorXd::Ones(1), 0.0};

    SplitMix64 rng(opt.start_seed);
    auto random_unit = [&]() {
        Eigen::VectorXd x(n);
        for (Eigen::Index i = 0; i < n; ++i) x[i] = rng.symmetric_unit();
        x.normalize();
        return x;
    };

    std::vector<Eigen::VectorXd> basis;
    std::vector<double> alpha, beta; // tridiagonal entries; beta[j] couples j, j+1
    basis.push_back(random_unit());

    const double hscale = std::max(h.cwiseAbs().maxCoeff(), 1e-300);
    double best_residual = std::numeric_limits<double>::infinity();
    EigenPair best;

    auto finish = [&](EigenPair p) {
        detail::fix_sign(p.vector);
        p.residual = (h * p.vector - p.value * p.vector).norm();
        if (opt.basis_out) *opt.basis_out = basis;
        return p;
    };

    for (int it = 1; it <= opt.max_iterations; ++it) {
        const Eigen::VectorXd& q = basis.back();
        Eigen::VectorXd w = h * q;
        alpha.push_back(q.dot(w));
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& b : basis) w -= b.dot(w) * b;
        const double b_next = w.norm();

        const Eigen::Index m = static_cast<Eigen::Index>(alpha.size());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
        const Eigen::VectorXd diag = Eigen::Map<const Eigen::VectorXd>(alpha.data(), m);
        const Eigen::VectorXd subdiag =
            beta.empty() ? Eigen::VectorXd()
                         : Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(beta.data(), m - 1));
        es.computeFromTridiagonal(diag, subdiag, Eigen::ComputeEigenvectors);
        if (es.info() != Eigen::Success) throw NoConvergence(it, best_residual);
        const double ritz = es.eigenvalues()[0];
        const Eigen::VectorXd s = es.eigenvectors().col(0);
        if (opt.estimates) opt.estimates->push_back(ritz);

        const double residual = b_next * std::abs(s[m - 1]);
        if (residual < best_residual) {
            Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
            for (Eigen::Index j = 0; j < m; ++j) x += s[j] * basis[static_cast<size_t>(j)];
            x.normalize();
            best = {ritz, x, residual};
            best_residual = residual;
        }
        if (best_residual <= opt.tolerance * std::max(1.0, hscale) || m == n)
            return finish(best);

        if (b_next <= 1e-14 * hscale) {
            // happy breakdown: restart orthogonal to everything found so far
            Eigen::VectorXd x = random_unit();
            for (int pass = 0; pass < 2; ++pass)
                for (const auto& b : basis) x -= b.dot(x) * b;
            const double nrm = x.norm();
            if (nrm <= 1e-12) return finish(best); // basis spans the whole space
            basis.push_back(x / nrm);
            beta.push_back(0.0);
        } else {
            basis.push_back(w / b_next);
            beta.push_back(b_next);
        }
    }
    throw NoConvergence(opt.max_iterations, best_residual);
}

// Dense below the threshold (authoritative and cheap there), Lanczos above.
inline EigenPair lowest_pair(const Eigen::MatrixXd& h, Eigen::Index dense_threshold = 64) {
    if (h.rows() <= dense_threshold) return dense_lowest(h);
    return lanczos_lowest(h);
}

} // namespace hflow
