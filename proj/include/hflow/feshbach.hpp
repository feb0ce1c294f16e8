#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <limits>
#include <string>

#include "hflow/eigensolve.hpp"
#include "hflow/errors.hpp"
#include "hflow/model.hpp"

namespace hflow {

// Coefficient variants for the renormalization quadratic. "derived" clears the
// denominator of the projected constraint symbolically and is verifiable
// against constraint_residual; "paper" is the textbook closed form, which
// replaces the retained-row sum S1 by a1*F1N (kept for comparison, never
// silently corrected to match).
enum class Variant { derived, paper };

inline const char* to_string(Variant v) {
    return v == Variant::derived ? "derived" : "paper";
}

enum class RootSelection { closer_root, closer_root_tie, fallback_bisection, degenerate };

inline const char* to_string(RootSelection s) {
    switch (s) {
        case RootSelection::closer_root: return "closer_root";
        case RootSelection::closer_root_tie: return "closer_root_tie";
        case RootSelection::fallback_bisection: return "fallback_bisection";
        default: return "degenerate";
    }
}

struct QuadraticCoefficients {
    double a = 0.0, b = 0.0, c = 0.0;
    Variant variant = Variant::derived;
    double f1n = 0.0; // T = sum_{i<k} v_ki a_i, the Q-row overlap
};

struct ReductionStep {
    int k_from = 0, k_to = 0;
    double g_in = 0.0, g_out = 0.0;
    std::complex<double> root1{0, 0}, root2{0, 0};
    RootSelection selection = RootSelection::closer_root;
    double residual = 0.0; // constraint residual at g_out
    double lambda_target = 0.0;
    double lambda_after = 0.0; // lowest eigenvalue of the reduced model at g_out
    double drift = 0.0;        // |lambda_after - lambda_target|
    QuadraticCoefficients coefficients;
};

struct StepConfig {
    Variant variant = Variant::derived;
    double a1_floor = 1e-8;
    double denom_floor = 1e-10;   // relative to the energy scale
    double residual_tol = 1e-10;  // x max(1, |lambda*a1|) for accepted roots
    double scan_radius = -1.0;    // < 0 means the default 4|g_in| + 1
    int scan_points = 512;
    Eigen::Index dense_threshold = 64;
};

namespace detail {
inline double energy_scale(const Eigen::MatrixXd& h) {
    return std::max(1.0, h.cwiseAbs().maxCoeff());
}
} // namespace detail

// H_eff(E) = PHP + PHQ (E - QHQ)^{-1} QHP with Q the rank-1 projector onto
// the highest basis state. Exact at eigenvalues of H: decouples P from Q.
inline Eigen::MatrixXd effective_hamiltonian(const Model& m, double E,
                                             double denom_floor = 1e-10) {
    const Eigen::Index k = m.dim();
    if (k < 2) throw DimensionMismatch("effective Hamiltonian needs dimension >= 2");
    const Eigen::MatrixXd h = hamiltonian(m);
    const double h_kk = h(k - 1, k - 1);
    const double den = E - h_kk;
    if (std::abs(den) <= denom_floor * detail::energy_scale(h))
        throw SingularDenominator(E, h_kk);
    const Eigen::VectorXd coupling = h.topRightCorner(k - 1, 1);
    Eigen::MatrixXd heff = h.topLeftCorner(k - 1, k - 1);
    heff.noalias() += coupling * coupling.transpose() / den;
    return heff;
}

// F(g') - lambda*a1, where F projects the effective Hamiltonian built at
// candidate coupling g' onto the lowest basis state, with the P-space
// wavefunction frozen from the k-dimensional eigenvector. Zero exactly when
// the reduced space at g' still supports eigenvalue lambda on that vector.
inline double constraint_residual(const Model& m, const EigenPair& eig, double g_prime,
                                  const StepConfig& cfg = {}) {
    const Eigen::Index k = m.dim();
    if (k < 2) throw DimensionMismatch("constraint needs dimension >= 2");
    if (eig.vector.size() != k)
        throw DimensionMismatch("eigenvector length does not match model dimension");
    const double lambda = eig.value;
    const double a1 = eig.vector[0];
    if (std::abs(a1) <= cfg.a1_floor) throw TinyA1(a1);

    const auto a = eig.vector.head(k - 1);
    const double s1 = m.v.row(0).head(k - 1).dot(a);
    const double t = m.v.row(k - 1).head(k - 1).dot(a);
    const double h_kk = m.epsilon[k - 1] + g_prime * m.v(k - 1, k - 1);
    const double den = lambda - h_kk;
    const double scale =
        detail::energy_scale(hamiltonian(m, g_prime));
    if (std::abs(den) <= cfg.denom_floor * scale) throw SingularDenominator(lambda, h_kk);

    const double f = m.epsilon[0] * a1 + g_prime * s1 +
                     g_prime * g_prime * m.v(0, k - 1) * t / den;
    return f - lambda * a1;
}

inline QuadraticCoefficients quadratic_coefficients(const Model& m, const EigenPair& eig,
                                                    Variant variant,
                                                    double a1_floor = 1e-8) {
    const Eigen::Index k = m.dim();
    if (k < 2) throw DimensionMismatch("constraint needs dimension >= 2");
    const double lambda = eig.value;
    const double a1 = eig.vector[0];
    if (std::abs(a1) <= a1_floor) throw TinyA1(a1);

    const auto a = eig.vector.head(k - 1);
    const double s1 = m.v.row(0).head(k - 1).dot(a);
    const double t = m.v.row(k - 1).head(k - 1).dot(a);
    const double v1k = m.v(0, k - 1);
    const double vkk = m.v(k - 1, k - 1);
    const double d1 = lambda - m.epsilon[0];
    const double dk = lambda - m.epsilon[k - 1];

    QuadraticCoefficients q;
    q.variant = variant;
    q.f1n = t;
    q.c = -a1 * d1 * dk; // shared by both variants
    if (variant == Variant::derived) {
        q.a = v1k * t - s1 * vkk;
        q.b = s1 * dk + a1 * d1 * vkk;
    } else {
        q.a = (v1k - a1 * vkk) * t;
        q.b = a1 * (vkk * d1 + t * dk);
    }
    return q;
}

namespace detail {
// Numerically stable quadratic roots, complex-capable. Linear case returns the
// single root and +inf as the second.
inline std::pair<std::complex<double>, std::complex<double>>
quadratic_roots(double a, double b, double c) {
    using cd = std::complex<double>;
    if (a == 0.0) {
        if (b == 0.0)
            return {cd(std::numeric_limits<double>::quiet_NaN(), 0),
                    cd(std::numeric_limits<double>::quiet_NaN(), 0)};
        return {cd(-c / b, 0), cd(std::numeric_limits<double>::infinity(), 0)};
    }
    const double disc = b * b - 4.0 * a * c;
    if (disc >= 0.0) {
        const double sq = std::sqrt(disc);
        const double q = -0.5 * (b + (b >= 0.0 ? sq : -sq));
        const double r1 = q / a;
        const double r2 = (q != 0.0) ? c / q : -b / a - r1;
        return {cd(r1, 0), cd(r2, 0)};
    }
    const double re = -b / (2.0 * a);
    const double im = std::sqrt(-disc) / (2.0 * a);
    return {cd(re, im), cd(re, -im)};
}
} // namespace detail

// One reduction step k -> k-1: solve the quadratic for the renormalized
// coupling, pick the root closest to g_in (continuity), fall back to a
// scan+bisection of the raw constraint when the roots leave the real axis.
inline ReductionStep solve_reduction_step(const Model& m, const EigenPair& eig,
                                          const StepConfig& cfg = {}) {
    const Eigen::Index k = m.dim();
    if (k < 3) throw DimensionMismatch("reduction step needs dimension >= 3");

    ReductionStep step;
    step.k_from = static_cast<int>(k);
    step.k_to = static_cast<int>(k) - 1;
    step.g_in = m.g;
    step.lambda_target = eig.value;
    step.coefficients = quadratic_coefficients(m, eig, cfg.variant, cfg.a1_floor);
    const QuadraticCoefficients& q = step.coefficients;

    const double a1 = eig.vector[0];
    const double cscale = std::max({1.0, std::abs(eig.value - m.epsilon[0]) * std::abs(a1),
                                    std::abs(eig.value - m.epsilon[k - 1]) * std::abs(a1)});
    const double nan = std::numeric_limits<double>::quiet_NaN();

    if (std::max({std::abs(q.a), std::abs(q.b), std::abs(q.c)}) <= 1e-14 * cscale) {
        // all coefficients vanish: the constraint carries no information and
        // the coupling passes through unchanged (flagged, not fatal)
        step.selection = RootSelection::degenerate;
        step.root1 = step.root2 = {nan, nan};
        step.g_out = m.g;
        step.residual = 0.0;
    } else {
        auto [r1, r2] = detail::quadratic_roots(q.a, q.b, q.c);
        step.root1 = r1;
        step.root2 = r2;
        const bool real_roots =
            r1.imag() == 0.0 && r2.imag() == 0.0 && std::isfinite(r1.real());
        if (real_roots) {
            double c1 = std::abs(r1.real() - m.g), c2 = std::abs(r2.real() - m.g);
            if (!std::isfinite(r2.real())) c2 = std::numeric_limits<double>::infinity();
            if (c1 == c2 && r1.real() != r2.real()) {
                step.selection = RootSelection::closer_root_tie;
                step.g_out = std::abs(r1.real()) <= std::abs(r2.real()) ? r1.real() : r2.real();
            } else {
                step.selection = RootSelection::closer_root;
                step.g_out = c1 <= c2 ? r1.real() : r2.real();
            }
        } else {
            // complex roots: rescue by scanning the raw constraint for a real
            // sign change nearest g_in, else genuine breakdown
            const double radius =
                cfg.scan_radius > 0.0 ? cfg.scan_radius : 4.0 * std::abs(m.g) + 1.0;
            double best_lo = nan, best_hi = nan;
            double prev_g = m.g - radius;
            double prev_f = nan;
            bool have_prev = false;
            for (int i = 0; i <= cfg.scan_points; ++i) {
                const double gp = m.g - radius + 2.0 * radius * i / cfg.scan_points;
                double f;
                try {
                    f = constraint_residual(m, eig, gp, cfg);
                } catch (const SingularDenominator&) {
                    have_prev = false;
                    continue;
                }
                if (have_prev && ((prev_f < 0.0) != (f < 0.0))) {
                    const double mid = 0.5 * (prev_g + gp);
                    if (!std::isfinite(best_lo) ||
                        std::abs(mid - m.g) < std::abs(0.5 * (best_lo + best_hi) - m.g)) {
                        best_lo = prev_g;
                        best_hi = gp;
                    }
                }
                prev_g = gp;
                prev_f = f;
                have_prev = true;
            }
            if (!std::isfinite(best_lo))
                throw FlowBreakdown("no real renormalized coupling in step " +
                                    std::to_string(step.k_from) + " -> " +
                                    std::to_string(step.k_to) +
                                    " (complex roots, no constraint sign change in scan)");
            double lo = best_lo, hi = best_hi;
            double flo = constraint_residual(m, eig, lo, cfg);
            for (int it = 0; it < 200 && hi - lo > 1e-15 * (1.0 + std::abs(lo)); ++it) {
                const double mid = 0.5 * (lo + hi);
                const double fm = constraint_residual(m, eig, mid, cfg);
                if ((fm < 0.0) == (flo < 0.0)) {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            step.selection = RootSelection::fallback_bisection;
            step.g_out = 0.5 * (lo + hi);
        }
        step.residual = std::abs(constraint_residual(m, eig, step.g_out, cfg));
        if (step.selection == RootSelection::fallback_bisection &&
            step.residual > cfg.residual_tol * std::max(1.0, std::abs(eig.value * a1)))
            // a sign change across a denominator pole is not a root
            throw FlowBreakdown("bisection in step " + std::to_string(step.k_from) + " -> " +
                                std::to_string(step.k_to) +
                                " landed on a constraint pole, residual " +
                                std::to_string(step.residual));
    }

    Model reduced = truncate(m, k - 1);
    reduced.g = step.g_out;
    step.lambda_after = lowest_pair(hamiltonian(reduced), cfg.dense_threshold).value;
    step.drift = std::abs(step.lambda_after - step.lambda_target);
    return step;
}

} // namespace hflow
