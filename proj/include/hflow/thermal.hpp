#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <vector>

#include "hflow/eigensolve.hpp"
#include "hflow/errors.hpp"
#include "hflow/model.hpp"
#include "hflow/spline.hpp"

namespace hflow {

// log Z = -beta*lambda1 + log sum_i exp(-beta(lambda_i - lambda1)); the shift
// keeps the sum in [1, N] for any beta.
inline double log_partition(const Model& m, double beta) {
    if (beta <= 0.0) throw Error("beta must be positive");
    const Eigen::VectorXd lam = dense_spectrum(hamiltonian(m)).values;
    double s = 0.0;
    for (Eigen::Index i = 0; i < lam.size(); ++i) s += std::exp(-beta * (lam[i] - lam[0]));
    return -beta * lam[0] + std::log(s);
}

inline double exact_partition(const Model& m, double beta) {
    return std::exp(log_partition(m, beta));
}

namespace detail {
inline double gershgorin_radius(const Eigen::MatrixXd& h) {
    return h.cwiseAbs().rowwise().sum().maxCoeff();
}

// M^p by binary exponentiation, ~log2(p) multiplications.
inline Eigen::MatrixXd matrix_power(Eigen::MatrixXd base, unsigned p) {
    Eigen::MatrixXd acc = Eigen::MatrixXd::Identity(base.rows(), base.cols());
    while (p > 0) {
        if (p & 1u) acc = acc * base;
        p >>= 1u;
        if (p > 0) base = base * base;
    }
    return acc;
}

inline Eigen::MatrixXd trotter_factor(const Model& m, double beta, int n,
                                      std::optional<double> g_override) {
    if (n < 1) throw Error("Trotter order must be >= 1");
    if (beta <= 0.0) throw Error("beta must be positive");
    const Eigen::MatrixXd h = hamiltonian(m, g_override);
    const double bound = beta * gershgorin_radius(h) / n;
    if (bound >= 1.0) throw TrotterUnstable(bound);
    return Eigen::MatrixXd::Identity(h.rows(), h.cols()) - (beta / n) * h;
}
} // namespace detail

// Tr[(I - beta H / n)^n], the linear-kernel Trotter approximant of Z. The
// Gershgorin bound beta*rho/n < 1 keeps the factor positive definite, which
// the n -> infinity limit needs.
inline double trotter_partition(const Model& m, double beta, int n,
                                std::optional<double> g_override = {}) {
    return detail::matrix_power(detail::trotter_factor(m, beta, n, g_override),
                                static_cast<unsigned>(n))
        .trace();
}

// d/dg Tr[(A + gB)^n] = n Tr[(A+gB)^{n-1} B] with B = -(beta/n) v, i.e.
// -beta Tr[M^{n-1} v]: the implicit polynomial derivative, evaluated stably
// without ever forming the coefficients.
inline double trotter_dZdg(const Model& m, double beta, int n, double g) {
    const Eigen::MatrixXd mn1 =
        detail::matrix_power(detail::trotter_factor(m, beta, n, g), static_cast<unsigned>(n - 1));
    return -beta * (mn1 * m.v).trace();
}

enum class Extraction { explicit_coeffs, implicit };

// Z^(k)(g) as a degree-n polynomial in g. Explicit coefficients are recovered
// only for small n (Vandermonde conditioning); the implicit mode evaluates the
// same polynomial through the matrix kernel.
struct PartitionPoly {
    double beta = 0.0;
    int n = 0;
    int k = 0;
    Extraction extraction = Extraction::implicit;
    std::vector<double> h; // coefficients of g^i, size n+1 when explicit
    Model model;           // carrier for implicit evaluation

    double evaluate(double g) const {
        if (extraction == Extraction::implicit) return trotter_partition(model, beta, n, g);
        double acc = 0.0;
        for (std::size_t i = h.size(); i-- > 0;) acc = acc * g + h[i];
        return acc;
    }

    double derivative(double g) const {
        if (extraction == Extraction::implicit) return trotter_dZdg(model, beta, n, g);
        double acc = 0.0;
        for (std::size_t i = h.size(); i-- > 1;) acc = acc * g + static_cast<double>(i) * h[i];
        return acc;
    }
};

namespace detail {
inline std::vector<double> fit_poly_coeffs(const Model& m, double beta, int n,
                                           double radius) {
    const int pts = n + 1;
    Eigen::MatrixXd vand(pts, pts);
    Eigen::VectorXd z(pts);
    for (int i = 0; i < pts; ++i) {
        const double node = radius * std::cos(M_PI * (2.0 * i + 1.0) / (2.0 * pts));
        double p = 1.0;
        for (int j = 0; j < pts; ++j) {
            vand(i, j) = p;
            p *= node;
        }
        z[i] = trotter_partition(m, beta, n, node);
    }
    const Eigen::VectorXd c = vand.colPivHouseholderQr().solve(z);
    return {c.data(), c.data() + pts};
}
} // namespace detail

// Recover the h_i by sampling at Chebyshev nodes and solving the Vandermonde
// system; a refit on shrunken nodes cross-checks every coefficient. Structural
// zeros (e.g. odd powers for tridiagonal v) sit at round-off, so the refit
// comparison carries an absolute noise floor alongside the relative one.
inline PartitionPoly extract_partition_poly(const Model& m, double beta, int n,
                                            int n_cap = 12, double fit_radius = 1.0) {
    PartitionPoly poly;
    poly.beta = beta;
    poly.n = n;
    poly.k = static_cast<int>(m.dim());
    poly.model = m;
    if (n > n_cap) {
        poly.extraction = Extraction::implicit;
        return poly;
    }
    poly.h = detail::fit_poly_coeffs(m, beta, n, fit_radius);
    const std::vector<double> refit = detail::fit_poly_coeffs(m, beta, n, 0.8 * fit_radius);
    double hmax = 0.0;
    for (double hi : poly.h) hmax = std::max(hmax, std::abs(hi));
    for (int i = 0; i <= n; ++i) {
        const double diff = std::abs(poly.h[i] - refit[i]);
        if (diff > std::max(1e-8 * std::abs(poly.h[i]), 1e-12 * hmax))
            throw IllConditioned("partition polynomial fit unstable at coefficient " +
                                 std::to_string(i) + " (refit shift " + std::to_string(diff) +
                                 ")");
    }
    poly.extraction = Extraction::explicit_coeffs;
    return poly;
}

struct ThermalStep {
    int k = 0;
    double beta = 0.0;
    int n = 0;
    double g_in = 0.0, g_out = 0.0;
    double z_target = 0.0, z_matched = 0.0;
    double residual = 0.0; // |z_matched - z_target|
};

struct ThermalConfig {
    double beta = 1.0;
    int n = 64;
    int k_min = 2;
    double scan_radius = -1.0; // < 0 means the default |g_k| + 2
    int scan_points = 512;
    double match_tol = 1e-12; // relative to Z_target
    int newton_max_iter = 60;
};

// Match Z^(k)(g_k) = Z^(k-1)(g') for the renormalized coupling: Newton from
// g_k with the analytic derivative, safeguarded by a deterministic scan +
// bisection; among multiple roots the closest to g_k wins (continuity).
inline ThermalStep thermal_reduction_step(const Model& m, double g_k,
                                          const ThermalConfig& cfg = {}) {
    const Eigen::Index k = m.dim();
    if (k < 2) throw DimensionMismatch("thermal reduction needs dimension >= 2");

    ThermalStep step;
    step.k = static_cast<int>(k);
    step.beta = cfg.beta;
    step.n = cfg.n;
    step.g_in = g_k;
    step.z_target = trotter_partition(m, cfg.beta, cfg.n, g_k);

    const Model small = detail::head(m, k - 1);
    auto phi = [&](double g) {
        return trotter_partition(small, cfg.beta, cfg.n, g) - step.z_target;
    };
    const double radius = cfg.scan_radius > 0.0 ? cfg.scan_radius : std::abs(g_k) + 2.0;
    const double tol = cfg.match_tol * std::abs(step.z_target);

    auto newton_from = [&](double g0) -> std::optional<double> {
        double g = g0;
        for (int it = 0; it < cfg.newton_max_iter; ++it) {
            double f;
            try {
                f = phi(g);
            } catch (const TrotterUnstable&) {
                return std::nullopt;
            }
            if (std::abs(f) <= tol) return g;
            const double df = trotter_dZdg(small, cfg.beta, cfg.n, g);
            if (df == 0.0) return std::nullopt;
            const double gn = g - f / df;
            if (!std::isfinite(gn) || std::abs(gn - g_k) > 4.0 * radius) return std::nullopt;
            g = gn;
        }
        return std::nullopt;
    };

    std::optional<double> root = newton_from(g_k);
    if (!root) {
        // deterministic scan for the bracket closest to g_k, then bisect
        double best_lo = 0.0, best_hi = 0.0;
        bool found = false;
        double prev_g = 0.0, prev_f = 0.0;
        bool have_prev = false;
        for (int i = 0; i <= cfg.scan_points; ++i) {
            const double g = g_k - radius + 2.0 * radius * i / cfg.scan_points;
            double f;
            try {
                f = phi(g);
            } catch (const TrotterUnstable&) {
                have_prev = false;
                continue;
            }
            if (std::abs(f) <= tol) {
                root = g;
                break;
            }
            if (have_prev && ((prev_f < 0.0) != (f < 0.0))) {
                const double mid = 0.5 * (prev_g + g);
                if (!found || std::abs(mid - g_k) < std::abs(0.5 * (best_lo + best_hi) - g_k)) {
                    best_lo = prev_g;
                    best_hi = g;
                    found = true;
                }
            }
            prev_g = g;
            prev_f = f;
            have_prev = true;
        }
        if (!root) {
            if (!found)
                throw NoThermalRoot("no coupling matches the partition function within scan "
                                    "radius " + std::to_string(radius) + " around g = " +
                                    std::to_string(g_k));
            double lo = best_lo, hi = best_hi, flo = phi(lo);
            for (int it = 0; it < 200 && hi - lo > 1e-15 * (1.0 + std::abs(lo)); ++it) {
                const double mid = 0.5 * (lo + hi);
                const double fm = phi(mid);
                if ((fm < 0.0) == (flo < 0.0)) {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            root = newton_from(0.5 * (lo + hi)).value_or(0.5 * (lo + hi));
        }
    }

    step.g_out = *root;
    step.z_matched = trotter_partition(small, cfg.beta, cfg.n, step.g_out);
    step.residual = std::abs(step.z_matched - step.z_target);
    return step;
}

struct ThermalTrajectory {
    std::vector<ThermalStep> steps;
    std::optional<int> breakdown_at;
    std::string breakdown_reason;
};

inline ThermalTrajectory run_thermal_flow(const Model& model, const ThermalConfig& cfg = {}) {
    const int n_dim = static_cast<int>(model.dim());
    if (cfg.k_min < 1 || cfg.k_min >= n_dim)
        throw ConfigError("thermal.k_min must satisfy 1 <= k_min < N (got " +
                          std::to_string(cfg.k_min) + " for N = " + std::to_string(n_dim) + ")");
    ThermalTrajectory traj;
    Model current = model;
    double g = model.g;
    for (int k = n_dim; k > cfg.k_min; --k) {
        ThermalStep step;
        try {
            step = thermal_reduction_step(current, g, cfg);
        } catch (const Error& e) {
            traj.breakdown_at = k;
            traj.breakdown_reason = e.what();
            break;
        }
        traj.steps.push_back(step);
        current = detail::head(current, k - 1);
        g = step.g_out;
        current.g = g;
    }
    return traj;
}

// dg/dx = -(sum_i h_i'(x) g^i) / (sum_i i h_i(x) g^{i-1}): conservation of the
// Trotter polynomial along the thermal flow, with h_i(x) splined over k.
inline double thermal_flow_rhs(double x, double g, const std::vector<CubicSpline>& h_splines,
                               double singularity_floor = 1e-12) {
    double num = 0.0, den = 0.0, den_scale = 0.0;
    double gp = 1.0; // g^i
    for (std::size_t i = 0; i < h_splines.size(); ++i) {
        num += h_splines[i].derivative(x) * gp;
        if (i + 1 < h_splines.size()) {
            const double term = (static_cast<double>(i) + 1.0) * h_splines[i + 1](x) * gp;
            den += term;
            den_scale += std::abs(term);
        }
        gp *= g;
    }
    if (std::abs(den) <= singularity_floor * std::max(1.0, den_scale))
        throw FlowSingularity(x, den);
    return -num / den;
}

struct GapRow {
    double beta = 0.0;
    double free_energy = 0.0; // -(1/beta) log Z
    double lambda1 = 0.0;
    double gap = 0.0; // lambda1 - free_energy, monotone to 0 as beta grows
};

inline std::vector<GapRow> beta_limit_check(const Model& m, const std::vector<double>& betas) {
    const double lambda1 = dense_spectrum(hamiltonian(m)).values[0];
    std::vector<GapRow> rows;
    for (double beta : betas) {
        GapRow r;
        r.beta = beta;
        r.free_energy = -log_partition(m, beta) / beta;
        r.lambda1 = lambda1;
        r.gap = lambda1 - r.free_energy;
        rows.push_back(r);
    }
    return rows;
}

} // namespace hflow
