#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <vector>

#include "hflow/eigensolve.hpp"
#include "hflow/errors.hpp"
#include "hflow/flow.hpp"
#include "hflow/model.hpp"

namespace hflow {

using cxd = std::complex<double>;

namespace detail {
inline Eigen::MatrixXcd complex_hamiltonian(const Model& m, cxd g) {
    Eigen::MatrixXcd h = g * m.v.cast<cxd>();
    h.diagonal() += m.epsilon.cast<cxd>();
    return h;
}

// Eigenvalues of the complex-symmetric H(g), sorted by (re, im) so indices
// are reproducible.
inline Eigen::VectorXcd complex_eigenvalues(const Eigen::MatrixXcd& h) {
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(h, /*computeEigenvectors=*/false);
    if (es.info() != Eigen::Success)
        throw NoConvergence(0, std::numeric_limits<double>::infinity());
    Eigen::VectorXcd lam = es.eigenvalues();
    std::sort(lam.data(), lam.data() + lam.size(), [](cxd a, cxd b) {
        if (a.real() != b.real()) return a.real() < b.real();
        return a.imag() < b.imag();
    });
    return lam;
}
} // namespace detail

struct SecularValue {
    cxd f;    // det(H(g) - lambda I), convention prod_i (lambda_i - lambda)
    cxd dfdl; // d/dlambda of the characteristic polynomial
};

// f by LU determinant (authoritative), df/dlambda from the eigenvalue product
// rule: f = prod(lambda_i - lambda) so df/dlambda = -sum_j prod_{i!=j}.
inline SecularValue secular_value(const Model& m, cxd g, cxd lambda) {
    const Eigen::Index n = m.dim();
    Eigen::MatrixXcd shifted = detail::complex_hamiltonian(m, g);
    shifted.diagonal().array() -= lambda;
    SecularValue out;
    out.f = Eigen::PartialPivLU<Eigen::MatrixXcd>(shifted).determinant();
    // det(H - lambda I) = prod(lambda_i - lambda) directly for even/odd n alike
    const Eigen::VectorXcd lam = detail::complex_eigenvalues(detail::complex_hamiltonian(m, g));
    cxd dfdl = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        cxd p = -1.0;
        for (Eigen::Index i = 0; i < n; ++i)
            if (i != j) p *= lam[i] - lambda;
        dfdl += p;
    }
    out.dfdl = dfdl;
    return out;
}

struct ExceptionalPoint {
    cxd g_e{0, 0};
    cxd lambda_e{0, 0};
    double f_residual = 0.0;
    double dfdl_residual = 0.0;
    int pair_i = 0, pair_j = 1; // merging branches, indices into the sorted spectrum
    int conjugate_of = -1;      // index of the conjugate partner in the result list
    double pair_gap = 0.0;      // min eigenvalue pair distance at g_e (ring-extrapolated)
};

struct EpSearchConfig {
    double re_min = -2.0, re_max = 2.0;
    double im_min = -2.0, im_max = 2.0;
    int grid = 12;               // seeds per axis
    int max_iterations = 80;
    double accept_residual = 1e-9;
    double cluster_radius = 1e-6;
    double pair_gap_tol = 1e-6;
    bool ring_polish = true;
};

namespace detail {

struct NewtonDerivs {
    cxd f, f_l, f_g, f_ll, f_lg;
};

// Derivatives of f(g, lambda). f_l and f_ll come from the eigenvalue product
// form (analytic, cheap); f_g uses the Jacobi trace formula f Tr[(H-lI)^{-1}v]
// where the shift is comfortably invertible, otherwise a centered difference;
// f_lg is a centered difference of f_l.
inline NewtonDerivs ep_derivatives(const Model& m, cxd g, cxd lambda) {
    const Eigen::Index n = m.dim();
    NewtonDerivs d;
    const Eigen::MatrixXcd h = complex_hamiltonian(m, g);
    const Eigen::VectorXcd lam = complex_eigenvalues(h);

    cxd f = 1.0;
    double min_sep = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n; ++i) {
        f *= lam[i] - lambda;
        min_sep = std::min(min_sep, std::abs(lam[i] - lambda));
    }
    d.f = f;
    cxd fl = 0.0, fll = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        cxd p = -1.0;
        for (Eigen::Index i = 0; i < n; ++i)
            if (i != j) p *= lam[i] - lambda;
        fl += p;
    }
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index k = j + 1; k < n; ++k) {
            cxd p = 2.0;
            for (Eigen::Index i = 0; i < n; ++i)
                if (i != j && i != k) p *= lam[i] - lambda;
            fll += p;
        }
    d.f_l = fl;
    d.f_ll = fll;

    const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
    if (min_sep > 1e-6 * scale) {
        Eigen::MatrixXcd shifted = h;
        shifted.diagonal().array() -= lambda;
        const Eigen::MatrixXcd inv_v =
            Eigen::PartialPivLU<Eigen::MatrixXcd>(shifted).solve(m.v.cast<cxd>());
        d.f_g = d.f * inv_v.trace(); // Jacobi: d det(A)/dg = det(A) Tr[A^{-1} dA/dg]
    } else {
        const double dg = 1e-6 * (1.0 + std::abs(g));
        const auto fp = secular_value(m, g + dg, lambda).f;
        const auto fm = secular_value(m, g - dg, lambda).f;
        d.f_g = (fp - fm) / (2.0 * dg);
    }
    {
        const double dg = 1e-6 * (1.0 + std::abs(g));
        const auto lp = secular_value(m, g + dg, lambda).dfdl;
        const auto lm = secular_value(m, g - dg, lambda).dfdl;
        d.f_lg = (lp - lm) / (2.0 * dg);
    }
    return d;
}

struct NewtonResult {
    cxd g, lambda;
    double f_res, dfdl_res;
    bool converged;
};

// Damped, regularized Newton on (f, df/dlambda) = 0 over (g, lambda). At
// higher-order coalescences the Jacobian is singular at the solution, so
// convergence degrades to linear there; the ring polish recovers the digits.
inline NewtonResult ep_newton(const Model& m, cxd g, cxd lambda, const EpSearchConfig& cfg) {
    auto norm2 = [](cxd a, cxd b) { return std::norm(a) + std::norm(b); };
    NewtonDerivs d = ep_derivatives(m, g, lambda);
    double phi = norm2(d.f, d.f_l);
    for (int it = 0; it < cfg.max_iterations; ++it) {
        Eigen::Matrix2cd jac;
        jac << d.f_g, d.f_l, d.f_lg, d.f_ll;
        Eigen::Vector2cd rhs(-d.f, -d.f_l);
        const double jscale = jac.cwiseAbs().maxCoeff();
        if (std::abs(jac.determinant()) < 1e-14 * jscale * jscale)
            jac.diagonal().array() += 1e-10 * std::max(jscale, 1.0);
        const Eigen::Vector2cd delta = jac.fullPivLu().solve(rhs);
        if (!delta.allFinite()) break;

        double damp = 1.0;
        cxd g_new = g, l_new = lambda;
        NewtonDerivs d_new = d;
        bool moved = false;
        for (int half = 0; half < 10; ++half, damp *= 0.5) {
            g_new = g + damp * delta[0];
            l_new = lambda + damp * delta[1];
            d_new = ep_derivatives(m, g_new, l_new);
            if (norm2(d_new.f, d_new.f_l) < phi) {
                moved = true;
                break;
            }
        }
        if (!moved) break;
        const double step = std::abs(damp * delta[0]) + std::abs(damp * delta[1]);
        g = g_new;
        lambda = l_new;
        d = d_new;
        phi = norm2(d.f, d.f_l);
        if (step < 1e-15 * (1.0 + std::abs(g) + std::abs(lambda))) break;
    }
    NewtonResult r{g, lambda, std::abs(d.f), std::abs(d.f_l), false};
    r.converged = r.f_res <= cfg.accept_residual && r.dfdl_res <= cfg.accept_residual;
    return r;
}

// The two eigenvalues of H(g) closest to lambda_e, as sorted-spectrum indices.
inline std::pair<int, int> closest_pair(const Eigen::VectorXcd& lam, cxd lambda_e) {
    std::vector<int> idx(static_cast<std::size_t>(lam.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
        return std::abs(lam[a] - lambda_e) < std::abs(lam[b] - lambda_e);
    });
    int i = idx[0], j = idx[1];
    if (i > j) std::swap(i, j);
    return {i, j};
}

// Analytic-continuation polish: s(g) = (lambda_a - lambda_b)^2 of the merging
// pair is analytic with a simple zero at the EP even when the eigenvalues
// themselves have a branch point, and away from the EP the eigensolves are
// well-conditioned. Fitting s on shrinking rings both refines g_e beyond the
// defective-eigenproblem floor and extrapolates the true pair splitting.
struct RingFit {
    cxd g_e;
    double splitting; // sqrt|s(g_e)| from the fit
};

inline std::optional<RingFit> ring_polish(const Model& m, cxd g_e, cxd lambda_e) {
    double radius = 1e-3 * (1.0 + std::abs(g_e));
    cxd c0 = 0.0;
    for (int round = 0; round < 4; ++round) {
        Eigen::MatrixXcd vand(8, 3);
        Eigen::VectorXcd s(8);
        for (int p = 0; p < 8; ++p) {
            const double th = 2.0 * M_PI * p / 8.0;
            const cxd dpt = radius * cxd(std::cos(th), std::sin(th));
            const Eigen::VectorXcd lam =
                complex_eigenvalues(complex_hamiltonian(m, g_e + dpt));
            const auto [i, j] = closest_pair(lam, lambda_e);
            const cxd diff = lam[i] - lam[j];
            s[p] = diff * diff;
            vand(p, 0) = 1.0;
            vand(p, 1) = dpt;
            vand(p, 2) = dpt * dpt;
        }
        const Eigen::VectorXcd coef = vand.colPivHouseholderQr().solve(s);
        c0 = coef[0];
        if (std::abs(coef[1]) == 0.0) return std::nullopt;
        cxd shift = -coef[0] / coef[1];
        if (std::abs(shift) > radius) shift *= radius / std::abs(shift);
        g_e += shift;
        radius *= 0.3;
    }
    return RingFit{g_e, std::sqrt(std::abs(c0))};
}

} // namespace detail

// Grid-seeded search over the box: g seeds on a grid, lambda seeds at adjacent
// eigenvalue-pair midpoints of H(g_seed), Newton to (f, df/dlambda) = (0, 0),
// dedupe, validate the coalescence, close under conjugation.
inline std::vector<ExceptionalPoint> find_exceptional_points(const Model& m,
                                                             const EpSearchConfig& cfg = {}) {
    if (!(cfg.re_min <= cfg.re_max) || !(cfg.im_min <= cfg.im_max))
        throw ConfigError("exceptional search box is empty");
    std::vector<detail::NewtonResult> hits;
    const int gr = std::max(cfg.grid, 2);
    for (int ir = 0; ir < gr; ++ir) {
        for (int ii = 0; ii < gr; ++ii) {
            const double re = cfg.re_min + (cfg.re_max - cfg.re_min) * (ir + 0.5) / gr;
            const double im = cfg.im_min + (cfg.im_max - cfg.im_min) * (ii + 0.5) / gr;
            const cxd g_seed(re, im);
            Eigen::VectorXcd lam;
            try {
                lam = detail::complex_eigenvalues(detail::complex_hamiltonian(m, g_seed));
            } catch (const NoConvergence&) {
                continue;
            }
            for (Eigen::Index p = 0; p + 1 < lam.size(); ++p) {
                const cxd l_seed = 0.5 * (lam[p] + lam[p + 1]);
                const auto r = detail::ep_newton(m, g_seed, l_seed, cfg);
                if (!r.converged) continue;
                const double margin = 1e-6;
                if (r.g.real() < cfg.re_min - margin || r.g.real() > cfg.re_max + margin ||
                    r.g.imag() < cfg.im_min - margin || r.g.imag() > cfg.im_max + margin)
                    continue;
                hits.push_back(r);
            }
        }
    }

    std::sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) {
        if (a.g.real() != b.g.real()) return a.g.real() < b.g.real();
        return a.g.imag() < b.g.imag();
    });
    std::vector<ExceptionalPoint> eps;
    for (const auto& h : hits) {
        bool dup = false;
        for (const auto& e : eps)
            if (std::abs(e.g_e - h.g) <= cfg.cluster_radius) {
                dup = true;
                break;
            }
        if (dup) continue;

        ExceptionalPoint ep;
        ep.g_e = h.g;
        ep.lambda_e = h.lambda;
        if (cfg.ring_polish) {
            if (auto rf = detail::ring_polish(m, h.g, h.lambda)) {
                ep.g_e = rf->g_e;
                ep.pair_gap = rf->splitting;
            }
        }
        const Eigen::VectorXcd lam =
            detail::complex_eigenvalues(detail::complex_hamiltonian(m, ep.g_e));
        const auto [i, j] = detail::closest_pair(lam, h.lambda);
        ep.pair_i = i;
        ep.pair_j = j;
        ep.lambda_e = 0.5 * (lam[i] + lam[j]);
        const double direct_gap = std::abs(lam[i] - lam[j]);
        ep.pair_gap = cfg.ring_polish && ep.pair_gap > 0.0 ? std::min(ep.pair_gap, direct_gap)
                                                           : direct_gap;
        const SecularValue sv = secular_value(m, ep.g_e, ep.lambda_e);
        ep.f_residual = std::abs(sv.f);
        ep.dfdl_residual = std::abs(sv.dfdl);
        if (ep.f_residual > cfg.accept_residual || ep.dfdl_residual > cfg.accept_residual)
            continue;
        if (ep.pair_gap > cfg.pair_gap_tol) continue;
        eps.push_back(ep);
    }

    // conjugate closure: real-symmetric input means EPs arrive in conjugate
    // pairs; synthesize a missing partner and link both ways
    const std::size_t found = eps.size();
    for (std::size_t idx = 0; idx < found; ++idx) {
        if (std::abs(eps[idx].g_e.imag()) <= cfg.cluster_radius) continue;
        int partner = -1;
        for (std::size_t other = 0; other < eps.size(); ++other)
            if (other != idx &&
                std::abs(eps[other].g_e - std::conj(eps[idx].g_e)) <= cfg.cluster_radius) {
                partner = static_cast<int>(other);
                break;
            }
        if (partner < 0) {
            ExceptionalPoint mirror = eps[idx];
            mirror.g_e = std::conj(eps[idx].g_e);
            mirror.lambda_e = std::conj(eps[idx].lambda_e);
            const SecularValue sv = secular_value(m, mirror.g_e, mirror.lambda_e);
            mirror.f_residual = std::abs(sv.f);
            mirror.dfdl_residual = std::abs(sv.dfdl);
            partner = static_cast<int>(eps.size());
            eps.push_back(mirror);
        }
        eps[idx].conjugate_of = partner;
        eps[static_cast<std::size_t>(partner)].conjugate_of = static_cast<int>(idx);
    }
    std::sort(eps.begin(), eps.end(), [](const ExceptionalPoint& a, const ExceptionalPoint& b) {
        if (a.g_e.real() != b.g_e.real()) return a.g_e.real() < b.g_e.real();
        return a.g_e.imag() < b.g_e.imag();
    });
    // re-link conjugates after the sort
    for (std::size_t idx = 0; idx < eps.size(); ++idx) {
        eps[idx].conjugate_of = -1;
        for (std::size_t other = 0; other < eps.size(); ++other)
            if (other != idx &&
                std::abs(eps[other].g_e - std::conj(eps[idx].g_e)) <= cfg.cluster_radius &&
                std::abs(eps[idx].g_e.imag()) > cfg.cluster_radius) {
                eps[idx].conjugate_of = static_cast<int>(other);
                break;
            }
    }
    return eps;
}

struct CrossingReport {
    std::vector<double> g;            // scan grid
    std::vector<double> min_gap;      // min adjacent eigenvalue gap at g
    std::vector<bool> is_avoided_min; // 3-point local minimum, not degenerate
    std::vector<bool> is_degenerate;  // gap below 1e-10 * spectral scale
    std::vector<double> feshbach_gap; // |lambda1(g) - H_kk(g)|, the reduction denominator
    std::vector<double> degenerate_hits; // refined crossing locations
    double scale = 1.0;
};

namespace detail {
inline double min_adjacent_gap(const Model& m, double g) {
    const Eigen::VectorXd lam = dense_spectrum(hamiltonian(m, g)).values;
    double gap = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i + 1 < lam.size(); ++i)
        gap = std::min(gap, lam[i + 1] - lam[i]);
    return gap;
}
} // namespace detail

// Ternary search on the (locally unimodal) minimum adjacent gap; refines a
// bracketed crossing to machine precision.
inline double refine_degeneracy(const Model& m, double g_lo, double g_hi) {
    for (int it = 0; it < 200 && g_hi - g_lo > 1e-14 * (1.0 + std::abs(g_lo)); ++it) {
        const double m1 = g_lo + (g_hi - g_lo) / 3.0;
        const double m2 = g_hi - (g_hi - g_lo) / 3.0;
        if (detail::min_adjacent_gap(m, m1) <= detail::min_adjacent_gap(m, m2))
            g_hi = m2;
        else
            g_lo = m1;
    }
    return 0.5 * (g_lo + g_hi);
}

inline CrossingReport scan_real_axis(const Model& m, double g_min, double g_max, int steps) {
    if (!(g_min < g_max) || steps < 2)
        throw ConfigError("real-axis scan needs g_min < g_max and steps >= 2");
    CrossingReport rep;
    const Eigen::Index k = m.dim();
    double scale = 1.0;
    for (int i = 0; i < steps; ++i) {
        const double g = g_min + (g_max - g_min) * i / (steps - 1);
        const Spectrum s = dense_spectrum(hamiltonian(m, g));
        double gap = std::numeric_limits<double>::infinity();
        for (Eigen::Index q = 0; q + 1 < k; ++q) gap = std::min(gap, s.values[q + 1] - s.values[q]);
        rep.g.push_back(g);
        rep.min_gap.push_back(gap);
        const double h_kk = m.epsilon[k - 1] + g * m.v(k - 1, k - 1);
        rep.feshbach_gap.push_back(std::abs(s.values[0] - h_kk));
        scale = std::max(scale, std::max(std::abs(s.values[0]), std::abs(s.values[k - 1])));
    }
    rep.scale = scale;
    const double degen_tol = 1e-10 * scale;
    for (std::size_t i = 0; i < rep.g.size(); ++i) {
        const bool degen = rep.min_gap[i] < degen_tol;
        rep.is_degenerate.push_back(degen);
        const bool local_min = i > 0 && i + 1 < rep.g.size() &&
                               rep.min_gap[i] <= rep.min_gap[i - 1] &&
                               rep.min_gap[i] <= rep.min_gap[i + 1];
        rep.is_avoided_min.push_back(local_min && !degen);
    }
    // refine every local minimum that plunges toward degeneracy
    for (std::size_t i = 1; i + 1 < rep.g.size(); ++i) {
        if (rep.min_gap[i] > rep.min_gap[i - 1] || rep.min_gap[i] > rep.min_gap[i + 1]) continue;
        if (!rep.is_degenerate[i] && rep.min_gap[i] > 1e-3 * scale) continue;
        const double refined = refine_degeneracy(m, rep.g[i - 1], rep.g[i + 1]);
        if (detail::min_adjacent_gap(m, refined) < degen_tol)
            rep.degenerate_hits.push_back(refined);
    }
    return rep;
}

struct CorrelationRow {
    double fp_x = 0.0, fp_g = 0.0;
    double nearest_degeneracy = 0.0, dist_degeneracy = 0.0;
    double nearest_ep_re = 0.0, dist_ep = 0.0;
    double dlambda1_dg = 0.0;
    bool has_degeneracy = false, has_ep = false;
};

// Empirical diagnostic linking flow fixed points to spectral structure; the
// underlying claim is reported, never asserted.
inline std::vector<CorrelationRow> fixed_vs_exceptional_report(
    const std::vector<FixedPoint>& fps, const std::vector<ExceptionalPoint>& eps,
    const CrossingReport& crossings) {
    std::vector<CorrelationRow> rows;
    for (const auto& fp : fps) {
        CorrelationRow row;
        row.fp_x = fp.x;
        row.fp_g = fp.g;
        row.dlambda1_dg = fp.dlambda1_dg;
        for (double gd : crossings.degenerate_hits) {
            const double d = std::abs(gd - fp.g);
            if (!row.has_degeneracy || d < row.dist_degeneracy) {
                row.has_degeneracy = true;
                row.nearest_degeneracy = gd;
                row.dist_degeneracy = d;
            }
        }
        for (const auto& ep : eps) {
            const double d = std::abs(ep.g_e.real() - fp.g);
            if (!row.has_ep || d < row.dist_ep) {
                row.has_ep = true;
                row.nearest_ep_re = ep.g_e.real();
                row.dist_ep = d;
            }
        }
        rows.push_back(row);
    }
    return rows;
}

} // namespace hflow
