#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "hflow/feshbach.hpp"
#include "hflow/model.hpp"
#include "hflow/spline.hpp"

namespace hflow {

enum class FlowTarget { fixed, rolling };

inline const char* to_string(FlowTarget t) {
    return t == FlowTarget::fixed ? "fixed" : "rolling";
}

// Right-hand-side convention for the continuum flow equation. "consistent"
// differentiates a(x)g^2 + b(x)g + c(x) = 0 along the trajectory:
//   dg/dx = -(a'g^2 + b'g + c') / (2ag + b).
// "printed" flips the sign of the b' and c' terms:
//   dg/dx = (c' + b'g - a'g^2) / (2ag + b).
// Only the consistent form tracks the discrete cascade; the printed one is
// kept selectable so the difference stays measurable instead of hidden.
enum class RhsForm { consistent, printed };

inline const char* to_string(RhsForm f) {
    return f == RhsForm::consistent ? "consistent" : "printed";
}

struct FlowConfig {
    int k_min = 2;
    FlowTarget target = FlowTarget::fixed;
    RhsForm rhs_form = RhsForm::consistent;
    StepConfig step; // variant, floors, scan radius, dense threshold
    double ode_h = 0.25;
    double singularity_floor = 1e-12; // on |2ag + b| relative to its own terms
    double fixed_point_tol = 1e-3;    // x (max |rhs| over the track)
};

struct CoefficientKnot {
    double x = 0.0; // continuous dimension, equals k_to (top knot: N)
    double a = 0.0, b = 0.0, c = 0.0;
};

struct FlowTrajectory {
    int n0 = 0;       // starting dimension N
    double g0 = 0.0;  // starting coupling
    double lambda1_target = 0.0;
    FlowTarget target = FlowTarget::fixed;
    std::vector<ReductionStep> steps; // k = N..k_min+1, in reduction order
    // Normalized quadratic coefficients per step (divided by lambda - eps_k,
    // which makes c identical across knots up to the a1 factor and keeps all
    // three tracks on one scale), plus a synthetic top knot at x = N from the
    // first row of the eigenvalue equation, whose root is exactly g0.
    std::vector<CoefficientKnot> track; // ascending in x
    std::optional<int> breakdown_at;    // k_from of the step that failed
    std::string breakdown_reason;

    double g_of_k(int k) const {
        if (k == n0) return g0;
        for (const auto& s : steps)
            if (s.k_to == k) return s.g_out;
        throw Error("no flow step reached k = " + std::to_string(k));
    }
};

// Discrete cascade N -> k_min. Each step diagonalizes the current space at the
// running coupling; the preserved eigenvalue is either the fixed top-space
// lambda1 or the rolling per-space lambda1. Step failures truncate the
// trajectory (recorded, not thrown).
inline FlowTrajectory run_discrete_flow(const Model& model, const FlowConfig& cfg = {}) {
    const int n = static_cast<int>(model.dim());
    if (cfg.k_min < 2 || cfg.k_min >= n)
        throw ConfigError("flow.k_min must satisfy 2 <= k_min < N (got " +
                          std::to_string(cfg.k_min) + " for N = " + std::to_string(n) + ")");

    FlowTrajectory traj;
    traj.n0 = n;
    traj.g0 = model.g;
    traj.target = cfg.target;

    Model current = model;
    for (int k = n; k > cfg.k_min; --k) {
        EigenPair low;
        try {
            low = lowest_pair(hamiltonian(current), cfg.step.dense_threshold);
        } catch (const Error& e) {
            traj.breakdown_at = k;
            traj.breakdown_reason = e.what();
            break;
        }
        if (k == n) {
            traj.lambda1_target = low.value;
            // top knot: (lambda - eps_1) a_1 = g * sum_i v_1i a_i, linear in g
            // with root exactly g0
            const double s_full = current.v.row(0).dot(low.vector);
            traj.track.push_back({static_cast<double>(n), 0.0, s_full,
                                  (current.epsilon[0] - low.value) * low.vector[0]});
        }
        EigenPair tracked = low;
        if (cfg.target == FlowTarget::fixed) tracked.value = traj.lambda1_target;
        ReductionStep step;
        try {
            step = solve_reduction_step(current, tracked, cfg.step);
        } catch (const Error& e) {
            traj.breakdown_at = k;
            traj.breakdown_reason = e.what();
            break;
        }
        const double dk = tracked.value - current.epsilon[k - 1];
        traj.steps.push_back(step);
        traj.track.push_back({static_cast<double>(step.k_to), step.coefficients.a / dk,
                              step.coefficients.b / dk, step.coefficients.c / dk});
        current = truncate(current, k - 1);
        current.g = step.g_out;
    }
    std::sort(traj.track.begin(), traj.track.end(),
              [](const CoefficientKnot& l, const CoefficientKnot& r) { return l.x < r.x; });
    return traj;
}

// Naive-truncation drift curve for the same model: |lambda1 of the k-space at
// the ORIGINAL coupling - lambda1_target|. The renormalized flow must beat
// this to justify its existence.
inline std::vector<std::pair<int, double>> naive_drift_curve(const Model& model, int k_min,
                                                             double lambda1_target,
                                                             Eigen::Index dense_threshold = 64) {
    std::vector<std::pair<int, double>> out;
    for (int k = static_cast<int>(model.dim()); k >= std::max(k_min, 2); --k) {
        const Model t = detail::head(model, k);
        const double l1 = lowest_pair(hamiltonian(t), dense_threshold).value;
        out.emplace_back(k, std::abs(l1 - lambda1_target));
    }
    return out;
}

struct CoefficientInterpolant {
    CubicSpline a, b, c;

    static CoefficientInterpolant from_track(const std::vector<CoefficientKnot>& track) {
        if (track.size() < 4) throw Error("coefficient interpolation needs >= 4 knots");
        std::vector<double> x, ya, yb, yc;
        for (const auto& kn : track) {
            x.push_back(kn.x);
            ya.push_back(kn.a);
            yb.push_back(kn.b);
            yc.push_back(kn.c);
        }
        return {CubicSpline(x, ya), CubicSpline(x, yb), CubicSpline(x, yc)};
    }
};

inline double continuum_rhs(double x, double g, const CoefficientInterpolant& itp,
                            RhsForm form = RhsForm::consistent,
                            double singularity_floor = 1e-12) {
    const double a = itp.a(x), b = itp.b(x);
    const double da = itp.a.derivative(x), db = itp.b.derivative(x), dc = itp.c.derivative(x);
    const double den = 2.0 * a * g + b;
    const double den_scale = std::max(1.0, std::abs(2.0 * a * g) + std::abs(b));
    if (std::abs(den) <= singularity_floor * den_scale) throw FlowSingularity(x, den);
    if (form == RhsForm::consistent) return -(da * g * g + db * g + dc) / den;
    return (dc + db * g - da * g * g) / den;
}

struct OdeTrack {
    std::vector<double> x, g, rhs; // x descending from N to k_min
    std::optional<double> singular_at;
    double singular_den = 0.0;
};

// Fixed-step RK4 from x = N down to x = k_min, h in units of dimension count.
// A flow singularity truncates (and records) rather than aborts.
inline OdeTrack integrate_flow_ode(const FlowTrajectory& traj, const FlowConfig& cfg = {}) {
    const CoefficientInterpolant itp = CoefficientInterpolant::from_track(traj.track);
    const double x_top = traj.track.back().x;
    const double x_bot = traj.track.front().x;
    const double h = cfg.ode_h;
    if (h <= 0.0) throw ConfigError("flow.ode_h must be positive");

    OdeTrack track;
    double x = x_top, g = traj.g0;
    auto rhs = [&](double xx, double gg) {
        return continuum_rhs(xx, gg, itp, cfg.rhs_form, cfg.singularity_floor);
    };
    try {
        track.x.push_back(x);
        track.g.push_back(g);
        track.rhs.push_back(rhs(x, g));
        while (x > x_bot + 1e-12) {
            const double step = std::min(h, x - x_bot);
            const double k1 = rhs(x, g);
            const double k2 = rhs(x - 0.5 * step, g - 0.5 * step * k1);
            const double k3 = rhs(x - 0.5 * step, g - 0.5 * step * k2);
            const double k4 = rhs(x - step, g - step * k3);
            g -= step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            x -= step;
            track.x.push_back(x);
            track.g.push_back(g);
            track.rhs.push_back(rhs(x, g));
        }
    } catch (const FlowSingularity& s) {
        track.singular_at = s.x;
        track.singular_den = s.den;
    }
    return track;
}

struct FixedPoint {
    enum class Kind { sign_change, sustained_zero };
    Kind kind = Kind::sign_change;
    double x = 0.0, g = 0.0;
    double x_hi = 0.0, x_lo = 0.0; // interval for sustained zeros (x_hi >= x_lo)
    double dlambda1_dg = 0.0;      // Eq. "dlambda/dg != 0" side condition
    bool has_dlambda = false;
};

inline const char* to_string(FixedPoint::Kind k) {
    return k == FixedPoint::Kind::sign_change ? "sign_change" : "sustained_zero";
}

// Locations with |dg/dx| <= tol * scale, classified as an isolated sign change
// or a sustained-zero interval; optionally annotated with a finite-difference
// dlambda1/dg at the nearest integer dimension.
inline std::vector<FixedPoint> detect_fixed_points(const OdeTrack& track, double tol,
                                                   const Model* model = nullptr,
                                                   Eigen::Index dense_threshold = 64) {
    std::vector<FixedPoint> out;
    const std::size_t n = track.x.size();
    if (n == 0) return out;
    double scale = 0.0;
    for (double r : track.rhs) scale = std::max(scale, std::abs(r));
    const double thresh = tol * scale;

    auto annotate = [&](FixedPoint& fp) {
        if (!model) return;
        const Eigen::Index k = std::clamp<Eigen::Index>(
            static_cast<Eigen::Index>(std::lround(fp.x)), 1, model->dim());
        const Model t = detail::head(*model, k);
        const double dg = 1e-5 * std::max(1.0, std::abs(fp.g));
        const double lp = lowest_pair(hamiltonian(t, fp.g + dg), dense_threshold).value;
        const double lm = lowest_pair(hamiltonian(t, fp.g - dg), dense_threshold).value;
        fp.dlambda1_dg = (lp - lm) / (2.0 * dg);
        fp.has_dlambda = true;
    };

    // group consecutive below-threshold samples: single sample -> isolated
    // zero, run -> sustained-zero interval
    std::size_t i = 0;
    std::vector<bool> flagged(n, false);
    while (i < n) {
        if (std::abs(track.rhs[i]) > thresh) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j + 1 < n && std::abs(track.rhs[j + 1]) <= thresh) ++j;
        FixedPoint fp;
        if (j > i) {
            fp.kind = FixedPoint::Kind::sustained_zero;
            fp.x_hi = track.x[i];
            fp.x_lo = track.x[j];
            const std::size_t mid = (i + j) / 2;
            fp.x = track.x[mid];
            fp.g = track.g[mid];
        } else {
            fp.kind = FixedPoint::Kind::sign_change;
            fp.x = fp.x_hi = fp.x_lo = track.x[i];
            fp.g = track.g[i];
        }
        annotate(fp);
        out.push_back(fp);
        for (std::size_t q = i; q <= j; ++q) flagged[q] = true;
        i = j + 1;
    }
    // sign changes between consecutive above-threshold samples (crossings the
    // grid stepped over)
    for (std::size_t s = 0; s + 1 < n; ++s) {
        if (flagged[s] || flagged[s + 1]) continue;
        const double r0 = track.rhs[s], r1 = track.rhs[s + 1];
        if ((r0 < 0.0) == (r1 < 0.0)) continue;
        const double t = r0 / (r0 - r1);
        FixedPoint fp;
        fp.kind = FixedPoint::Kind::sign_change;
        fp.x = track.x[s] + t * (track.x[s + 1] - track.x[s]);
        fp.g = track.g[s] + t * (track.g[s + 1] - track.g[s]);
        fp.x_hi = fp.x_lo = fp.x;
        annotate(fp);
        out.push_back(fp);
    }
    std::sort(out.begin(), out.end(),
              [](const FixedPoint& l, const FixedPoint& r) { return l.x > r.x; });
    return out;
}

} // namespace hflow
