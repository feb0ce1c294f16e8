#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hflow/feshbach.hpp"
#include "hflow/model.hpp"
#include "oracles.hpp"

using namespace hflow;

TEST_CASE("effective hamiltonian at g=0 is the bare block") {
    const Model m = model_a(0.0);
    const Eigen::MatrixXd heff = effective_hamiltonian(m, 0.37);
    Eigen::MatrixXd ref(2, 2);
    ref << 0, 0, 0, 1;
    CHECK((heff - ref).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("effective hamiltonian closed form on MODEL-A") {
    const Model m = model_a(0.5);
    const double l1 = dense_lowest(hamiltonian(m)).value;
    const Eigen::MatrixXd heff = effective_hamiltonian(m, l1);
    Eigen::MatrixXd ref(2, 2);
    ref << 0, 0.5, 0.5, 1.0 + 0.25 / (l1 - 2.0);
    CHECK((heff - ref).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("exact decoupling at every eigenpair") {
    auto check_model = [](const Model& m, double tol_scale) {
        const Eigen::MatrixXd h = hamiltonian(m);
        const Spectrum s = dense_spectrum(h);
        const Eigen::Index k = m.dim();
        for (Eigen::Index i = 0; i < k; ++i) {
            const Eigen::MatrixXd heff = effective_hamiltonian(m, s.values[i]);
            const Eigen::VectorXd p = s.vectors.col(i).head(k - 1);
            CHECK((heff * p - s.values[i] * p).norm() <= tol_scale * h.norm());
        }
    };
    check_model(model_a(0.5), 1e-12);
    check_model(random_model(12, 0.1, 4, 0.7), 1e-12);
    check_model(random_model(50, 0.1, 42, 0.5), 1e-12);
}

TEST_CASE("singular denominator guard") {
    const Model m = model_a(0.0); // H_kk = 2 exactly
    CHECK_THROWS_AS(effective_hamiltonian(m, 2.0), SingularDenominator);
    const EigenPair low = dense_lowest(hamiltonian(model_a(0.5)));
    EigenPair poisoned = low;
    poisoned.value = 2.0; // lambda == eps_k and v_kk = 0: denominator vanishes at any g'
    CHECK_THROWS_AS(constraint_residual(model_a(0.5), poisoned, 0.3), SingularDenominator);
}

TEST_CASE("constraint residual closed forms on MODEL-A") {
    SUBCASE("free theory: residual(0) = 0 at eig (0, e1)") {
        const Model m = model_a(0.0);
        EigenPair e1{0.0, Eigen::Vector3d(1, 0, 0), 0.0};
        CHECK(constraint_residual(m, e1, 0.0) == 0.0);
    }
    SUBCASE("residual at g'=0 equals (eps1 - lambda)*a1") {
        const Model m = model_a(0.5);
        const EigenPair low = dense_lowest(hamiltonian(m));
        const double expected = (m.epsilon[0] - low.value) * low.vector[0];
        CHECK(constraint_residual(m, low, 0.0) ==
              doctest::Approx(expected).epsilon(1e-14));
        CHECK(expected == doctest::Approx(-low.value * low.vector[0]).epsilon(1e-14));
    }
    SUBCASE("residual vanishes at the returned root") {
        const Model m = model_a(0.5);
        const EigenPair low = dense_lowest(hamiltonian(m));
        const ReductionStep step = solve_reduction_step(m, low);
        CHECK(std::abs(constraint_residual(m, low, step.g_out)) <= 1e-10);
    }
    SUBCASE("tiny a1 guard") {
        const Model m = model_a(0.5);
        EigenPair eig = dense_lowest(hamiltonian(m));
        eig.vector[0] = 1e-12;
        CHECK_THROWS_AS(constraint_residual(m, eig, 0.1), TinyA1);
    }
}

TEST_CASE("quadratic coefficients: frozen MODEL-A values, both variants") {
    const Model m = model_a(0.5);
    const EigenPair low = dense_lowest(hamiltonian(m));

    const QuadraticCoefficients d = quadratic_coefficients(m, low, Variant::derived);
    CHECK(std::abs(d.a) <= 1e-12);
    CHECK(d.b == doctest::Approx(0.908248290463863).epsilon(1e-12));
    CHECK(d.c == doctest::Approx(-0.4541241452319315).epsilon(1e-12));

    const QuadraticCoefficients p = quadratic_coefficients(m, low, Variant::paper);
    CHECK(std::abs(p.a) <= 1e-12);
    CHECK(p.b == doctest::Approx(0.8249149571305295).epsilon(1e-12));
    CHECK(p.c == d.c); // c shared by construction

    // c = -a1 (lambda - 0)(lambda - 2) against the dense oracle
    CHECK(d.c == doctest::Approx(-low.vector[0] * low.value * (low.value - 2.0)).epsilon(1e-13));

    // Variant::paper root pinned against its closed-form quadratic
    auto [r1, r2] = detail::quadratic_roots(p.a, p.b, p.c);
    CHECK(r1.real() == doctest::Approx(0.550510257216822).epsilon(1e-12));
    CHECK(std::isinf(r2.real()));
}

TEST_CASE("derived quadratic is the cleared-denominator constraint") {
    auto check_identity = [](const Model& m) {
        const EigenPair low = dense_lowest(hamiltonian(m));
        const QuadraticCoefficients q = quadratic_coefficients(m, low, Variant::derived);
        const Eigen::Index k = m.dim();
        SplitMix64 rng(99);
        for (int i = 0; i < 32; ++i) {
            const double gp = 3.0 * rng.symmetric_unit();
            double den = low.value - m.epsilon[k - 1] - gp * m.v(k - 1, k - 1);
            double lhs = (q.a * gp + q.b) * gp + q.c;
            double rhs;
            try {
                rhs = den * constraint_residual(m, low, gp);
            } catch (const SingularDenominator&) {
                continue;
            }
            const double denom = std::max({std::abs(lhs), std::abs(rhs), 1e-12});
            CHECK(std::abs(lhs - rhs) / denom <= 1e-11);
        }
    };
    check_identity(model_a(0.5));
    check_identity(random_model(10, 0.1, 17, 0.5));
    check_identity(random_model(50, 0.1, 42, 0.5));
    // pinned regression spot values
    const Model m = model_a(0.5);
    const EigenPair low = dense_lowest(hamiltonian(m));
    const QuadraticCoefficients q = quadratic_coefficients(m, low, Variant::derived);
    for (double gp : {-1.0, 0.3, 0.7}) {
        const double den = low.value - 2.0;
        const double lhs = (q.a * gp + q.b) * gp + q.c;
        const double rhs = den * constraint_residual(m, low, gp);
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
}

TEST_CASE("degenerate constraint on the free theory") {
    const Model m = model_a(0.0);
    EigenPair e1{0.0, Eigen::Vector3d(1, 0, 0), 0.0};
    const QuadraticCoefficients q = quadratic_coefficients(m, e1, Variant::derived);
    CHECK(q.a == 0.0);
    CHECK(q.b == 0.0);
    CHECK(q.c == 0.0);
    const ReductionStep step = solve_reduction_step(m, e1);
    CHECK(step.selection == RootSelection::degenerate);
    CHECK(step.g_out == 0.0);
    CHECK(std::abs(step.drift) <= 1e-14);
    CHECK(std::isnan(step.root1.real()));
}

TEST_CASE("MODEL-A single step 3 -> 2") {
    const Model m = model_a(0.5);
    const EigenPair low = dense_lowest(hamiltonian(m));
    const ReductionStep step = solve_reduction_step(m, low);
    CHECK(step.k_from == 3);
    CHECK(step.k_to == 2);
    CHECK(step.selection == RootSelection::closer_root);
    // rolling-style exact eigenpair: g_in is itself a root, so nothing moves
    CHECK(step.g_out == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(step.residual <= 1e-12);
    // drift against the closed forms of both spaces
    const double l2 = oracle::two_level_eigs(0.0, 1.0, step.g_out)[0];
    CHECK(step.lambda_after == doctest::Approx(l2).epsilon(1e-12));
    CHECK(step.lambda_after == doctest::Approx(-0.20710678118654754).epsilon(1e-12));
    CHECK(step.drift == doctest::Approx(0.017638090205041562).epsilon(1e-9));
}

TEST_CASE("weak perturbation keeps the renormalization small (N=50 fixture)") {
    const Model m = random_model(50, 0.1, 42, 0.5);
    const EigenPair low = dense_lowest(hamiltonian(m));
    const ReductionStep step = solve_reduction_step(m, low);
    CHECK(std::abs(step.g_out - 0.5) <= 0.2);
    CHECK(step.residual <= 1e-9);
    // brute-force grid: no residual zero closer to g_in than the chosen root
    double best = std::numeric_limits<double>::infinity();
    double prev_f = 0.0, prev_g = 0.0;
    bool have = false;
    for (int i = 0; i <= 4000; ++i) {
        const double gp = 0.5 - 2.0 + 4.0 * i / 4000.0;
        double f;
        try {
            f = constraint_residual(m, low, gp);
        } catch (const SingularDenominator&) {
            have = false;
            continue;
        }
        if (have && (prev_f < 0.0) != (f < 0.0))
            best = std::min(best, std::abs(0.5 * (prev_g + gp) - 0.5));
        prev_f = f;
        prev_g = gp;
        have = true;
    }
    CHECK(std::abs(step.g_out - 0.5) <= best + 1e-3);
}

TEST_CASE("dimension preconditions") {
    Eigen::MatrixXd v(2, 2);
    v << 0, 1, 1, 0;
    const Model m = make_model(ladder_spectrum(2), v, 0.5);
    const EigenPair low = dense_lowest(hamiltonian(m));
    CHECK_THROWS_AS(solve_reduction_step(m, low), DimensionMismatch);
}

TEST_CASE("complex roots with no constraint sign change break down") {
    // v(0,0) = v(0,1) = v(2,2) = 0 collapses the constraint to
    // f(g') = -a1 - t g'^2 with t = a1 + a2 > 0: strictly negative on the
    // whole real axis, so the quadratic roots are +-i sqrt(a1/t) and no scan
    // radius can rescue the step
    Eigen::VectorXd eps(3);
    eps << 0, 1, 2;
    Eigen::MatrixXd v(3, 3);
    v << 0, 0, 1,
         0, 0, 1,
         1, 1, 0;
    const Model m = make_model(eps, v, 0.3);
    Eigen::Vector3d a(0.9, 0.3, 0.3);
    a.normalize();
    const EigenPair fake{1.0, a, 0.0};
    const auto q = quadratic_coefficients(m, fake, Variant::derived);
    CHECK(q.b * q.b - 4.0 * q.a * q.c < 0.0);
    StepConfig cfg;
    cfg.scan_radius = 2.0;
    CHECK_THROWS_AS(solve_reduction_step(m, fake, cfg), FlowBreakdown);
}

TEST_CASE("quadratic root helper") {
    using detail::quadratic_roots;
    SUBCASE("two real roots, stable at small a") {
        auto [r1, r2] = quadratic_roots(1e-14, 1.0, -2.0);
        const bool hit = std::abs(r1.real() - 2.0) <= 1e-9 || std::abs(r2.real() - 2.0) <= 1e-9;
        CHECK(hit);
    }
    SUBCASE("linear") {
        auto [r1, r2] = quadratic_roots(0.0, 2.0, -1.0);
        CHECK(r1.real() == 0.5);
        CHECK(std::isinf(r2.real()));
    }
    SUBCASE("conjugate pair") {
        auto [r1, r2] = quadratic_roots(1.0, 0.0, 1.0);
        CHECK(r1.imag() == doctest::Approx(1.0));
        CHECK(r2.imag() == doctest::Approx(-1.0));
        CHECK(r1.real() == 0.0);
    }
    SUBCASE("product and sum match Vieta") {
        auto [r1, r2] = quadratic_roots(2.0, -3.0, -7.0);
        CHECK((r1 + r2).real() == doctest::Approx(1.5).epsilon(1e-14));
        CHECK((r1 * r2).real() == doctest::Approx(-3.5).epsilon(1e-14));
    }
}
