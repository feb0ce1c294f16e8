#pragma once

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>

namespace hflow {

// Base class for numerical/domain failures. The CLI maps these to exit code 3.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Configuration problems (bad keys, bad values, impossible run specs): exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NonSymmetricInput : Error {
    explicit NonSymmetricInput(double dev)
        : Error("explicit matrix is not symmetric (max |v - v^T| relative deviation " +
                std::to_string(dev) + ")") {}
};

struct DimensionMismatch : Error {
    using Error::Error;
};

struct NonFinite : Error {
    using Error::Error;
};

struct NoConvergence : Error {
    int iterations;
    double best_residual;
    NoConvergence(int it, double best)
        : Error("iterative eigensolver did not reach tolerance after " + std::to_string(it) +
                " iterations (best residual " + std::to_string(best) + ")"),
          iterations(it), best_residual(best) {}
};

struct SingularDenominator : Error {
    double energy, q_energy;
    SingularDenominator(double e, double hkk)
        : Error("reduction energy collides with the eliminated level: E = " + std::to_string(e) +
                ", H_kk = " + std::to_string(hkk)),
          energy(e), q_energy(hkk) {}
};

struct TinyA1 : Error {
    explicit TinyA1(double a1)
        : Error("constraint unusable: |a_1| = " + std::to_string(a1) +
                " below floor (first basis state absent from the ground state)") {}
};

struct FlowBreakdown : Error {
    using Error::Error;
};

struct FlowSingularity : Error {
    double x, den;
    explicit FlowSingularity(double where, double d)
        : Error("flow denominator vanished at x = " + std::to_string(where) +
                " (2ag + b = " + std::to_string(d) + ")"),
          x(where), den(d) {}
};

struct TrotterUnstable : Error {
    double bound;
    explicit TrotterUnstable(double b)
        : Error("Trotter factor not positive: beta*rho(H)/n = " + std::to_string(b) +
                " >= 1; increase n or reduce beta"),
          bound(b) {}
};

struct NoThermalRoot : Error {
    using Error::Error;
};

struct IllConditioned : Error {
    using Error::Error;
};

} // namespace hflow
