#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hflow/eigensolve.hpp"
#include "hflow/exceptional.hpp"
#include "hflow/flow.hpp"
#include "hflow/thermal.hpp"

namespace hflow {

// 17-significant-digit decimal: round-trips any IEEE double, so identical
// runs serialize byte-identically.
std::string fmt17(double x);

std::string fingerprint_hex(std::uint64_t h);

void ensure_dir(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

struct DriftRow {
    int k = 0;
    double g = 0.0;
    double drift = 0.0;
    double naive_drift = 0.0;
};

std::string csv_spectrum(const Spectrum& s);
std::string csv_ground_state(const EigenPair& p);
std::string csv_trajectory(const FlowTrajectory& traj);
std::string csv_ode_track(const OdeTrack& track);
std::string csv_drift(const std::vector<DriftRow>& rows);
std::string csv_fixed_points(const std::vector<FixedPoint>& fps);
std::string csv_thermal(const ThermalTrajectory& traj);
std::string csv_gap_table(const std::vector<GapRow>& rows);
std::string csv_exceptional(const std::vector<ExceptionalPoint>& eps);
std::string csv_crossings(const CrossingReport& rep);
std::string csv_correlation(const std::vector<CorrelationRow>& rows);

} // namespace hflow
