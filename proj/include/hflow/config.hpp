#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hflow/exceptional.hpp"
#include "hflow/flow.hpp"
#include "hflow/model.hpp"
#include "hflow/thermal.hpp"

namespace hflow {

struct OutputConfig {
    std::string dir = "out";
    bool csv = true;
    bool json = true;
    std::string log_level = "info"; // quiet | info | debug
};

struct RealScanConfig {
    double g_min = -2.0, g_max = 2.0;
    int steps = 401;
};

// Fully resolved run description: model recipe + per-subcommand sections.
// `raw` echoes the resolved values for the JSON bundle.
struct RunConfig {
    nlohmann::json raw;

    // model recipe
    Eigen::Index dimension = 0;
    std::string h0_mode = "ladder"; // ladder | explicit
    Eigen::VectorXd h0_values;
    double h0_min = 0.0, h0_step = 1.0;
    std::string h1_mode; // explicit | random | model-a
    Eigen::MatrixXd h1_matrix;
    double h1_sigma = 0.1;
    double g = 0.0;
    std::uint64_t seed = 0;
    bool seed_given = false;

    Eigen::Index dense_threshold = 64;

    FlowConfig flow;
    ThermalConfig thermal;
    std::vector<double> beta_list{1.0, 2.0, 5.0, 10.0, 20.0};
    int thermal_n_cap = 12;
    double thermal_fit_radius = 1.0;

    EpSearchConfig exceptional;
    RealScanConfig real_scan;

    OutputConfig output;

    Model build_model() const;
};

// Parse + validate. Unknown keys anywhere are ConfigErrors naming the full
// dotted path; tolerances must be strictly positive.
RunConfig parse_config(const nlohmann::json& j);
RunConfig parse_config_file(const std::string& path);

// --seed / --out command-line overrides, applied after parsing (and echoed
// back into raw so the summary reflects what actually ran).
void override_seed(RunConfig& cfg, std::uint64_t seed);
void override_out_dir(RunConfig& cfg, const std::string& dir);

} // namespace hflow
