#include "hflow/config.hpp"

#include <fstream>
#include <set>

namespace hflow {

namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::string& prefix,
                const std::set<std::string>& allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key()))
            throw ConfigError("unknown config key: " + (prefix.empty() ? "" : prefix + ".") +
                              it.key());
}

double get_num(const json& obj, const std::string& path, const std::string& key,
               std::optional<double> fallback = {}) {
    if (!obj.contains(key)) {
        if (fallback) return *fallback;
        throw ConfigError("missing config key: " + path + key);
    }
    if (!obj[key].is_number()) throw ConfigError("config key " + path + key + " must be a number");
    return obj[key].get<double>();
}

double get_positive(const json& obj, const std::string& path, const std::string& key,
                    double fallback) {
    const double v = get_num(obj, path, key, fallback);
    if (!(v > 0.0)) throw ConfigError("config key " + path + key + " must be strictly positive");
    return v;
}

int get_int(const json& obj, const std::string& path, const std::string& key,
            std::optional<int> fallback = {}) {
    if (!obj.contains(key)) {
        if (fallback) return *fallback;
        throw ConfigError("missing config key: " + path + key);
    }
    if (!obj[key].is_number_integer())
        throw ConfigError("config key " + path + key + " must be an integer");
    return obj[key].get<int>();
}

std::string get_str(const json& obj, const std::string& path, const std::string& key,
                    std::optional<std::string> fallback = {}) {
    if (!obj.contains(key)) {
        if (fallback) return *fallback;
        throw ConfigError("missing config key: " + path + key);
    }
    if (!obj[key].is_string()) throw ConfigError("config key " + path + key + " must be a string");
    return obj[key].get<std::string>();
}

void expect_one_of(const std::string& path, const std::string& value,
                   const std::set<std::string>& allowed) {
    if (!allowed.count(value)) {
        std::string opts;
        for (const auto& a : allowed) opts += (opts.empty() ? "" : ", ") + a;
        throw ConfigError("config key " + path + " must be one of {" + opts + "}, got \"" +
                          value + "\"");
    }
}

void parse_h0(const json& j, RunConfig& cfg) {
    if (!j.contains("h0")) return; // ladder 0,1,... by default
    const json& h0 = j["h0"];
    if (!h0.is_object()) throw ConfigError("config key h0 must be an object");
    check_keys(h0, "h0", {"mode", "values", "min", "step"});
    cfg.h0_mode = get_str(h0, "h0.", "mode", std::string("ladder"));
    expect_one_of("h0.mode", cfg.h0_mode, {"ladder", "explicit"});
    if (cfg.h0_mode == "explicit") {
        if (!h0.contains("values") || !h0["values"].is_array())
            throw ConfigError("h0.mode=explicit requires the array h0.values");
        const auto& vals = h0["values"];
        cfg.h0_values.resize(static_cast<Eigen::Index>(vals.size()));
        for (std::size_t i = 0; i < vals.size(); ++i) {
            if (!vals[i].is_number()) throw ConfigError("h0.values must hold numbers");
            cfg.h0_values[static_cast<Eigen::Index>(i)] = vals[i].get<double>();
        }
        if (h0.contains("min") || h0.contains("step"))
            throw ConfigError("h0.min/h0.step conflict with h0.mode=explicit");
    } else {
        if (h0.contains("values")) throw ConfigError("h0.values conflicts with h0.mode=ladder");
        cfg.h0_min = get_num(h0, "h0.", "min", 0.0);
        cfg.h0_step = get_num(h0, "h0.", "step", 1.0);
    }
}

void parse_h1(const json& j, RunConfig& cfg) {
    if (!j.contains("h1")) throw ConfigError("missing config key: h1");
    const json& h1 = j["h1"];
    if (!h1.is_object()) throw ConfigError("config key h1 must be an object");
    check_keys(h1, "h1", {"mode", "matrix", "sigma"});
    cfg.h1_mode = get_str(h1, "h1.", "mode");
    expect_one_of("h1.mode", cfg.h1_mode, {"explicit", "random", "model-a"});
    if (cfg.h1_mode == "explicit") {
        if (!h1.contains("matrix") || !h1["matrix"].is_array())
            throw ConfigError("h1.mode=explicit requires the nested array h1.matrix");
        const auto& rows = h1["matrix"];
        const auto n = static_cast<Eigen::Index>(rows.size());
        cfg.h1_matrix.resize(n, n);
        for (Eigen::Index r = 0; r < n; ++r) {
            const auto& row = rows[static_cast<std::size_t>(r)];
            if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n)
                throw ConfigError("h1.matrix must be square (row " + std::to_string(r) +
                                  " has wrong length)");
            for (Eigen::Index c = 0; c < n; ++c) {
                const auto& cell = row[static_cast<std::size_t>(c)];
                if (!cell.is_number()) throw ConfigError("h1.matrix must hold numbers");
                cfg.h1_matrix(r, c) = cell.get<double>();
            }
        }
    } else if (cfg.h1_mode == "random") {
        cfg.h1_sigma = get_positive(h1, "h1.", "sigma", 0.1);
        if (h1.contains("matrix")) throw ConfigError("h1.matrix conflicts with h1.mode=random");
    } else { // model-a
        if (h1.contains("matrix") || h1.contains("sigma"))
            throw ConfigError("h1.matrix/h1.sigma conflict with h1.mode=model-a");
    }
}

void parse_flow(const json& j, RunConfig& cfg) {
    if (!j.contains("flow")) return;
    const json& f = j["flow"];
    if (!f.is_object()) throw ConfigError("config key flow must be an object");
    check_keys(f, "flow",
               {"k_min", "variant", "target", "residual_tol", "a1_floor", "denom_floor",
                "scan_radius", "ode_h", "rhs_form", "fixed_point_tol"});
    cfg.flow.k_min = get_int(f, "flow.", "k_min", cfg.flow.k_min);
    const std::string variant = get_str(f, "flow.", "variant", std::string("derived"));
    expect_one_of("flow.variant", variant, {"derived", "paper"});
    cfg.flow.step.variant = variant == "derived" ? Variant::derived : Variant::paper;
    const std::string target = get_str(f, "flow.", "target", std::string("fixed"));
    expect_one_of("flow.target", target, {"fixed", "rolling"});
    cfg.flow.target = target == "fixed" ? FlowTarget::fixed : FlowTarget::rolling;
    cfg.flow.step.residual_tol = get_positive(f, "flow.", "residual_tol", 1e-10);
    cfg.flow.step.a1_floor = get_positive(f, "flow.", "a1_floor", 1e-8);
    cfg.flow.step.denom_floor = get_positive(f, "flow.", "denom_floor", 1e-10);
    if (f.contains("scan_radius"))
        cfg.flow.step.scan_radius = get_positive(f, "flow.", "scan_radius", -1.0);
    cfg.flow.ode_h = get_positive(f, "flow.", "ode_h", 0.25);
    const std::string form = get_str(f, "flow.", "rhs_form", std::string("consistent"));
    expect_one_of("flow.rhs_form", form, {"consistent", "printed"});
    cfg.flow.rhs_form = form == "consistent" ? RhsForm::consistent : RhsForm::printed;
    cfg.flow.fixed_point_tol = get_positive(f, "flow.", "fixed_point_tol", 1e-3);
}

void parse_thermal(const json& j, RunConfig& cfg) {
    if (!j.contains("thermal")) return;
    const json& t = j["thermal"];
    if (!t.is_object()) throw ConfigError("config key thermal must be an object");
    check_keys(t, "thermal",
               {"beta", "beta_list", "n", "k_min", "scan_radius", "n_cap", "fit_radius"});
    cfg.thermal.beta = get_positive(t, "thermal.", "beta", 1.0);
    cfg.thermal.n = get_int(t, "thermal.", "n", 64);
    if (cfg.thermal.n < 1) throw ConfigError("thermal.n must be >= 1");
    cfg.thermal.k_min = get_int(t, "thermal.", "k_min", 2);
    if (t.contains("scan_radius"))
        cfg.thermal.scan_radius = get_positive(t, "thermal.", "scan_radius", -1.0);
    cfg.thermal_n_cap = get_int(t, "thermal.", "n_cap", 12);
    cfg.thermal_fit_radius = get_positive(t, "thermal.", "fit_radius", 1.0);
    if (t.contains("beta_list")) {
        if (!t["beta_list"].is_array()) throw ConfigError("thermal.beta_list must be an array");
        cfg.beta_list.clear();
        for (const auto& b : t["beta_list"]) {
            if (!b.is_number() || !(b.get<double>() > 0.0))
                throw ConfigError("thermal.beta_list entries must be positive numbers");
            cfg.beta_list.push_back(b.get<double>());
        }
        if (cfg.beta_list.empty()) throw ConfigError("thermal.beta_list must not be empty");
        for (std::size_t i = 0; i + 1 < cfg.beta_list.size(); ++i)
            if (cfg.beta_list[i] >= cfg.beta_list[i + 1])
                throw ConfigError("thermal.beta_list must be strictly increasing");
    }
}

void parse_exceptional(const json& j, RunConfig& cfg) {
    if (!j.contains("exceptional")) return;
    const json& e = j["exceptional"];
    if (!e.is_object()) throw ConfigError("config key exceptional must be an object");
    check_keys(e, "exceptional",
               {"box", "grid", "real_scan", "accept_residual", "pair_gap_tol", "cluster_radius",
                "ring_polish"});
    if (e.contains("box")) {
        const json& b = e["box"];
        if (!b.is_object()) throw ConfigError("exceptional.box must be an object");
        check_keys(b, "exceptional.box", {"re_min", "re_max", "im_min", "im_max"});
        cfg.exceptional.re_min = get_num(b, "exceptional.box.", "re_min", -2.0);
        cfg.exceptional.re_max = get_num(b, "exceptional.box.", "re_max", 2.0);
        cfg.exceptional.im_min = get_num(b, "exceptional.box.", "im_min", -2.0);
        cfg.exceptional.im_max = get_num(b, "exceptional.box.", "im_max", 2.0);
        if (cfg.exceptional.re_min > cfg.exceptional.re_max ||
            cfg.exceptional.im_min > cfg.exceptional.im_max)
            throw ConfigError("exceptional.box is empty (min > max)");
    }
    cfg.exceptional.grid = get_int(e, "exceptional.", "grid", 12);
    if (cfg.exceptional.grid < 2) throw ConfigError("exceptional.grid must be >= 2");
    cfg.exceptional.accept_residual = get_positive(e, "exceptional.", "accept_residual", 1e-9);
    cfg.exceptional.pair_gap_tol = get_positive(e, "exceptional.", "pair_gap_tol", 1e-6);
    cfg.exceptional.cluster_radius = get_positive(e, "exceptional.", "cluster_radius", 1e-6);
    if (e.contains("ring_polish")) {
        if (!e["ring_polish"].is_boolean())
            throw ConfigError("exceptional.ring_polish must be a boolean");
        cfg.exceptional.ring_polish = e["ring_polish"].get<bool>();
    }
    if (e.contains("real_scan")) {
        const json& r = e["real_scan"];
        if (!r.is_object()) throw ConfigError("exceptional.real_scan must be an object");
        check_keys(r, "exceptional.real_scan", {"min", "max", "steps"});
        cfg.real_scan.g_min = get_num(r, "exceptional.real_scan.", "min", -2.0);
        cfg.real_scan.g_max = get_num(r, "exceptional.real_scan.", "max", 2.0);
        cfg.real_scan.steps = get_int(r, "exceptional.real_scan.", "steps", 401);
        if (!(cfg.real_scan.g_min < cfg.real_scan.g_max) || cfg.real_scan.steps < 2)
            throw ConfigError("exceptional.real_scan needs min < max and steps >= 2");
    }
}

void parse_output(const json& j, RunConfig& cfg) {
    if (!j.contains("output")) return;
    const json& o = j["output"];
    if (!o.is_object()) throw ConfigError("config key output must be an object");
    check_keys(o, "output", {"dir", "formats", "log_level"});
    cfg.output.dir = get_str(o, "output.", "dir", cfg.output.dir);
    cfg.output.log_level = get_str(o, "output.", "log_level", std::string("info"));
    expect_one_of("output.log_level", cfg.output.log_level, {"quiet", "info", "debug"});
    if (o.contains("formats")) {
        if (!o["formats"].is_array()) throw ConfigError("output.formats must be an array");
        cfg.output.csv = cfg.output.json = false;
        for (const auto& f : o["formats"]) {
            if (!f.is_string()) throw ConfigError("output.formats entries must be strings");
            const std::string s = f.get<std::string>();
            expect_one_of("output.formats", s, {"csv", "json"});
            (s == "csv" ? cfg.output.csv : cfg.output.json) = true;
        }
    }
}

json echo_config(const RunConfig& cfg) {
    json j;
    j["dimension"] = static_cast<int>(cfg.dimension);
    j["h0"]["mode"] = cfg.h0_mode;
    if (cfg.h0_mode == "explicit") {
        json vals = json::array();
        for (Eigen::Index i = 0; i < cfg.h0_values.size(); ++i) vals.push_back(cfg.h0_values[i]);
        j["h0"]["values"] = vals;
    } else {
        j["h0"]["min"] = cfg.h0_min;
        j["h0"]["step"] = cfg.h0_step;
    }
    j["h1"]["mode"] = cfg.h1_mode;
    if (cfg.h1_mode == "explicit") {
        json rows = json::array();
        for (Eigen::Index r = 0; r < cfg.h1_matrix.rows(); ++r) {
            json row = json::array();
            for (Eigen::Index c = 0; c < cfg.h1_matrix.cols(); ++c)
                row.push_back(cfg.h1_matrix(r, c));
            rows.push_back(row);
        }
        j["h1"]["matrix"] = rows;
    } else if (cfg.h1_mode == "random") {
        j["h1"]["sigma"] = cfg.h1_sigma;
    }
    j["g"] = cfg.g;
    if (cfg.seed_given) j["seed"] = cfg.seed;
    j["eigen"]["dense_threshold"] = static_cast<int>(cfg.dense_threshold);
    j["flow"] = {{"k_min", cfg.flow.k_min},
                 {"variant", to_string(cfg.flow.step.variant)},
                 {"target", to_string(cfg.flow.target)},
                 {"residual_tol", cfg.flow.step.residual_tol},
                 {"a1_floor", cfg.flow.step.a1_floor},
                 {"denom_floor", cfg.flow.step.denom_floor},
                 {"scan_radius", cfg.flow.step.scan_radius},
                 {"ode_h", cfg.flow.ode_h},
                 {"rhs_form", to_string(cfg.flow.rhs_form)},
                 {"fixed_point_tol", cfg.flow.fixed_point_tol}};
    j["thermal"] = {{"beta", cfg.thermal.beta},
                    {"beta_list", cfg.beta_list},
                    {"n", cfg.thermal.n},
                    {"k_min", cfg.thermal.k_min},
                    {"scan_radius", cfg.thermal.scan_radius},
                    {"n_cap", cfg.thermal_n_cap},
                    {"fit_radius", cfg.thermal_fit_radius}};
    j["exceptional"] = {{"box",
                         {{"re_min", cfg.exceptional.re_min},
                          {"re_max", cfg.exceptional.re_max},
                          {"im_min", cfg.exceptional.im_min},
                          {"im_max", cfg.exceptional.im_max}}},
                        {"grid", cfg.exceptional.grid},
                        {"real_scan",
                         {{"min", cfg.real_scan.g_min},
                          {"max", cfg.real_scan.g_max},
                          {"steps", cfg.real_scan.steps}}},
                        {"accept_residual", cfg.exceptional.accept_residual},
                        {"pair_gap_tol", cfg.exceptional.pair_gap_tol},
                        {"cluster_radius", cfg.exceptional.cluster_radius},
                        {"ring_polish", cfg.exceptional.ring_polish}};
    json formats = json::array();
    if (cfg.output.csv) formats.push_back("csv");
    if (cfg.output.json) formats.push_back("json");
    j["output"] = {
        {"dir", cfg.output.dir}, {"formats", formats}, {"log_level", cfg.output.log_level}};
    return j;
}

} // namespace

RunConfig parse_config(const json& j) {
    if (!j.is_object()) throw ConfigError("config root must be an object");
    check_keys(j, "",
               {"dimension", "h0", "h1", "g", "seed", "eigen", "flow", "thermal", "exceptional",
                "output"});
    RunConfig cfg;
    parse_h1(j, cfg);
    if (cfg.h1_mode == "model-a") {
        cfg.dimension = 3;
        if (j.contains("dimension") && get_int(j, "", "dimension") != 3)
            throw ConfigError("h1.mode=model-a fixes dimension=3");
    } else {
        cfg.dimension = get_int(j, "", "dimension");
        if (cfg.dimension < 2) throw ConfigError("dimension must be >= 2");
    }
    parse_h0(j, cfg);
    if (cfg.h0_mode == "explicit" && cfg.h0_values.size() != cfg.dimension)
        throw ConfigError("h0.values length " + std::to_string(cfg.h0_values.size()) +
                          " does not match dimension " + std::to_string(cfg.dimension));
    if (cfg.h1_mode == "explicit" && cfg.h1_matrix.rows() != cfg.dimension)
        throw ConfigError("h1.matrix size " + std::to_string(cfg.h1_matrix.rows()) +
                          " does not match dimension " + std::to_string(cfg.dimension));
    cfg.g = get_num(j, "", "g");
    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer())
            throw ConfigError("config key seed must be a non-negative integer");
        const auto s = j["seed"].get<long long>();
        if (s < 0) throw ConfigError("config key seed must be non-negative");
        cfg.seed = static_cast<std::uint64_t>(s);
        cfg.seed_given = true;
    } else if (cfg.h1_mode == "random") {
        throw ConfigError("h1.mode=random requires a seed");
    }
    if (j.contains("eigen")) {
        const json& e = j["eigen"];
        if (!e.is_object()) throw ConfigError("config key eigen must be an object");
        check_keys(e, "eigen", {"dense_threshold"});
        cfg.dense_threshold = get_int(e, "eigen.", "dense_threshold", 64);
        if (cfg.dense_threshold < 1) throw ConfigError("eigen.dense_threshold must be >= 1");
    }
    parse_flow(j, cfg);
    parse_thermal(j, cfg);
    parse_exceptional(j, cfg);
    parse_output(j, cfg);
    cfg.flow.step.dense_threshold = cfg.dense_threshold;
    cfg.raw = echo_config(cfg);
    return cfg;
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config parse error in " + path + ": " + e.what());
    }
    return parse_config(j);
}

void override_seed(RunConfig& cfg, std::uint64_t seed) {
    cfg.seed = seed;
    cfg.seed_given = true;
    cfg.raw["seed"] = seed;
}

void override_out_dir(RunConfig& cfg, const std::string& dir) {
    cfg.output.dir = dir;
    cfg.raw["output"]["dir"] = dir;
}

Model RunConfig::build_model() const {
    if (h1_mode == "model-a") {
        Model m = model_a(g);
        if (h0_mode == "explicit") {
            if ((h0_values - m.epsilon).cwiseAbs().maxCoeff() != 0.0)
                throw ConfigError("h1.mode=model-a fixes h0 to the 0,1,2 ladder");
        } else if (h0_min != 0.0 || h0_step != 1.0) {
            throw ConfigError("h1.mode=model-a fixes h0 to the 0,1,2 ladder");
        }
        return m;
    }
    Eigen::VectorXd eps = h0_mode == "explicit"
                              ? h0_values
                              : ladder_spectrum(dimension, h0_min, h0_step);
    Eigen::MatrixXd v = h1_mode == "explicit" ? h1_matrix
                                              : random_symmetric(dimension, h1_sigma, seed);
    return make_model(std::move(eps), std::move(v), g);
}

} // namespace hflow
