#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <complex>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "hflow/config.hpp"
#include "hflow/eigensolve.hpp"
#include "hflow/exceptional.hpp"
#include "hflow/feshbach.hpp"
#include "hflow/flow.hpp"
#include "hflow/io.hpp"
#include "hflow/model.hpp"
#include "hflow/rng.hpp"
#include "hflow/svg.hpp"
#include "hflow/thermal.hpp"

namespace {

using hflow::fmt17;
using nlohmann::json;

struct Logger {
    std::string level = "info";
    bool on(const char* want) const {
        if (level == "quiet") return false;
        if (level == "info") return std::string(want) != "debug";
        return true;
    }
    template <typename... Args>
    void info(Args&&... args) const {
        if (!on("info")) return;
        (std::cout << ... << args) << "\n";
    }
};

json summary_base(const char* command, const hflow::RunConfig& cfg, const hflow::Model& m) {
    json j;
    j["command"] = command;
    j["config"] = cfg.raw;
    j["model_fingerprint"] = hflow::fingerprint_hex(hflow::fingerprint(m));
    j["warnings"] = m.warnings;
    return j;
}

void write_outputs(const hflow::RunConfig& cfg, const json& summary,
                   const std::vector<std::pair<std::string, std::string>>& csv_files,
                   const std::vector<std::pair<std::string, std::string>>& svg_files) {
    hflow::ensure_dir(cfg.output.dir);
    const std::string base = cfg.output.dir + "/";
    if (cfg.output.csv)
        for (const auto& [name, content] : csv_files)
            hflow::write_text_file(base + name, content);
    if (cfg.output.json)
        hflow::write_text_file(base + "summary.json", summary.dump(2) + "\n");
    for (const auto& [name, content] : svg_files)
        hflow::write_text_file(base + name, content);
}

int cmd_spectrum(const hflow::RunConfig& cfg, bool svg) {
    const hflow::Model m = cfg.build_model();
    const hflow::Spectrum spec = hflow::dense_spectrum(hflow::hamiltonian(m));
    const hflow::EigenPair low = hflow::lowest_pair(hflow::hamiltonian(m), cfg.dense_threshold);

    json summary = summary_base("spectrum", cfg, m);
    summary["lambda1"] = low.value;
    summary["lambda_max"] = spec.values[spec.values.size() - 1];
    summary["residual_norm"] = low.residual;

    std::vector<std::pair<std::string, std::string>> svgs;
    if (svg) {
        hflow::SvgSeries s{"eigenvalues", {}};
        for (Eigen::Index i = 0; i < spec.values.size(); ++i)
            s.points.emplace_back(static_cast<double>(i), spec.values[i]);
        svgs.emplace_back("spectrum.svg",
                          hflow::render_svg_lines("spectrum", "index", "eigenvalue", {s}));
    }
    write_outputs(cfg, summary,
                  {{"spectrum.csv", hflow::csv_spectrum(spec)},
                   {"ground_state.csv", hflow::csv_ground_state(low)}},
                  svgs);
    Logger{cfg.output.log_level}.info("spectrum: N=", m.dim(), " lambda1=", fmt17(low.value),
                                      " -> ", cfg.output.dir);
    return 0;
}

json track_json(const hflow::FlowTrajectory& traj) {
    json arr = json::array();
    for (const auto& kn : traj.track) arr.push_back({kn.x, kn.a, kn.b, kn.c});
    return arr;
}

int cmd_flow(const hflow::RunConfig& cfg, bool svg) {
    const hflow::Model m = cfg.build_model();
    const hflow::FlowTrajectory traj = hflow::run_discrete_flow(m, cfg.flow);

    // fresh per-k drift for both the renormalized and the naive-truncation
    // couplings (never accumulated)
    std::vector<hflow::DriftRow> drift;
    for (int k = traj.n0; k >= cfg.flow.k_min; --k) {
        hflow::DriftRow row;
        row.k = k;
        bool have_g = true;
        try {
            row.g = traj.g_of_k(k);
        } catch (const hflow::Error&) {
            have_g = false; // flow broke down before reaching k
        }
        if (!have_g) break;
        hflow::Model cut = hflow::detail::head(m, k);
        cut.g = row.g;
        row.drift = std::abs(hflow::lowest_pair(hflow::hamiltonian(cut), cfg.dense_threshold).value -
                             traj.lambda1_target);
        cut.g = m.g;
        row.naive_drift =
            std::abs(hflow::lowest_pair(hflow::hamiltonian(cut), cfg.dense_threshold).value -
                     traj.lambda1_target);
        drift.push_back(row);
    }

    hflow::OdeTrack track;
    std::vector<hflow::FixedPoint> fps;
    std::string ode_status = "ok";
    if (traj.track.size() >= 4) {
        track = hflow::integrate_flow_ode(traj, cfg.flow);
        fps = hflow::detect_fixed_points(track, cfg.flow.fixed_point_tol, &m,
                                         cfg.dense_threshold);
        if (track.singular_at) ode_status = "singular";
    } else {
        ode_status = "skipped (needs >= 4 coefficient knots)";
    }

    json summary = summary_base("flow", cfg, m);
    summary["lambda1_target"] = traj.lambda1_target;
    summary["steps"] = traj.steps.size();
    summary["g_final"] = traj.steps.empty() ? traj.g0 : traj.steps.back().g_out;
    if (traj.breakdown_at) {
        summary["breakdown_at"] = *traj.breakdown_at;
        summary["breakdown_reason"] = traj.breakdown_reason;
    } else {
        summary["breakdown_at"] = nullptr;
    }
    summary["coefficient_track"] = track_json(traj);
    summary["ode"] = {{"status", ode_status}, {"points", track.x.size()}};
    if (track.singular_at) summary["ode"]["singular_at"] = *track.singular_at;
    summary["fixed_points"] = fps.size();

    std::vector<std::pair<std::string, std::string>> svgs;
    if (svg) {
        hflow::SvgSeries gk{"g discrete", {}}, gode{"g ode", {}};
        for (const auto& r : drift) gk.points.emplace_back(r.k, r.g);
        for (std::size_t i = 0; i < track.x.size(); ++i)
            gode.points.emplace_back(track.x[i], track.g[i]);
        svgs.emplace_back("flow_g.svg", hflow::render_svg_lines("coupling flow", "k", "g",
                                                                {gk, gode}));
        hflow::SvgSeries dr{"renormalized", {}}, dn{"naive", {}};
        for (const auto& r : drift) {
            dr.points.emplace_back(r.k, r.drift);
            dn.points.emplace_back(r.k, r.naive_drift);
        }
        svgs.emplace_back("flow_drift.svg", hflow::render_svg_lines("ground-state drift", "k",
                                                                    "|lambda1 - target|",
                                                                    {dr, dn}, true));
    }
    write_outputs(cfg, summary,
                  {{"trajectory.csv", hflow::csv_trajectory(traj)},
                   {"ode_track.csv", hflow::csv_ode_track(track)},
                   {"drift.csv", hflow::csv_drift(drift)},
                   {"fixed_points.csv", hflow::csv_fixed_points(fps)}},
                  svgs);
    Logger log{cfg.output.log_level};
    log.info("flow: N=", traj.n0, " k_min=", cfg.flow.k_min, " steps=", traj.steps.size(),
             " g_final=", fmt17(traj.steps.empty() ? traj.g0 : traj.steps.back().g_out),
             traj.breakdown_at ? " breakdown_at=" + std::to_string(*traj.breakdown_at) + " (" +
                                     traj.breakdown_reason + ")"
                               : "",
             " -> ", cfg.output.dir);
    return 0;
}

int cmd_thermal(const hflow::RunConfig& cfg, bool svg) {
    const hflow::Model m = cfg.build_model();
    hflow::ThermalConfig tcfg = cfg.thermal;
    const hflow::ThermalTrajectory traj = hflow::run_thermal_flow(m, tcfg);
    const std::vector<hflow::GapRow> gaps = hflow::beta_limit_check(m, cfg.beta_list);

    json summary = summary_base("thermal", cfg, m);
    summary["steps"] = traj.steps.size();
    summary["g_final"] = traj.steps.empty() ? m.g : traj.steps.back().g_out;
    double max_res = 0.0;
    for (const auto& s : traj.steps) max_res = std::max(max_res, s.residual);
    summary["max_residual"] = max_res;
    if (traj.breakdown_at) {
        summary["breakdown_at"] = *traj.breakdown_at;
        summary["breakdown_reason"] = traj.breakdown_reason;
    } else {
        summary["breakdown_at"] = nullptr;
    }

    std::vector<std::pair<std::string, std::string>> svgs;
    if (svg) {
        hflow::SvgSeries gk{"g thermal", {}};
        for (const auto& s : traj.steps) gk.points.emplace_back(s.k - 1, s.g_out);
        svgs.emplace_back("thermal_g.svg",
                          hflow::render_svg_lines("thermal coupling flow", "k", "g", {gk}));
        hflow::SvgSeries gb{"gap", {}};
        for (const auto& r : gaps) gb.points.emplace_back(r.beta, r.gap);
        svgs.emplace_back("thermal_gap.svg",
                          hflow::render_svg_lines("free-energy gap", "beta", "lambda1 - F",
                                                  {gb}, true));
    }
    write_outputs(cfg, summary,
                  {{"thermal.csv", hflow::csv_thermal(traj)},
                   {"gap_table.csv", hflow::csv_gap_table(gaps)}},
                  svgs);
    Logger log{cfg.output.log_level};
    log.info("thermal: N=", m.dim(), " beta=", fmt17(tcfg.beta), " n=", tcfg.n,
             " steps=", traj.steps.size(), " max_residual=", fmt17(max_res),
             traj.breakdown_at ? " breakdown_at=" + std::to_string(*traj.breakdown_at) + " (" +
                                     traj.breakdown_reason + ")"
                               : "",
             " -> ", cfg.output.dir);
    return 0;
}

int cmd_exceptional(const hflow::RunConfig& cfg, bool svg) {
    const hflow::Model m = cfg.build_model();
    const std::vector<hflow::ExceptionalPoint> eps =
        hflow::find_exceptional_points(m, cfg.exceptional);
    const hflow::CrossingReport crossings =
        hflow::scan_real_axis(m, cfg.real_scan.g_min, cfg.real_scan.g_max, cfg.real_scan.steps);

    // fixed points from the T=0 flow of the same model, when it supports one
    std::vector<hflow::FixedPoint> fps;
    std::string flow_status = "ok";
    try {
        const hflow::FlowTrajectory traj = hflow::run_discrete_flow(m, cfg.flow);
        if (traj.track.size() >= 4) {
            const hflow::OdeTrack track = hflow::integrate_flow_ode(traj, cfg.flow);
            fps = hflow::detect_fixed_points(track, cfg.flow.fixed_point_tol, &m,
                                             cfg.dense_threshold);
        } else {
            flow_status = "skipped (needs >= 4 coefficient knots)";
        }
    } catch (const std::exception& e) {
        flow_status = std::string("unavailable: ") + e.what();
    }
    const std::vector<hflow::CorrelationRow> corr =
        hflow::fixed_vs_exceptional_report(fps, eps, crossings);

    json summary = summary_base("exceptional", cfg, m);
    summary["exceptional_points"] = json::array();
    for (const auto& ep : eps)
        summary["exceptional_points"].push_back({{"ge_re", ep.g_e.real()},
                                                 {"ge_im", ep.g_e.imag()},
                                                 {"lambda_re", ep.lambda_e.real()},
                                                 {"lambda_im", ep.lambda_e.imag()},
                                                 {"pair_gap", ep.pair_gap},
                                                 {"conjugate_of", ep.conjugate_of}});
    summary["degenerate_hits"] = crossings.degenerate_hits;
    summary["flow_fixed_points"] = fps.size();
    summary["flow_status"] = flow_status;
    double min_feshbach_gap = std::numeric_limits<double>::infinity();
    for (double v : crossings.feshbach_gap) min_feshbach_gap = std::min(min_feshbach_gap, v);
    summary["min_feshbach_gap"] = min_feshbach_gap;

    std::vector<std::pair<std::string, std::string>> svgs;
    if (svg) {
        hflow::SvgSeries gap{"min gap", {}};
        for (std::size_t i = 0; i < crossings.g.size(); ++i)
            gap.points.emplace_back(crossings.g[i], crossings.min_gap[i]);
        svgs.emplace_back("crossings.svg", hflow::render_svg_lines("adjacent-level gap", "g",
                                                                   "min gap", {gap}, true));
    }
    write_outputs(cfg, summary,
                  {{"exceptional.csv", hflow::csv_exceptional(eps)},
                   {"crossings.csv", hflow::csv_crossings(crossings)},
                   {"correlation.csv", hflow::csv_correlation(corr)}},
                  svgs);
    Logger log{cfg.output.log_level};
    log.info("exceptional: N=", m.dim(), " points=", eps.size(),
             " degenerate_hits=", crossings.degenerate_hits.size(), " -> ", cfg.output.dir);
    return 0;
}

// Built-in oracle suite: quick self-checks with no config, one line each.
int cmd_verify() {
    int failures = 0;
    auto check = [&](const char* name, bool ok) {
        std::cout << (ok ? "PASS " : "FAIL ") << name << "\n";
        if (!ok) ++failures;
    };

    {
        hflow::SplitMix64 rng(42);
        const bool ok = rng.next() == 0xbdd732262feb6e95ULL &&
                        rng.next() == 0x28efe333b266f103ULL &&
                        rng.next() == 0x47526757130f9f52ULL;
        check("splitmix64 reference stream (seed 42)", ok);
    }
    {
        const hflow::Model m = hflow::model_a(0.5);
        const Eigen::MatrixXd h = hflow::hamiltonian(m);
        const hflow::Spectrum s = hflow::dense_spectrum(h);
        double worst = 0.0;
        for (Eigen::Index i = 0; i < 3; ++i) {
            const Eigen::MatrixXd heff = hflow::effective_hamiltonian(m, s.values[i]);
            const Eigen::VectorXd p = s.vectors.col(i).head(2);
            worst = std::max(worst, (heff * p - s.values[i] * p).norm());
        }
        check("exact decoupling of the effective Hamiltonian", worst <= 1e-10 * h.norm());
    }
    {
        const hflow::Model m = hflow::model_a(0.5);
        const hflow::EigenPair low = hflow::dense_lowest(hflow::hamiltonian(m));
        const auto q = hflow::quadratic_coefficients(m, low, hflow::Variant::derived);
        double worst = 0.0;
        for (double gp : {-1.0, -0.3, 0.0, 0.3, 0.7, 1.3}) {
            const double lhs = (q.a * gp + q.b) * gp + q.c;
            const double den = low.value - m.epsilon[2] - gp * m.v(2, 2);
            const double rhs = den * hflow::constraint_residual(m, low, gp);
            worst = std::max(worst, std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs)));
        }
        check("derived quadratic reproduces the constraint", worst <= 1e-12);
    }
    {
        Eigen::MatrixXd v(2, 2);
        v << 0, 1, 1, 0;
        const hflow::Model m = hflow::make_model(hflow::ladder_spectrum(2), v, 0.5);
        hflow::EpSearchConfig ecfg;
        ecfg.grid = 8;
        const auto eps = hflow::find_exceptional_points(m, ecfg);
        bool ok = eps.size() == 2;
        for (const auto& ep : eps)
            ok = ok && std::abs(std::abs(ep.g_e.imag()) - 0.5) <= 1e-9 &&
                 std::abs(ep.g_e.real()) <= 1e-9 && std::abs(ep.lambda_e - hflow::cxd(0.5, 0)) <= 1e-9;
        check("two-level exceptional points at +-i/2, lambda 1/2", ok);
    }
    {
        Eigen::MatrixXd v = Eigen::MatrixXd::Zero(3, 3);
        const hflow::Model m = hflow::make_model(hflow::ladder_spectrum(3), v, 0.0);
        const double exact = hflow::exact_partition(m, 1.0);
        const double e64 = std::abs(hflow::trotter_partition(m, 1.0, 64) - exact);
        const double e128 = std::abs(hflow::trotter_partition(m, 1.0, 128) - exact);
        const double ratio = e128 / e64;
        check("Trotter error halves when n doubles", ratio > 0.35 && ratio < 0.65);
    }
    {
        // printed-form flow equation on the synthetic a=0, b=1, c=x fixture
        std::vector<double> xs{0, 1, 2, 3, 4, 5};
        std::vector<double> zeros(6, 0.0), ones(6, 1.0), lin{0, 1, 2, 3, 4, 5};
        hflow::CoefficientInterpolant itp{hflow::CubicSpline(xs, zeros),
                                          hflow::CubicSpline(xs, ones),
                                          hflow::CubicSpline(xs, lin)};
        const double rhs = hflow::continuum_rhs(2.5, 0.7, itp, hflow::RhsForm::printed);
        check("printed flow equation on linear synthetic coefficients", std::abs(rhs - 1.0) <= 1e-12);
    }
    if (failures == 0) {
        std::cout << "verify: all checks passed\n";
        return 0;
    }
    std::cout << "verify: " << failures << " check(s) failed\n";
    return 3;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"hilbert-flow: renormalized coupling flows under Hilbert-space truncation"};
    app.require_subcommand(1);

    struct SubArgs {
        std::string config;
        std::string out;
        bool svg = false;
        std::uint64_t seed = 0;
        CLI::Option* seed_opt = nullptr;
    };
    std::map<std::string, SubArgs> args;
    for (const char* name : {"spectrum", "flow", "thermal", "exceptional"}) {
        CLI::App* sub = app.add_subcommand(name);
        SubArgs& a = args[name];
        sub->add_option("--config", a.config, "run configuration file (JSON)")->required();
        sub->add_option("--out", a.out, "output directory (overrides output.dir)");
        sub->add_flag("--svg", a.svg, "also render SVG plots");
        a.seed_opt = sub->add_option("--seed", a.seed, "override the model seed");
    }
    app.add_subcommand("verify", "run the built-in oracle suite");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand("verify")) return cmd_verify();
        for (const char* name : {"spectrum", "flow", "thermal", "exceptional"}) {
            if (!app.got_subcommand(name)) continue;
            SubArgs& a = args[name];
            hflow::RunConfig cfg = hflow::parse_config_file(a.config);
            if (a.seed_opt->count() > 0) hflow::override_seed(cfg, a.seed);
            if (!a.out.empty()) hflow::override_out_dir(cfg, a.out);
            const std::string n = name;
            if (n == "spectrum") return cmd_spectrum(cfg, a.svg);
            if (n == "flow") return cmd_flow(cfg, a.svg);
            if (n == "thermal") return cmd_thermal(cfg, a.svg);
            return cmd_exceptional(cfg, a.svg);
        }
        std::cerr << "error: no subcommand selected\n";
        return 2;
    } catch (const hflow::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
