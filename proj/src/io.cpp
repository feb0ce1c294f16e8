#include "hflow/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace hflow {

std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string fingerprint_hex(std::uint64_t h) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void ensure_dir(const std::string& path) {
    std::error_code ec;
    std::filesystem::create_directories(path, ec);
    if (ec) throw Error("cannot create directory " + path + ": " + ec.message());
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + path + " for writing");
    out << content;
    if (!out) throw Error("write failed for " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

namespace {
struct Csv {
    std::ostringstream out;
    bool first_field = true;

    explicit Csv(const char* header) { out << header << "\n"; }
    Csv& field(const std::string& s) {
        if (!first_field) out << ",";
        out << s;
        first_field = false;
        return *this;
    }
    Csv& field(double x) { return field(fmt17(x)); }
    Csv& field(int x) { return field(std::to_string(x)); }
    Csv& field(bool x) { return field(std::string(x ? "1" : "0")); }
    void endrow() {
        out << "\n";
        first_field = true;
    }
    std::string str() const { return out.str(); }
};
} // namespace

std::string csv_spectrum(const Spectrum& s) {
    Csv csv("index,eigenvalue");
    for (Eigen::Index i = 0; i < s.values.size(); ++i) {
        csv.field(static_cast<int>(i)).field(s.values[i]);
        csv.endrow();
    }
    return csv.str();
}

std::string csv_ground_state(const EigenPair& p) {
    Csv csv("index,component");
    for (Eigen::Index i = 0; i < p.vector.size(); ++i) {
        csv.field(static_cast<int>(i)).field(p.vector[i]);
        csv.endrow();
    }
    return csv.str();
}

std::string csv_trajectory(const FlowTrajectory& traj) {
    Csv csv("k_from,k_to,g_in,g_out,root1_re,root1_im,root2_re,root2_im,selection,residual,"
            "lambda_target,lambda_after,drift,a,b,c,variant");
    for (const auto& s : traj.steps) {
        csv.field(s.k_from)
            .field(s.k_to)
            .field(s.g_in)
            .field(s.g_out)
            .field(s.root1.real())
            .field(s.root1.imag())
            .field(s.root2.real())
            .field(s.root2.imag())
            .field(std::string(to_string(s.selection)))
            .field(s.residual)
            .field(s.lambda_target)
            .field(s.lambda_after)
            .field(s.drift)
            .field(s.coefficients.a)
            .field(s.coefficients.b)
            .field(s.coefficients.c)
            .field(std::string(to_string(s.coefficients.variant)));
        csv.endrow();
    }
    return csv.str();
}

std::string csv_ode_track(const OdeTrack& track) {
    Csv csv("x,g_ode,rhs");
    for (std::size_t i = 0; i < track.x.size(); ++i) {
        csv.field(track.x[i]).field(track.g[i]).field(track.rhs[i]);
        csv.endrow();
    }
    return csv.str();
}

std::string csv_drift(const std::vector<DriftRow>& rows) {
    Csv csv("k,g,drift,naive_drift");
    for (const auto& r : rows) {
        csv.field(r.k).field(r.g).field(r.drift).field(r.naive_drift);
        csv.endrow();
    }
    return csv.str();
}

std::string csv_fixed_points(const std::vector<FixedPoint>& fps) {
    Csv csv("x,g,kind,x_hi,x_lo,dlambda1_dg");
    for (const auto& fp : fps) {
        csv.field(fp.x)
            .field(fp.g)
            .field(std::string(to_string(fp.kind)))
            .field(fp.x_hi)
            .field(fp.x_lo)
            .field(fp.has_dlambda ? fmt17(fp.dlambda1_dg) : std::string("nan"));
        csv.endrow();
    }
    return csv.str();
}

std::string csv_thermal(const ThermalTrajectory& traj) {
    Csv csv("k,beta,n,g_in,g_out,Z_target,Z_matched,residual");
    for (const auto& s : traj.steps) {
        csv.field(s.k)
            .field(s.beta)
            .field(s.n)
            .field(s.g_in)
            .field(s.g_out)
            .field(s.z_target)
            .field(s.z_matched)
            .field(s.residual);
        csv.endrow();
    }
    return csv.str();
}

std::string csv_gap_table(const std::vector<GapRow>& rows) {
    Csv csv("beta,free_energy,lambda1,gap");
    for (const auto& r : rows) {
        csv.field(r.beta).field(r.free_energy).field(r.lambda1).field(r.gap);
        csv.endrow();
    }
    return csv.str();
}

std::string csv_exceptional(const std::vector<ExceptionalPoint>& eps) {
    Csv csv("ge_re,ge_im,lambda_re,lambda_im,f_res,dfdl_res,pair_i,pair_j");
    for (const auto& ep : eps) {
        csv.field(ep.g_e.real())
            .field(ep.g_e.imag())
            .field(ep.lambda_e.real())
            .field(ep.lambda_e.imag())
            .field(ep.f_residual)
            .field(ep.dfdl_residual)
            .field(ep.pair_i)
            .field(ep.pair_j);
        csv.endrow();
    }
    return csv.str();
}

std::string csv_crossings(const CrossingReport& rep) {
    Csv csv("g,min_gap,is_avoided_min,is_degenerate");
    for (std::size_t i = 0; i < rep.g.size(); ++i) {
        csv.field(rep.g[i])
            .field(rep.min_gap[i])
            .field(static_cast<bool>(rep.is_avoided_min[i]))
            .field(static_cast<bool>(rep.is_degenerate[i]));
        csv.endrow();
    }
    return csv.str();
}

std::string csv_correlation(const std::vector<CorrelationRow>& rows) {
    Csv csv("fp_x,fp_g,nearest_degeneracy,dist_degeneracy,nearest_ep_re,dist_ep,dlambda1_dg");
    for (const auto& r : rows) {
        csv.field(r.fp_x)
            .field(r.fp_g)
            .field(r.has_degeneracy ? fmt17(r.nearest_degeneracy) : std::string("nan"))
            .field(r.has_degeneracy ? fmt17(r.dist_degeneracy) : std::string("nan"))
            .field(r.has_ep ? fmt17(r.nearest_ep_re) : std::string("nan"))
            .field(r.has_ep ? fmt17(r.dist_ep) : std::string("nan"))
            .field(r.dlambda1_dg);
        csv.endrow();
    }
    return csv.str();
}

} // namespace hflow
