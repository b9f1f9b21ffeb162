#pragma once

#include "ocl/config.hpp"
#include "ocl/convergence.hpp"
#include "ocl/errors.hpp"
#include "ocl/mesh_field.hpp"
#include "ocl/penalized_solver.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace ocl {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Hashing
// ---------------------------------------------------------------------------

/// Hex SHA-1 of "blob <size>\0<content>", the object id git assigns to a file.
inline std::string git_blob_sha1(const std::string& content) {
    const std::string header = "blob " + std::to_string(content.size()) + std::string(1, '\0');
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (ctx == nullptr) throw Error("sha1: cannot allocate digest context");
    const bool ok = EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                    EVP_DigestUpdate(ctx, header.data(), header.size()) == 1 &&
                    EVP_DigestUpdate(ctx, content.data(), content.size()) == 1 &&
                    EVP_DigestFinal_ex(ctx, digest, &len) == 1;
    EVP_MD_CTX_free(ctx);
    if (!ok) throw Error("sha1: digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

inline std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << content;
    if (!out) throw Error("write failed for '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

/// Rows t,x,u,theta for every snapshot and cell.
inline std::string snapshots_csv(const Trajectory& traj, const ObstacleSpec& theta) {
    std::ostringstream os;
    os << "t,x,u,theta\n";
    for (const auto& s : traj.snapshots) {
        const Grid1D& g = s.u.grid();
        const std::string t = format_real(s.t);
        for (std::size_t i = 0; i < g.n_cells(); ++i) {
            const double x = g.center(i);
            os << t << ',' << format_real(x) << ',' << format_real(s.u[i]) << ','
               << format_real(theta.value(s.t, x)) << '\n';
        }
    }
    return os.str();
}

/// Rows t,mass,lambda,phi,tv,linf,alpha for every recorded step.
inline std::string diagnostics_csv(const Trajectory& traj) {
    std::ostringstream os;
    os << "t,mass,lambda,phi,tv,linf,alpha\n";
    const auto& ts = traj.mass_series.times();
    for (std::size_t j = 0; j < ts.size(); ++j) {
        os << format_real(ts[j]) << ',' << format_real(traj.mass_series.values()[j]) << ','
           << format_real(traj.lambda_series.values()[j]) << ',' << format_real(traj.phi_series.values()[j])
           << ',' << format_real(traj.tv_series.values()[j]) << ',' << format_real(traj.linf_series.values()[j])
           << ',' << format_real(traj.alpha_series.values()[j]) << '\n';
    }
    return os.str();
}

inline std::string format_or_nan(double v) { return std::isfinite(v) ? format_real(v) : std::string("nan"); }

/// Rows n,eps,dx,max_phi,alpha_hat,mass_dev,tv_max,l1_gap_to_prev,entropy_min_residual.
inline std::string sweep_summary_csv(const std::vector<SweepRecord>& records, const CauchyReport& cauchy) {
    std::ostringstream os;
    os << "n,eps,dx,max_phi,alpha_hat,mass_dev,tv_max,l1_gap_to_prev,entropy_min_residual\n";
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        const double gap = i == 0 ? std::numeric_limits<double>::quiet_NaN() : cauchy.gaps[i - 1];
        os << format_real(r.n) << ',' << format_real(r.eps) << ',' << format_real(r.dx) << ','
           << format_or_nan(r.max_phi) << ',' << format_or_nan(r.alpha_hat) << ',' << format_or_nan(r.mass_dev)
           << ',' << format_or_nan(r.tv_max) << ',' << format_or_nan(gap) << ',' << format_or_nan(r.entropy_min)
           << '\n';
    }
    return os.str();
}

namespace detail {

inline std::vector<std::vector<double>> parse_csv_numbers(const std::string& text, const std::string& header,
                                                          const std::string& what) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != header) {
        throw ShapeError(what + ": expected header '" + header + "'");
    }
    const std::size_t cols = static_cast<std::size_t>(std::count(header.begin(), header.end(), ',')) + 1;
    std::vector<std::vector<double>> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<double> row;
        const char* p = line.c_str();
        for (std::size_t c = 0; c < cols; ++c) {
            char* end = nullptr;
            const double v = std::strtod(p, &end);
            if (end == p) throw ShapeError(what + ": bad number on line " + std::to_string(lineno));
            row.push_back(v);
            p = end;
            if (c + 1 < cols) {
                if (*p != ',') throw ShapeError(what + ": expected ',' on line " + std::to_string(lineno));
                ++p;
            }
        }
        if (*p != '\0') throw ShapeError(what + ": trailing data on line " + std::to_string(lineno));
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace detail

/// Rebuilds the snapshots of a trajectory on `grid` from snapshots_csv text.
inline std::vector<Snapshot> read_snapshots_csv(const std::string& text, const Grid1D& grid) {
    const auto rows = detail::parse_csv_numbers(text, "t,x,u,theta", "snapshots");
    const std::size_t N = grid.n_cells();
    if (rows.size() % N != 0) throw ShapeError("snapshots: row count is not a multiple of n_cells");
    std::vector<Snapshot> out;
    for (std::size_t k = 0; k < rows.size() / N; ++k) {
        std::vector<double> u(N);
        const double t = rows[k * N][0];
        for (std::size_t i = 0; i < N; ++i) {
            const auto& r = rows[k * N + i];
            if (r[0] != t) throw ShapeError("snapshots: time changes inside a snapshot block");
            if (std::abs(r[1] - grid.center(i)) > 1e-9 * std::max(1.0, grid.length())) {
                throw ShapeError("snapshots: cell centers do not match the configured grid");
            }
            u[i] = r[2];
        }
        out.push_back({t, Field(grid, std::move(u))});
    }
    return out;
}

inline void read_diagnostics_csv(const std::string& text, Trajectory& traj) {
    const auto rows = detail::parse_csv_numbers(text, "t,mass,lambda,phi,tv,linf,alpha", "diagnostics");
    traj.mass_series = {};
    traj.lambda_series = {};
    traj.phi_series = {};
    traj.tv_series = {};
    traj.linf_series = {};
    traj.alpha_series = {};
    for (const auto& r : rows) {
        traj.mass_series.push_back(r[0], r[1]);
        traj.lambda_series.push_back(r[0], r[2]);
        traj.phi_series.push_back(r[0], r[3]);
        traj.tv_series.push_back(r[0], r[4]);
        traj.linf_series.push_back(r[0], r[5]);
        traj.alpha_series.push_back(r[0], r[6]);
    }
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

inline constexpr const char* kVersion = "ocl 0.1.0";

/// Git-style hash of the canonical problem section of a resolved config.
inline std::string problem_hash(const json& resolved) { return git_blob_sha1(resolved.at("problem").dump()); }

/// Writes `content` under dir/name and appends {path, sha1, bytes} to files.
inline void write_tracked(const fs::path& dir, const std::string& name, const std::string& content, json& files) {
    write_file(dir / name, content);
    files.push_back({{"path", name}, {"sha1", git_blob_sha1(content)}, {"bytes", content.size()}});
}

/// Throws HashMismatch if any listed file is missing or differs from its hash.
inline void verify_inventory(const fs::path& dir, const json& manifest) {
    if (!manifest.contains("files")) throw HashMismatch("manifest has no file inventory");
    for (const auto& f : manifest.at("files")) {
        const std::string name = f.at("path").get<std::string>();
        const fs::path p = dir / name;
        if (!fs::exists(p)) throw HashMismatch("listed file '" + name + "' is missing");
        const std::string got = git_blob_sha1(read_file(p));
        if (got != f.at("sha1").get<std::string>()) {
            throw HashMismatch("content of '" + name + "' does not match its recorded hash");
        }
    }
}

} // namespace ocl
