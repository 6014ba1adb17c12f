#pragma once

// Evaluation battery: voxelization + Dice, exact surface distances (ASSD,
// Hausdorff), node-wise normalized absolute errors and their per-subject /
// per-node aggregates, Bland-Altman agreement, centerline resampling and
// k-nearest-node profile sampling, discrete Frechet distance, and the
// Wilcoxon signed-rank test.

#include "flowmesh/core.hpp"
#include "flowmesh/fields.hpp"
#include "flowmesh/geometry.hpp"
#include "flowmesh/mesh.hpp"
#include "flowmesh/spatial.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

namespace flowmesh {

// ---------------------------------------------------------------------------
// Voxelization and Dice.

struct GridSpec {
    std::array<int, 3> dims{1, 1, 1};
    Vec3 spacing = Vec3::Ones();
    Vec3 origin = Vec3::Zero();  // center of voxel (0,0,0)

    bool operator==(const GridSpec& other) const {
        return dims == other.dims && spacing == other.spacing && origin == other.origin;
    }
};

struct VoxelMask {
    GridSpec grid;
    std::vector<std::uint8_t> values;  // x fastest

    std::size_t count_set() const {
        std::size_t n = 0;
        for (auto v : values) n += (v != 0);
        return n;
    }
};

// Expands `spec` (preserving spacing and voxel-center lattice alignment)
// until the voxel centers span the mesh bounding box. Callers that need a
// covering grid (e.g. segmentation evaluation) apply this before voxelizing;
// voxelize itself evaluates the given lattice as-is, so a grid that misses
// the mesh yields an all-zero mask.
inline GridSpec cover_mesh(GridSpec spec, const VolumeMesh& mesh) {
    Aabb box;
    for (const auto& v : mesh.vertices()) box.expand(v);
    for (int k = 0; k < 3; ++k) {
        const double s = spec.spacing[k];
        int lo_idx = int(std::floor((box.lo[k] - spec.origin[k]) / s));
        int hi_idx = int(std::ceil((box.hi[k] - spec.origin[k]) / s));
        if (lo_idx < 0) {
            spec.origin[k] += lo_idx * s;
            hi_idx -= lo_idx;
            lo_idx = 0;
        }
        spec.dims[k] = std::max(spec.dims[k], hi_idx + 1);
    }
    return spec;
}

// A voxel is set iff its center lies inside any tetrahedron
// (boundary-inclusive via the locator's barycentric tolerance).
inline VoxelMask voxelize(const VolumeMesh& mesh, const GridSpec& spec) {
    VoxelMask mask;
    mask.grid = spec;
    const std::size_t total = std::size_t(spec.dims[0]) * spec.dims[1] * spec.dims[2];
    mask.values.assign(total, 0);
    const TetLocator locator(mesh.vertices(), mesh.tets());
    parallel_for(total, [&](std::size_t idx) {
        const int x = int(idx % spec.dims[0]);
        const int y = int((idx / spec.dims[0]) % spec.dims[1]);
        const int z = int(idx / (std::size_t(spec.dims[0]) * spec.dims[1]));
        const Vec3 center = spec.origin + Vec3(x * spec.spacing[0], y * spec.spacing[1],
                                               z * spec.spacing[2]);
        std::array<double, 4> lambda;
        if (locator.locate(center, lambda) >= 0) mask.values[idx] = 1;
    });
    return mask;
}

inline double dice(const VoxelMask& a, const VoxelMask& b) {
    require(a.grid == b.grid, errc::grid_mismatch, "dice masks live on different grids");
    std::size_t inter = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        na += (a.values[i] != 0);
        nb += (b.values[i] != 0);
        inter += (a.values[i] != 0 && b.values[i] != 0);
    }
    if (na + nb == 0) return 1.0;
    return 2.0 * double(inter) / double(na + nb);
}

// ---------------------------------------------------------------------------
// Surface distances: vertex-to-surface sampled, exact point-triangle
// distances. ASSD is the mean over the union of both directed distance sets;
// HD is the max.

struct SurfaceDistanceResult {
    double assd = 0.0;
    double hd = 0.0;
};

struct TriSurface {
    std::vector<Vec3> vertices;                 // surface vertex positions
    std::vector<Vec3> all_positions;            // positions indexed by triangles
    std::vector<std::array<int, 3>> triangles;  // indices into all_positions
};

inline TriSurface surface_of(const VolumeMesh& mesh) {
    TriSurface s;
    s.all_positions = mesh.vertices();
    s.triangles = mesh.surface_triangles();
    s.vertices.reserve(mesh.surface_vertices().size());
    for (int idx : mesh.surface_vertices()) s.vertices.push_back(mesh.vertices()[idx]);
    return s;
}

inline SurfaceDistanceResult surface_distances(const TriSurface& a, const TriSurface& b) {
    require(!a.triangles.empty() && !b.triangles.empty(), errc::empty_surface,
            "surface distance over empty surface");
    require(!a.vertices.empty() && !b.vertices.empty(), errc::empty_surface,
            "surface distance needs sample vertices");
    const TriangleGrid grid_b(b.all_positions, b.triangles);
    const TriangleGrid grid_a(a.all_positions, a.triangles);

    std::vector<double> da(a.vertices.size()), db(b.vertices.size());
    parallel_for(a.vertices.size(), [&](std::size_t i) {
        da[i] = std::sqrt(grid_b.dist2(a.vertices[i]));
    });
    parallel_for(b.vertices.size(), [&](std::size_t i) {
        db[i] = std::sqrt(grid_a.dist2(b.vertices[i]));
    });

    SurfaceDistanceResult out;
    out.assd = (pairwise_sum(da) + pairwise_sum(db)) / double(da.size() + db.size());
    out.hd = 0.0;
    for (double d : da) out.hd = std::max(out.hd, d);
    for (double d : db) out.hd = std::max(out.hd, d);
    return out;
}

inline SurfaceDistanceResult surface_distances(const VolumeMesh& a, const VolumeMesh& b) {
    return surface_distances(surface_of(a), surface_of(b));
}

// ---------------------------------------------------------------------------
// Node-wise errors. Channels: pressure, vx, vy, vz, velocity magnitude.
// NAE is |pred - truth| / range(truth channel), in percent.

inline constexpr int kErrorChannels = 5;
inline const char* const kErrorChannelNames[kErrorChannels] = {
    "pressure", "velocity_x", "velocity_y", "velocity_z", "velocity_magnitude"};

struct NodeErrorResult {
    // nae[c][j]: per-channel, per-node normalized absolute error (percent).
    std::array<std::vector<double>, kErrorChannels> nae;
    std::array<double, kErrorChannels> mnae_s{};  // mean over nodes, percent
    std::array<double, kErrorChannels> rmse{};    // physical units
};

namespace detail {

inline std::array<std::vector<double>, kErrorChannels> field_channels(const NodeFields& f) {
    std::array<std::vector<double>, kErrorChannels> ch;
    const std::size_t n = f.node_count();
    for (auto& c : ch) c.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        ch[0][j] = f.pressure[j];
        ch[1][j] = f.velocity[j][0];
        ch[2][j] = f.velocity[j][1];
        ch[3][j] = f.velocity[j][2];
        ch[4][j] = f.velocity[j].norm();
    }
    return ch;
}

}  // namespace detail

inline NodeErrorResult node_errors(const NodeFields& pred, const NodeFields& truth) {
    require(pred.node_count() == truth.node_count(), errc::field_length_mismatch,
            "node_errors field lengths differ");
    require(pred.space == FieldSpace::raw && truth.space == FieldSpace::raw, errc::wrong_space,
            "node_errors expects raw-space fields");
    const std::size_t n = pred.node_count();
    require(n > 0, errc::field_length_mismatch, "node_errors over empty fields");

    const auto pc = detail::field_channels(pred);
    const auto tc = detail::field_channels(truth);

    NodeErrorResult out;
    for (int c = 0; c < kErrorChannels; ++c) {
        const auto [lo_it, hi_it] = std::minmax_element(tc[c].begin(), tc[c].end());
        const double range = *hi_it - *lo_it;
        require(range > 0.0, errc::zero_range,
                std::string("constant truth channel '") + kErrorChannelNames[c] + "'");
        out.nae[c].resize(n);
        for (std::size_t j = 0; j < n; ++j)
            out.nae[c][j] = 100.0 * std::abs(pc[c][j] - tc[c][j]) / range;
        out.mnae_s[c] = pairwise_sum(out.nae[c]) / double(n);
        out.rmse[c] = std::sqrt(pairwise_sum(n, [&](std::size_t j) {
                          const double d = pc[c][j] - tc[c][j];
                          return d * d;
                      }) / double(n));
    }
    return out;
}

// Per-node mean of NAE across subjects (population of point-correspondent
// meshes), per channel.
inline std::array<std::vector<double>, kErrorChannels>
population_node_errors(const std::vector<NodeErrorResult>& subjects) {
    require(!subjects.empty(), errc::length_mismatch, "population over zero subjects");
    const std::size_t n = subjects.front().nae[0].size();
    for (const auto& s : subjects)
        for (const auto& ch : s.nae)
            require(ch.size() == n, errc::length_mismatch,
                    "subjects disagree on node count");
    std::array<std::vector<double>, kErrorChannels> out;
    const double inv = 1.0 / double(subjects.size());
    for (int c = 0; c < kErrorChannels; ++c) {
        out[c].resize(n);
        for (std::size_t j = 0; j < n; ++j) {
            out[c][j] = pairwise_sum(subjects.size(), [&](std::size_t s) {
                            return subjects[s].nae[c][j];
                        }) * inv;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Bland-Altman agreement.

struct BlandAltmanResult {
    double bias = 0.0;
    double loa_low = 0.0;
    double loa_high = 0.0;
};

inline BlandAltmanResult bland_altman(const std::vector<double>& pred,
                                      const std::vector<double>& truth) {
    require(pred.size() == truth.size(), errc::length_mismatch, "bland_altman length mismatch");
    require(pred.size() >= 2, errc::too_few_samples, "bland_altman needs >= 2 samples");
    const std::size_t n = pred.size();
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = pred[i] - truth[i];
    BlandAltmanResult out;
    out.bias = pairwise_sum(d) / double(n);
    const double var = pairwise_sum(n, [&](std::size_t i) {
                           const double e = d[i] - out.bias;
                           return e * e;
                       }) / double(n - 1);  // sample standard deviation
    const double sd = std::sqrt(std::max(0.0, var));
    out.loa_low = out.bias - 1.96 * sd;
    out.loa_high = out.bias + 1.96 * sd;
    return out;
}

// ---------------------------------------------------------------------------
// Centerlines: resampling and k-nearest-node profiles.

struct Centerline {
    std::vector<Vec3> points;
    std::string label = "other";  // one of {LPA, RPA, inlet, other}

    void validate() const {
        require(points.size() >= 2, errc::degenerate_polyline, "centerline needs >= 2 points");
        for (std::size_t i = 1; i < points.size(); ++i)
            require((points[i] - points[i - 1]).squaredNorm() > 0.0, errc::degenerate_polyline,
                    "consecutive centerline points coincide");
    }
};

inline double polyline_length(const std::vector<Vec3>& pts) {
    double total = 0.0;
    for (std::size_t i = 1; i < pts.size(); ++i) total += (pts[i] - pts[i - 1]).norm();
    return total;
}

// n points at equal arc-length intervals; endpoints reproduced bit-exactly.
inline Centerline resample_centerline(const Centerline& line, int n) {
    require(n >= 2, errc::bad_argument, "resample needs n >= 2");
    require(line.points.size() >= 2, errc::degenerate_polyline, "polyline needs >= 2 points");
    const auto& pts = line.points;
    std::vector<double> prefix(pts.size(), 0.0);
    for (std::size_t i = 1; i < pts.size(); ++i)
        prefix[i] = prefix[i - 1] + (pts[i] - pts[i - 1]).norm();
    const double total = prefix.back();
    require(total > 0.0, errc::degenerate_polyline, "polyline has zero length");

    Centerline out;
    out.label = line.label;
    out.points.resize(n);
    out.points.front() = pts.front();
    out.points.back() = pts.back();
    std::size_t seg = 0;
    for (int i = 1; i < n - 1; ++i) {
        const double target = total * double(i) / double(n - 1);
        while (seg + 2 < pts.size() && prefix[seg + 1] < target) ++seg;
        const double seg_len = prefix[seg + 1] - prefix[seg];
        const double t = seg_len > 0.0 ? (target - prefix[seg]) / seg_len : 0.0;
        out.points[i] = pts[seg] + t * (pts[seg + 1] - pts[seg]);
    }
    return out;
}

struct ProfileSample {
    double s = 0.0;  // normalized arc length in [0, 1]
    double pressure = 0.0;
    double velocity_magnitude = 0.0;
};

// Per centerline point: unweighted mean of the k nearest mesh nodes'
// pressure and velocity-magnitude values. Exact k-NN, ties toward lower
// node index.
inline std::vector<ProfileSample> centerline_profile(const VolumeMesh& mesh,
                                                     const NodeFields& fields,
                                                     const Centerline& line, int k) {
    require(k >= 1, errc::bad_argument, "profile needs k >= 1");
    require(std::size_t(k) <= mesh.node_count(), errc::k_too_large,
            "profile k exceeds mesh node count");
    require(fields.node_count() == mesh.node_count(), errc::field_length_mismatch,
            "fields do not match mesh");
    require(fields.space == FieldSpace::raw, errc::wrong_space,
            "profiles sample raw-space fields");
    line.validate();

    const PointGrid grid(mesh.vertices());
    std::vector<double> prefix(line.points.size(), 0.0);
    for (std::size_t i = 1; i < line.points.size(); ++i)
        prefix[i] = prefix[i - 1] + (line.points[i] - line.points[i - 1]).norm();
    const double total = prefix.back();

    std::vector<ProfileSample> out(line.points.size());
    parallel_for(line.points.size(), [&](std::size_t i) {
        const auto nn = grid.k_nearest(line.points[i], k);
        double p = 0.0, vmag = 0.0;
        for (int idx : nn) {
            p += fields.pressure[idx];
            vmag += fields.velocity[idx].norm();
        }
        out[i].s = total > 0.0 ? prefix[i] / total : 0.0;
        out[i].pressure = p / double(k);
        out[i].velocity_magnitude = vmag / double(k);
    });
    return out;
}

// ---------------------------------------------------------------------------
// Discrete Frechet distance (Eiter-Mannila dynamic program).

inline double frechet_distance(const std::vector<Eigen::Vector2d>& a,
                               const std::vector<Eigen::Vector2d>& b) {
    require(!a.empty() && !b.empty(), errc::empty_curve, "frechet over empty curve");
    const std::size_t n = a.size(), m = b.size();
    std::vector<double> prev(m), curr(m);
    for (std::size_t j = 0; j < m; ++j) {
        const double d = (a[0] - b[j]).norm();
        prev[j] = j == 0 ? d : std::max(prev[j - 1], d);
    }
    for (std::size_t i = 1; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            const double d = (a[i] - b[j]).norm();
            double reach;
            if (j == 0) {
                reach = prev[0];
            } else {
                reach = std::min(std::min(prev[j], prev[j - 1]), curr[j - 1]);
            }
            curr[j] = std::max(reach, d);
        }
        std::swap(prev, curr);
    }
    return prev[m - 1];
}

// FD divided by the truth-channel value range, in percent.
inline double frechet_normalized(const std::vector<Eigen::Vector2d>& a,
                                 const std::vector<Eigen::Vector2d>& b, double range) {
    require(range > 0.0, errc::zero_range, "frechet normalization range must be > 0");
    return 100.0 * frechet_distance(a, b) / range;
}

// Embeds a profile channel as (normalized arc length, value) points so the
// Frechet distance is dominated by value discrepancies.
inline std::vector<Eigen::Vector2d> profile_curve(const std::vector<ProfileSample>& profile,
                                                  bool velocity_channel) {
    std::vector<Eigen::Vector2d> out(profile.size());
    for (std::size_t i = 0; i < profile.size(); ++i)
        out[i] = Eigen::Vector2d(profile[i].s,
                                 velocity_channel ? profile[i].velocity_magnitude
                                                  : profile[i].pressure);
    return out;
}

// ---------------------------------------------------------------------------
// Wilcoxon signed-rank test. Zero differences are dropped; ties get average
// ranks; exact two-sided p by sign-assignment distribution for n <= 10,
// normal approximation with tie and continuity correction above.

struct WilcoxonResult {
    double w = 0.0;   // min(W+, W-)
    double p = 1.0;
    int n_effective = 0;
};

inline WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& a,
                                           const std::vector<double>& b) {
    require(a.size() == b.size(), errc::length_mismatch, "wilcoxon length mismatch");
    require(!a.empty(), errc::length_mismatch, "wilcoxon needs >= 1 pair");

    std::vector<double> diff;
    diff.reserve(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        if (d != 0.0) diff.push_back(d);
    }
    WilcoxonResult out;
    out.n_effective = int(diff.size());
    if (diff.empty()) return out;  // w = 0, p = 1

    const std::size_t n = diff.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        return std::abs(diff[x]) < std::abs(diff[y]);
    });
    std::vector<double> rank(n);
    std::vector<std::size_t> tie_sizes;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && std::abs(diff[order[j]]) == std::abs(diff[order[i]])) ++j;
        const double avg = 0.5 * double(i + 1 + j);  // average of ranks i+1..j
        for (std::size_t k = i; k < j; ++k) rank[order[k]] = avg;
        tie_sizes.push_back(j - i);
        i = j;
    }

    double w_plus = 0.0, w_minus = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (diff[i] > 0.0) w_plus += rank[i];
        else w_minus += rank[i];
    }
    out.w = std::min(w_plus, w_minus);

    if (n <= 10) {
        // Exact: distribution of 2*W+ over all sign assignments via the
        // generating polynomial of doubled (integer) ranks.
        const int total2 = int(std::llround(double(n) * double(n + 1)));  // sum of doubled ranks
        std::vector<double> count(total2 + 1, 0.0);
        count[0] = 1.0;
        for (std::size_t i = 0; i < n; ++i) {
            const int r2 = int(std::llround(2.0 * rank[i]));
            for (int s = total2; s >= r2; --s) count[s] += count[s - r2];
        }
        const int w2 = int(std::llround(2.0 * out.w));
        double hits = 0.0;
        for (int s = 0; s <= total2; ++s) {
            if (s <= w2 || s >= total2 - w2) hits += count[s];
        }
        out.p = std::min(1.0, hits / std::pow(2.0, double(n)));
    } else {
        const double nn = double(n);
        const double mean = nn * (nn + 1.0) / 4.0;
        double tie_term = 0.0;
        for (std::size_t t : tie_sizes) {
            const double td = double(t);
            tie_term += td * td * td - td;
        }
        const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
        require(var > 0.0, errc::zero_range, "wilcoxon variance is zero (all ties)");
        const double z = (out.w - mean + 0.5) / std::sqrt(var);  // continuity correction
        const double phi = 0.5 * std::erfc(-z / std::sqrt(2.0));
        out.p = std::min(1.0, 2.0 * phi);
    }
    return out;
}

}  // namespace flowmesh
