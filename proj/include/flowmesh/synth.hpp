#pragma once

// Analytic phantom generator. Produces matched (volume mesh, node fields,
// image volume, centerlines, normalization stats) bundles for straight-tube
// and bifurcation vessels.
//
// Geometry: the circular cross-section is a square-to-disc mapped structured
// lattice, extruded axially into hexahedra and split 5 tets per hex with
// alternating parity so shared faces match. The bifurcation warps the same
// lattice: beyond the split station the two lateral halves shear apart into
// lobes while the midline web stretches; shear keeps cell volumes positive.
// End caps stay planar, so cap coplanarity holds exactly; the straight
// tube's outlet disc is split into two labeled half-disc caps.
//
// Fields: section-normalized Poiseuille profile v = 2 v_mean (1 - rho^2)
// along the local axis (exact no-slip at the wall by construction) and a
// linear axial pressure drop with inlet value 8 mu L v_mean / R^2. These are
// the phantom's declared ground truth; junction physics is not modeled.

#include "flowmesh/core.hpp"
#include "flowmesh/fields.hpp"
#include "flowmesh/image.hpp"
#include "flowmesh/mesh.hpp"
#include "flowmesh/metrics.hpp"
#include "flowmesh/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace flowmesh {

inline constexpr double kBloodDensity = 1060.0;  // kg/m^3
inline constexpr double kBloodViscosity = 0.04;  // Pa s
inline constexpr double kPi = 3.14159265358979323846;

struct PhantomSpec {
    std::string kind = "straight";  // straight | bifurcation
    double radius_mm = 10.0;
    double length_mm = 80.0;
    double branch_angle_deg = 60.0;  // bifurcation only
    int target_nodes = 2500;
    double mean_velocity = 0.2;  // m/s, mean inlet velocity
    int axial_divisions = 0;     // 0 = derive from target_nodes
    int radial_divisions = 0;    // 0 = derive
    int angular_divisions = 0;   // 0 = derive (8 * radial for this lattice)
    std::uint64_t seed = 0;      // interior-node jitter; 0 = no jitter
    int image_size = 0;          // cubic voxel count per side; 0 = derive
    double image_spacing = 0.0;  // mm; 0 = derive

    void validate() const {
        require(kind == "straight" || kind == "bifurcation", errc::bad_argument,
                "phantom kind must be straight or bifurcation");
        require(radius_mm > 0.0 && length_mm > 0.0, errc::bad_argument,
                "phantom radius and length must be > 0");
        require(target_nodes >= 100, errc::bad_argument, "target node count must be >= 100");
        require(mean_velocity > 0.0, errc::bad_argument, "mean velocity must be > 0");
        require(branch_angle_deg > 0.0 && branch_angle_deg < 150.0, errc::bad_argument,
                "branch angle out of range");
    }
};

struct LatticePoint {
    double u = 0.0, v = 0.0;    // square coordinates in [-1, 1]
    double xs = 0.0, ys = 0.0;  // cross-section position (mm), before warp
    double z = 0.0;             // axial coordinate (mm)
    double rho = 0.0;           // section-normalized radius; exactly 1 on wall
    bool wall = false;
};

struct PhantomBundle {
    PhantomSpec spec;  // effective values (derived divisions filled in)
    VolumeMesh mesh;
    NodeFields fields;  // raw space
    ImageVolume image;
    std::vector<Centerline> centerlines;
    NormStats stats;
    std::vector<LatticePoint> lattice;
    double inlet_pressure_pa = 0.0;
    int nu = 0;      // lattice nodes per cross-section side (2m+1)
    int layers = 0;  // axial node layers (axial_divisions + 1)
};

namespace detail {

struct Warp {
    double tan_half = 0.0;  // 0 for straight tubes
    double z_split = 0.0;
    double ramp = 1.0;
    double bow_amp = 0.0;  // out-of-plane bow so all velocity components vary
    double length = 1.0;

    double offset(double z) const {
        if (tan_half == 0.0) return 0.0;
        const double zeta = z - z_split;
        if (zeta <= 0.0) return 0.0;
        if (zeta <= ramp) return tan_half * zeta * zeta / (2.0 * ramp);
        return tan_half * (zeta - 0.5 * ramp);
    }

    double slope(double z) const {
        if (tan_half == 0.0) return 0.0;
        const double zeta = z - z_split;
        if (zeta <= 0.0) return 0.0;
        if (zeta <= ramp) return tan_half * zeta / ramp;
        return tan_half;
    }

    double y_offset(double z) const {
        return bow_amp == 0.0 ? 0.0 : bow_amp * std::sin(kPi * z / length);
    }

    double y_slope(double z) const {
        return bow_amp == 0.0 ? 0.0 : bow_amp * kPi / length * std::cos(kPi * z / length);
    }

    static double lateral(double u) {
        constexpr double tau = 0.4;
        return std::tanh(u / tau) / std::tanh(1.0 / tau);
    }
};

inline Warp make_warp(const PhantomSpec& spec) {
    Warp w;
    w.length = spec.length_mm;
    if (spec.kind == "bifurcation") {
        w.tan_half = std::tan(0.5 * spec.branch_angle_deg * kPi / 180.0);
        w.z_split = 0.45 * spec.length_mm;
        w.ramp = 0.2 * spec.length_mm;
        w.bow_amp = 0.15 * spec.radius_mm;
    }
    return w;
}

// Five-tet split of a hex; parity alternates the face diagonals so
// neighboring hexes share them. Corner order: 000,100,010,110,001,101,011,111.
inline void split_hex(const std::array<int, 8>& c, bool parity,
                      std::vector<std::array<int, 4>>& tets) {
    if (!parity) {
        tets.push_back({c[0], c[3], c[5], c[6]});
        tets.push_back({c[0], c[1], c[3], c[5]});
        tets.push_back({c[0], c[2], c[6], c[3]});
        tets.push_back({c[0], c[4], c[5], c[6]});
        tets.push_back({c[3], c[5], c[6], c[7]});
    } else {
        tets.push_back({c[1], c[2], c[4], c[7]});
        tets.push_back({c[0], c[1], c[2], c[4]});
        tets.push_back({c[1], c[3], c[2], c[7]});
        tets.push_back({c[1], c[5], c[7], c[4]});
        tets.push_back({c[2], c[6], c[4], c[7]});
    }
}

using RadialFactor = std::function<double(double /*z*/)>;

inline std::vector<Vec3> lattice_positions(const std::vector<LatticePoint>& lattice,
                                           const Warp& warp, const RadialFactor& factor) {
    std::vector<Vec3> out;
    out.reserve(lattice.size());
    for (const auto& pt : lattice) {
        const double f = factor(pt.z);
        out.emplace_back(pt.xs * f + warp.offset(pt.z) * Warp::lateral(pt.u),
                         pt.ys * f + warp.y_offset(pt.z), pt.z);
    }
    return out;
}

inline NodeFields lattice_fields(const PhantomSpec& spec, const std::vector<LatticePoint>& lattice,
                                 const Warp& warp, const RadialFactor& factor,
                                 double inlet_pressure_pa) {
    NodeFields fields;
    fields.space = FieldSpace::raw;
    fields.pressure.reserve(lattice.size());
    fields.velocity.reserve(lattice.size());
    const double L = spec.length_mm;
    for (const auto& pt : lattice) {
        const double rho = pt.rho * factor(pt.z);
        const double vmag = 2.0 * spec.mean_velocity * std::max(0.0, 1.0 - rho * rho);
        Vec3 dir(warp.slope(pt.z) * Warp::lateral(pt.u), warp.y_slope(pt.z), 1.0);
        dir.normalize();
        fields.velocity.push_back(vmag * dir);
        fields.pressure.push_back(inlet_pressure_pa * (1.0 - pt.z / L));
    }
    return fields;
}

inline std::vector<Centerline> lattice_centerlines(const PhantomSpec& spec, const Warp& warp,
                                                   int layers, const RadialFactor& factor) {
    const double L = spec.length_mm;
    const double R = spec.radius_mm;
    auto station = [&](double z, double u_line) {
        const double xs = R * u_line;  // v = 0 line of the disc map
        return Vec3(xs * factor(z) + warp.offset(z) * Warp::lateral(u_line), warp.y_offset(z), z);
    };
    std::vector<Centerline> out;
    if (spec.kind == "straight") {
        Centerline axis;
        axis.label = "other";
        for (int k = 0; k < layers; ++k) axis.points.push_back(station(L * k / (layers - 1), 0.0));
        out.push_back(std::move(axis));
    } else {
        Centerline inlet, lpa, rpa;
        inlet.label = "inlet";
        lpa.label = "LPA";
        rpa.label = "RPA";
        for (int k = 0; k < layers; ++k) {
            const double z = L * k / (layers - 1);
            if (z <= warp.z_split) inlet.points.push_back(station(z, 0.0));
            lpa.points.push_back(station(z, -0.5));
            rpa.points.push_back(station(z, 0.5));
        }
        if (inlet.points.size() >= 2) out.push_back(std::move(inlet));
        out.push_back(std::move(lpa));
        out.push_back(std::move(rpa));
    }
    return out;
}

// Smoothed lumen indicator: 1 inside, 0 outside, 1-voxel linear ramp across
// the surface. Updates spec with the effective image size/spacing.
inline ImageVolume phantom_image(PhantomSpec& spec, const VolumeMesh& mesh) {
    Aabb box;
    for (const auto& v : mesh.vertices()) box.expand(v);
    const Vec3 extent = box.hi - box.lo;
    const double max_extent = extent.maxCoeff();

    double spacing = spec.image_spacing;
    int side = spec.image_size;
    if (side <= 0) {
        if (spacing <= 0.0) spacing = 1.0;
        side = 32 * std::max(1, int(std::ceil((max_extent + 8.0 * spacing) / (32.0 * spacing))));
    } else if (spacing <= 0.0) {
        spacing = (max_extent + 8.0) / double(side);
    }
    require((side - 1) * spacing >= max_extent, errc::spec_infeasible,
            "requested image grid does not cover the phantom");
    spec.image_size = side;
    spec.image_spacing = spacing;

    GridSpec grid;
    grid.dims = {side, side, side};
    grid.spacing = Vec3::Constant(spacing);
    grid.origin = 0.5 * (box.lo + box.hi) - 0.5 * (side - 1) * spacing * Vec3::Ones();

    const VoxelMask mask = voxelize(mesh, grid);

    ImageVolume img;
    img.nx = img.ny = img.nz = side;
    img.channels = 1;
    img.spacing = grid.spacing;
    img.origin = grid.origin;
    img.values.assign(mask.values.size(), 0.0f);

    // Interior defaults to 1; a band of voxels near the surface gets the
    // signed-distance ramp.
    for (std::size_t i = 0; i < mask.values.size(); ++i)
        img.values[i] = mask.values[i] ? 1.0f : 0.0f;

    const TriangleGrid surface(mesh.vertices(), mesh.surface_triangles());
    std::vector<std::uint8_t> band(mask.values.size(), 0);
    const double pad = 1.5 * spacing;
    for (const auto& tri : mesh.surface_triangles()) {
        Aabb tb;
        for (int idx : tri) tb.expand(mesh.vertices()[idx]);
        std::array<int, 3> lo, hi;
        for (int k = 0; k < 3; ++k) {
            lo[k] = std::clamp(int(std::floor((tb.lo[k] - pad - grid.origin[k]) / spacing)), 0,
                               side - 1);
            hi[k] = std::clamp(int(std::ceil((tb.hi[k] + pad - grid.origin[k]) / spacing)), 0,
                               side - 1);
        }
        for (int z = lo[2]; z <= hi[2]; ++z)
            for (int y = lo[1]; y <= hi[1]; ++y)
                for (int x = lo[0]; x <= hi[0]; ++x)
                    band[(std::size_t(z) * side + y) * side + x] = 1;
    }
    parallel_for(band.size(), [&](std::size_t idx) {
        if (!band[idx]) return;
        const int x = int(idx % side);
        const int y = int((idx / side) % side);
        const int z = int(idx / (std::size_t(side) * side));
        const Vec3 center = grid.origin + spacing * Vec3(x, y, z);
        const double d = std::sqrt(surface.dist2(center));
        const double sdf = mask.values[idx] ? -d : d;
        img.values[idx] = float(std::clamp(0.5 - sdf / spacing, 0.0, 1.0));
    });
    return img;
}

inline NormStats phantom_stats(const NodeFields& fields, const std::string& provenance) {
    // Degenerate channels (e.g. zero transverse velocity in a straight tube)
    // get a floored sigma so the stats stay invertible.
    constexpr double kSigmaFloor = 1e-9;
    auto channel = [&](auto&& value_at, std::size_t n) {
        ChannelStats cs;
        cs.mean = pairwise_sum(n, value_at) / double(n);
        const double var = pairwise_sum(n, [&](std::size_t i) {
                               const double d = value_at(i) - cs.mean;
                               return d * d;
                           }) / double(n);
        cs.std = std::max(std::sqrt(std::max(0.0, var)), kSigmaFloor);
        return cs;
    };
    const std::size_t n = fields.node_count();
    NormStats stats;
    stats.pressure = channel([&](std::size_t i) { return signed_cbrt(fields.pressure[i]); }, n);
    for (int k = 0; k < 3; ++k)
        stats.velocity[k] = channel([&](std::size_t i) { return fields.velocity[i][k]; }, n);
    stats.provenance = provenance;
    return stats;
}

}  // namespace detail

inline PhantomBundle generate_phantom(const PhantomSpec& input_spec) {
    PhantomSpec spec = input_spec;
    spec.validate();

    const double R = spec.radius_mm;
    const double L = spec.length_mm;

    // Lattice resolution: transverse spacing ~ R/m; the axial count is the
    // fine-grained knob used to land on the node target.
    int m = spec.radial_divisions;
    if (m <= 0 && spec.angular_divisions > 0) m = std::max(2, spec.angular_divisions / 8);
    if (m <= 0) {
        m = 2;
        while (m < 24) {
            const double nodes = double((2 * m + 1) * (2 * m + 1)) * (double(m) * L / R + 1.0);
            if (nodes >= double(spec.target_nodes)) break;
            ++m;
        }
    }
    m = std::max(2, m);
    int n_ax = spec.axial_divisions;
    if (n_ax <= 0)
        n_ax = std::max(4, int(std::lround(double(spec.target_nodes) /
                                           double((2 * m + 1) * (2 * m + 1)))) -
                               1);
    spec.radial_divisions = m;
    spec.axial_divisions = n_ax;
    spec.angular_divisions = 8 * m;

    const int nu = 2 * m + 1;
    const int layers = n_ax + 1;
    const auto warp = detail::make_warp(spec);

    std::vector<LatticePoint> lattice;
    lattice.reserve(std::size_t(nu) * nu * layers);
    Rng jitter_rng(spec.seed);
    const double jitter_amp = spec.seed != 0 ? 0.15 * R / double(m) : 0.0;
    for (int k = 0; k < layers; ++k) {
        const double z = L * double(k) / double(n_ax);
        for (int j = 0; j < nu; ++j) {
            for (int i = 0; i < nu; ++i) {
                LatticePoint pt;
                pt.u = double(i - m) / double(m);
                pt.v = double(j - m) / double(m);
                pt.wall = (i == 0 || i == nu - 1 || j == 0 || j == nu - 1);
                pt.xs = R * pt.u * std::sqrt(1.0 - 0.5 * pt.v * pt.v);
                pt.ys = R * pt.v * std::sqrt(1.0 - 0.5 * pt.u * pt.u);
                if (jitter_amp > 0.0 && !pt.wall) {
                    pt.xs += jitter_amp * jitter_rng.uniform(-1.0, 1.0);
                    pt.ys += jitter_amp * jitter_rng.uniform(-1.0, 1.0);
                }
                pt.z = z;
                pt.rho = pt.wall ? 1.0 : std::sqrt(pt.xs * pt.xs + pt.ys * pt.ys) / R;
                lattice.push_back(pt);
            }
        }
    }

    auto node_id = [nu](int i, int j, int k) { return (k * nu + j) * nu + i; };
    std::vector<std::array<int, 4>> tets;
    tets.reserve(std::size_t(nu - 1) * (nu - 1) * n_ax * 5);
    for (int k = 0; k < n_ax; ++k) {
        for (int j = 0; j < nu - 1; ++j) {
            for (int i = 0; i < nu - 1; ++i) {
                const std::array<int, 8> corners{
                    node_id(i, j, k),         node_id(i + 1, j, k),
                    node_id(i, j + 1, k),     node_id(i + 1, j + 1, k),
                    node_id(i, j, k + 1),     node_id(i + 1, j, k + 1),
                    node_id(i, j + 1, k + 1), node_id(i + 1, j + 1, k + 1)};
                detail::split_hex(corners, ((i + j + k) & 1) != 0, tets);
            }
        }
    }

    const detail::RadialFactor unit = [](double) { return 1.0; };
    const std::vector<Vec3> positions = detail::lattice_positions(lattice, warp, unit);

    // Build once without caps to discover boundary faces, then label caps.
    std::optional<VolumeMesh> provisional;
    try {
        provisional.emplace(positions, tets);
    } catch (const Error& e) {
        fail(errc::spec_infeasible, std::string("lattice produced an invalid mesh: ") + e.what());
    }
    CapPatch inlet{"inlet", {}}, outlet1{"outlet_1", {}}, outlet2{"outlet_2", {}};
    for (const auto& tri : provisional->surface_triangles()) {
        const bool at_inlet =
            lattice[tri[0]].z == 0.0 && lattice[tri[1]].z == 0.0 && lattice[tri[2]].z == 0.0;
        const bool at_outlet =
            lattice[tri[0]].z == L && lattice[tri[1]].z == L && lattice[tri[2]].z == L;
        if (at_inlet) {
            inlet.faces.push_back(tri);
        } else if (at_outlet) {
            const double cx =
                (positions[tri[0]][0] + positions[tri[1]][0] + positions[tri[2]][0]) / 3.0;
            (cx < 0.0 ? outlet1 : outlet2).faces.push_back(tri);
        }
    }
    std::optional<VolumeMesh> mesh;
    try {
        mesh.emplace(positions, tets, std::vector<CapPatch>{inlet, outlet1, outlet2});
    } catch (const Error& e) {
        fail(errc::spec_infeasible, std::string("cap labeling failed: ") + e.what());
    }

    const double inlet_pressure =
        8.0 * kBloodViscosity * (L * 1e-3) * spec.mean_velocity / ((R * 1e-3) * (R * 1e-3));
    NodeFields fields = detail::lattice_fields(spec, lattice, warp, unit, inlet_pressure);
    std::vector<Centerline> centerlines = detail::lattice_centerlines(spec, warp, layers, unit);
    ImageVolume image = detail::phantom_image(spec, *mesh);
    NormStats stats = detail::phantom_stats(
        fields, "phantom:" + spec.kind + ":seed" + std::to_string(spec.seed));

    return PhantomBundle{std::move(spec),   std::move(*mesh),      std::move(fields),
                         std::move(image),  std::move(centerlines), std::move(stats),
                         std::move(lattice), inlet_pressure,        nu,
                         layers};
}

// Smooth low-frequency radial scaling of the cross-sections (3-term sinusoid
// in the axial coordinate, unit-normalized so `amplitude_mm` is the peak wall
// displacement). Fields are re-evaluated at the new radii; correspondence to
// the source bundle is preserved.
inline PhantomBundle perturb_phantom(const PhantomBundle& bundle, double amplitude_mm,
                                     std::uint64_t seed) {
    require(amplitude_mm >= 0.0, errc::bad_argument, "perturbation amplitude must be >= 0");
    const PhantomSpec& spec = bundle.spec;
    const auto warp = detail::make_warp(spec);
    const double L = spec.length_mm;
    const double R = spec.radius_mm;
    require(amplitude_mm <= R, errc::self_intersection,
            "perturbation amplitude exceeds the radius (forced inversion)");

    Rng rng(seed);
    std::array<double, 3> coeff, phase;
    for (int k = 0; k < 3; ++k) {
        coeff[k] = rng.uniform(0.3, 1.0);
        phase[k] = rng.uniform(0.0, 2.0 * kPi);
    }
    auto raw_wave = [&](double z) {
        double s = 0.0;
        for (int k = 0; k < 3; ++k) s += coeff[k] * std::sin((k + 1) * kPi * z / L + phase[k]);
        return s;
    };
    double peak = 0.0;
    for (int i = 0; i <= 2048; ++i) peak = std::max(peak, std::abs(raw_wave(L * i / 2048.0)));
    // Peak-normalized wave: amplitude_mm is the maximum wall displacement.
    const double scale = amplitude_mm > 0.0 ? amplitude_mm / (peak * R) : 0.0;
    const detail::RadialFactor factor = [=](double z) { return 1.0 + scale * raw_wave(z); };

    const std::vector<Vec3> positions = detail::lattice_positions(bundle.lattice, warp, factor);
    std::optional<VolumeMesh> mesh;
    try {
        mesh.emplace(bundle.mesh.with_vertices(positions));
    } catch (const Error& e) {
        fail(errc::self_intersection,
             std::string("perturbation inverted cells (amplitude too large): ") + e.what());
    }

    NodeFields fields =
        detail::lattice_fields(spec, bundle.lattice, warp, factor, bundle.inlet_pressure_pa);
    std::vector<Centerline> centerlines =
        detail::lattice_centerlines(spec, warp, bundle.layers, factor);
    PhantomSpec effective = spec;
    ImageVolume image = detail::phantom_image(effective, *mesh);
    NormStats stats = detail::phantom_stats(
        fields, bundle.stats.provenance + ":perturbed" + std::to_string(seed));

    return PhantomBundle{effective,          std::move(*mesh),       std::move(fields),
                         std::move(image),   std::move(centerlines), std::move(stats),
                         bundle.lattice,     bundle.inlet_pressure_pa,
                         bundle.nu,          bundle.layers};
}

}  // namespace flowmesh
