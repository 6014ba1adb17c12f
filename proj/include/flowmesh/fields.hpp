#pragma once

// Per-node pressure/velocity fields, the cube-root + z-score normalization
// applied before training-style losses, and barycentric transfer of fields
// between non-corresponding meshes.

#include "flowmesh/core.hpp"
#include "flowmesh/mesh.hpp"
#include "flowmesh/spatial.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace flowmesh {

enum class FieldSpace { raw, normalized };

struct NodeFields {
    std::vector<double> pressure;       // Pa when raw
    std::vector<Vec3> velocity;         // m/s when raw
    FieldSpace space = FieldSpace::raw;

    std::size_t node_count() const { return pressure.size(); }

    void validate() const {
        require(pressure.size() == velocity.size(), errc::field_length_mismatch,
                "pressure and velocity arrays differ in length");
        for (double p : pressure)
            require(std::isfinite(p), errc::bad_argument, "non-finite pressure value");
        for (const auto& v : velocity)
            require(v.allFinite(), errc::bad_argument, "non-finite velocity value");
    }
};

struct ChannelStats {
    double mean = 0.0;
    double std = 1.0;
};

// Population statistics used for normalization. The pressure channel stats
// are over cube-rooted pressures. Never recomputed silently; these travel
// with the weight set or the phantom manifest.
struct NormStats {
    ChannelStats pressure;      // over cbrt(pressure)
    ChannelStats velocity[3];
    std::string provenance;

    void validate() const {
        require(pressure.std > 0.0, errc::zero_sigma, "pressure sigma must be > 0");
        for (const auto& v : velocity)
            require(v.std > 0.0, errc::zero_sigma, "velocity sigma must be > 0");
    }
};

inline double signed_cbrt(double x) { return std::cbrt(x); }

inline NodeFields normalize_fields(const NodeFields& fields, const NormStats& stats) {
    require(fields.space == FieldSpace::raw, errc::wrong_space,
            "normalize_fields expects raw-space fields");
    stats.validate();
    NodeFields out;
    out.space = FieldSpace::normalized;
    out.pressure.resize(fields.pressure.size());
    out.velocity.resize(fields.velocity.size());
    for (std::size_t i = 0; i < fields.pressure.size(); ++i)
        out.pressure[i] = (signed_cbrt(fields.pressure[i]) - stats.pressure.mean) / stats.pressure.std;
    for (std::size_t i = 0; i < fields.velocity.size(); ++i)
        for (int k = 0; k < 3; ++k)
            out.velocity[i][k] = (fields.velocity[i][k] - stats.velocity[k].mean) / stats.velocity[k].std;
    return out;
}

inline NodeFields denormalize_fields(const NodeFields& fields, const NormStats& stats) {
    require(fields.space == FieldSpace::normalized, errc::wrong_space,
            "denormalize_fields expects normalized-space fields");
    stats.validate();
    NodeFields out;
    out.space = FieldSpace::raw;
    out.pressure.resize(fields.pressure.size());
    out.velocity.resize(fields.velocity.size());
    for (std::size_t i = 0; i < fields.pressure.size(); ++i) {
        const double c = fields.pressure[i] * stats.pressure.std + stats.pressure.mean;
        out.pressure[i] = c * c * c;
    }
    for (std::size_t i = 0; i < fields.velocity.size(); ++i)
        for (int k = 0; k < 3; ++k)
            out.velocity[i][k] = fields.velocity[i][k] * stats.velocity[k].std + stats.velocity[k].mean;
    return out;
}

struct TransferResult {
    NodeFields fields;
    std::size_t extrapolated = 0;  // points that fell outside the source mesh
};

// Locates each destination point in a source tet and blends barycentrically.
// Points outside the source mesh take the nearest source node's values and
// are tallied in `extrapolated`.
inline TransferResult transfer_fields(const VolumeMesh& src_mesh, const NodeFields& src_fields,
                                      const std::vector<Vec3>& dst_points) {
    require(src_mesh.node_count() > 0, errc::empty_source, "empty source mesh");
    require(src_fields.node_count() == src_mesh.node_count(), errc::field_length_mismatch,
            "source fields do not match source mesh");

    TransferResult result;
    result.fields.space = src_fields.space;
    result.fields.pressure.resize(dst_points.size());
    result.fields.velocity.resize(dst_points.size());

    const TetLocator locator(src_mesh.vertices(), src_mesh.tets());
    const PointGrid nn(src_mesh.vertices());
    std::vector<std::uint8_t> outside(dst_points.size(), 0);

    parallel_for(dst_points.size(), [&](std::size_t i) {
        std::array<double, 4> lambda;
        const int t = locator.locate(dst_points[i], lambda);
        if (t >= 0) {
            const auto& tet = src_mesh.tets()[t];
            double p = 0.0;
            Vec3 v = Vec3::Zero();
            for (int k = 0; k < 4; ++k) {
                p += lambda[k] * src_fields.pressure[tet[k]];
                v += lambda[k] * src_fields.velocity[tet[k]];
            }
            result.fields.pressure[i] = p;
            result.fields.velocity[i] = v;
        } else {
            const int j = nn.nearest(dst_points[i]);
            result.fields.pressure[i] = src_fields.pressure[j];
            result.fields.velocity[i] = src_fields.velocity[j];
            outside[i] = 1;
        }
    });
    for (auto flag : outside) result.extrapolated += flag;
    return result;
}

}  // namespace flowmesh
