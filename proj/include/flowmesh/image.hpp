#pragma once

// Dense 3D multi-channel grid (node-centered: voxel (i,j,k) sits at
// origin + (i,j,k) * spacing) and trilinear sampling with border clamping.
// Storage is f32, channel-major with x fastest; interpolation arithmetic
// runs in double.

#include "flowmesh/core.hpp"

#include <cmath>
#include <vector>

namespace flowmesh {

struct ImageVolume {
    int nx = 0, ny = 0, nz = 0;
    int channels = 1;
    Vec3 spacing = Vec3::Ones();  // mm per voxel step
    Vec3 origin = Vec3::Zero();   // mm position of voxel (0,0,0)
    std::vector<float> values;    // ((c*nz + z)*ny + y)*nx + x

    std::size_t voxel_count() const { return std::size_t(nx) * ny * nz; }

    std::size_t index(int c, int x, int y, int z) const {
        return ((std::size_t(c) * nz + z) * ny + y) * nx + x;
    }

    float at(int c, int x, int y, int z) const { return values[index(c, x, y, z)]; }
    float& at(int c, int x, int y, int z) { return values[index(c, x, y, z)]; }

    void validate() const {
        require(nx >= 1 && ny >= 1 && nz >= 1, errc::bad_input_size, "image dims must be >= 1");
        require(channels >= 1, errc::bad_input_size, "image needs at least one channel");
        require((spacing.array() > 0.0).all(), errc::bad_input_size, "image spacing must be > 0");
        require(values.size() == std::size_t(channels) * voxel_count(), errc::bad_input_size,
                "image value count does not match dims");
        for (float v : values)
            require(std::isfinite(v), errc::bad_input_size, "non-finite image value");
    }

    // Physical span of the grid (node-centered).
    Vec3 extent_lo() const { return origin; }
    Vec3 extent_hi() const {
        return origin + Vec3((nx - 1) * spacing[0], (ny - 1) * spacing[1], (nz - 1) * spacing[2]);
    }
};

// 8-corner trilinear blend per channel; out-of-bounds points clamp to the
// border voxel. `out` must hold `channels` doubles.
inline void trilinear_sample(const ImageVolume& grid, const Vec3& point_mm, double* out) {
    double u[3];
    const int dims[3] = {grid.nx, grid.ny, grid.nz};
    int i0[3];
    double f[3];
    for (int k = 0; k < 3; ++k) {
        u[k] = (point_mm[k] - grid.origin[k]) / grid.spacing[k];
        if (u[k] < 0.0) u[k] = 0.0;
        if (u[k] > double(dims[k] - 1)) u[k] = double(dims[k] - 1);
        i0[k] = int(std::floor(u[k]));
        if (i0[k] > dims[k] - 2) i0[k] = std::max(0, dims[k] - 2);
        f[k] = u[k] - double(i0[k]);
        if (dims[k] == 1) f[k] = 0.0;
    }
    const int x1 = std::min(i0[0] + 1, dims[0] - 1);
    const int y1 = std::min(i0[1] + 1, dims[1] - 1);
    const int z1 = std::min(i0[2] + 1, dims[2] - 1);
    const double wx0 = 1.0 - f[0], wy0 = 1.0 - f[1], wz0 = 1.0 - f[2];
    for (int c = 0; c < grid.channels; ++c) {
        const double c000 = grid.at(c, i0[0], i0[1], i0[2]);
        const double c100 = grid.at(c, x1, i0[1], i0[2]);
        const double c010 = grid.at(c, i0[0], y1, i0[2]);
        const double c110 = grid.at(c, x1, y1, i0[2]);
        const double c001 = grid.at(c, i0[0], i0[1], z1);
        const double c101 = grid.at(c, x1, i0[1], z1);
        const double c011 = grid.at(c, i0[0], y1, z1);
        const double c111 = grid.at(c, x1, y1, z1);
        const double lo = (c000 * wx0 + c100 * f[0]) * wy0 + (c010 * wx0 + c110 * f[0]) * f[1];
        const double hi = (c001 * wx0 + c101 * f[0]) * wy0 + (c011 * wx0 + c111 * f[0]) * f[1];
        out[c] = lo * wz0 + hi * f[2];
    }
}

inline std::vector<double> trilinear_sample(const ImageVolume& grid, const Vec3& point_mm) {
    std::vector<double> out(grid.channels);
    trilinear_sample(grid, point_mm, out.data());
    return out;
}

}  // namespace flowmesh
