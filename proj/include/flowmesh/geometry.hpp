#pragma once

// Low-level simplex geometry: signed tet volume, barycentric coordinates,
// point-in-tet tests, triangle normals and exact point-triangle distance.

#include "flowmesh/core.hpp"

#include <array>
#include <limits>

namespace flowmesh {

inline double tet_signed_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
    return (b - a).cross(c - a).dot(d - a) / 6.0;
}

// Barycentric coordinates of p with respect to tet (a,b,c,d). Sums to 1 for
// any p when the tet is non-degenerate; returns false for (near-)flat tets.
inline bool tet_barycentric(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d,
                            const Vec3& p, std::array<double, 4>& lambda) {
    Eigen::Matrix3d m;
    m.col(0) = b - a;
    m.col(1) = c - a;
    m.col(2) = d - a;
    const double det = m.determinant();
    if (det == 0.0) return false;
    Vec3 rhs = p - a;
    Vec3 x = m.partialPivLu().solve(rhs);
    lambda[1] = x[0];
    lambda[2] = x[1];
    lambda[3] = x[2];
    lambda[0] = 1.0 - x[0] - x[1] - x[2];
    return true;
}

inline bool point_in_tet(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d,
                         const Vec3& p, double tol, std::array<double, 4>& lambda) {
    if (!tet_barycentric(a, b, c, d, p, lambda)) return false;
    for (double l : lambda)
        if (l < -tol) return false;
    return true;
}

inline Vec3 triangle_raw_normal(const Vec3& a, const Vec3& b, const Vec3& c) {
    return (b - a).cross(c - a);
}

inline Vec3 triangle_unit_normal(const Vec3& a, const Vec3& b, const Vec3& c, double area_eps = 1e-20) {
    Vec3 n = triangle_raw_normal(a, b, c);
    const double len = n.norm();
    require(len > area_eps, errc::degenerate_face, "triangle has (near) zero area");
    return n / len;
}

// Closest point on triangle (a,b,c) to p; Ericson, Real-Time Collision
// Detection, section 5.1.5.
inline Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    const Vec3 ab = b - a, ac = c - a, ap = p - a;
    const double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0.0 && d2 <= 0.0) return a;

    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3) return b;

    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
        const double v = d1 / (d1 - d3);
        return a + v * ab;
    }

    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0.0 && d5 <= d6) return c;

    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
        const double w = d2 / (d2 - d6);
        return a + w * ac;
    }

    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
        const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + w * (c - b);
    }

    const double denom = 1.0 / (va + vb + vc);
    const double v = vb * denom, w = vc * denom;
    return a + ab * v + ac * w;
}

inline double point_triangle_dist2(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    return (p - closest_point_on_triangle(p, a, b, c)).squaredNorm();
}

struct Aabb {
    Vec3 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
            std::numeric_limits<double>::infinity()};
    Vec3 hi{-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
            -std::numeric_limits<double>::infinity()};

    void expand(const Vec3& p) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }

    bool valid() const { return (lo.array() <= hi.array()).all(); }

    double dist2(const Vec3& p) const {
        double d2 = 0.0;
        for (int k = 0; k < 3; ++k) {
            double d = 0.0;
            if (p[k] < lo[k]) d = lo[k] - p[k];
            else if (p[k] > hi[k]) d = p[k] - hi[k];
            d2 += d * d;
        }
        return d2;
    }
};

}  // namespace flowmesh
