#pragma once

// Independent oracles used by the unit and acceptance suites. Each one
// deliberately avoids the implementation path it checks: full scans instead
// of grids, dense algebra instead of sparse, exhaustive enumeration instead
// of dynamic programming.

#include "flowmesh/core.hpp"
#include "flowmesh/geometry.hpp"
#include "flowmesh/mesh.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace oracle {

using flowmesh::Vec3;

// O(n^2) bidirectional Chamfer with the same deterministic summation helper;
// the nearest-neighbor search (the accelerated part) is a full scan here.
inline double chamfer_brute(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    auto min_d2 = [](const Vec3& p, const std::vector<Vec3>& set) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& q : set) best = std::min(best, (p - q).squaredNorm());
        return best;
    };
    return flowmesh::pairwise_sum(a.size(), [&](std::size_t i) { return min_d2(a[i], b); }) +
           flowmesh::pairwise_sum(b.size(), [&](std::size_t i) { return min_d2(b[i], a); });
}

// Dense scaled Laplacian: -D^-1/2 A D^-1/2 built with dense matrices.
inline Eigen::MatrixXd dense_scaled_laplacian(int n, const std::vector<std::array<int, 2>>& edges) {
    Eigen::MatrixXd adj = Eigen::MatrixXd::Zero(n, n);
    for (const auto& e : edges) {
        adj(e[0], e[1]) = 1.0;
        adj(e[1], e[0]) = 1.0;
    }
    Eigen::VectorXd deg = adj.rowwise().sum();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (adj(i, j) != 0.0) out(i, j) = -1.0 / std::sqrt(deg(i) * deg(j));
    return out;
}

// Exhaustive discrete Frechet distance over all monotone couplings.
inline double frechet_brute(const std::vector<Eigen::Vector2d>& a,
                            const std::vector<Eigen::Vector2d>& b) {
    const std::size_t n = a.size(), m = b.size();
    double best = std::numeric_limits<double>::infinity();
    std::function<void(std::size_t, std::size_t, double)> walk = [&](std::size_t i, std::size_t j,
                                                                     double acc) {
        acc = std::max(acc, (a[i] - b[j]).norm());
        if (acc >= best) return;
        if (i == n - 1 && j == m - 1) {
            best = std::min(best, acc);
            return;
        }
        if (i + 1 < n) walk(i + 1, j, acc);
        if (j + 1 < m) walk(i, j + 1, acc);
        if (i + 1 < n && j + 1 < m) walk(i + 1, j + 1, acc);
    };
    walk(0, 0, 0.0);
    return best;
}

// Exact Wilcoxon p by brute enumeration of all 2^n sign assignments over the
// given (already averaged) ranks: p = P(min(W+, W-) <= observed).
inline double wilcoxon_brute_p(const std::vector<double>& ranks, double w_observed) {
    const std::size_t n = ranks.size();
    double total = 0.0;
    std::size_t hits = 0;
    for (double r : ranks) total += r;
    for (std::size_t mask = 0; mask < (std::size_t(1) << n); ++mask) {
        double w_plus = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            if (mask & (std::size_t(1) << i)) w_plus += ranks[i];
        if (std::min(w_plus, total - w_plus) <= w_observed + 1e-12) ++hits;
    }
    return double(hits) / double(std::size_t(1) << n);
}

// Average ranks of |a - b| with zero differences dropped (mirrors the
// statistic's preprocessing so the brute enumeration sees the same ranks).
inline std::vector<double> signed_rank_ranks(const std::vector<double>& a,
                                             const std::vector<double>& b) {
    std::vector<double> mags;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        if (d != 0.0) mags.push_back(std::abs(d));
    }
    std::vector<std::size_t> order(mags.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t x, std::size_t y) { return mags[x] < mags[y]; });
    std::vector<double> ranks(mags.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && mags[order[j]] == mags[order[i]]) ++j;
        const double avg = 0.5 * double(i + 1 + j);
        for (std::size_t k = i; k < j; ++k) ranks[order[k]] = avg;
        i = j;
    }
    return ranks;
}

// All-tets point test for voxel masks.
inline bool point_in_mesh_brute(const flowmesh::VolumeMesh& mesh, const Vec3& p, double tol) {
    std::array<double, 4> lambda;
    for (const auto& t : mesh.tets()) {
        if (flowmesh::point_in_tet(mesh.vertices()[t[0]], mesh.vertices()[t[1]],
                                   mesh.vertices()[t[2]], mesh.vertices()[t[3]], p, tol, lambda))
            return true;
    }
    return false;
}

// All-triangles point-to-surface distance.
inline double surface_dist_brute(const Vec3& p, const std::vector<Vec3>& positions,
                                 const std::vector<std::array<int, 3>>& tris) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& t : tris)
        best = std::min(best, flowmesh::point_triangle_dist2(p, positions[t[0]], positions[t[1]],
                                                             positions[t[2]]));
    return std::sqrt(best);
}

// Central finite difference of a scalar function of one coordinate.
inline double central_difference(const std::function<double(double)>& f, double x0, double h) {
    return (f(x0 + h) - f(x0 - h)) / (2.0 * h);
}

}  // namespace oracle
