#pragma once

// Uniform-grid acceleration for exact nearest-neighbor search, point-in-tet
// location and point-to-surface distance. Acceleration is exact: every query
// returns the same winner (including index tie-breaks) as a full scan.

#include "flowmesh/core.hpp"
#include "flowmesh/geometry.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <vector>

namespace flowmesh {

namespace detail {

struct GridFrame {
    Vec3 lo = Vec3::Zero();
    Vec3 cell = Vec3::Ones();
    std::array<int, 3> dims{1, 1, 1};

    void fit(const Aabb& box, std::size_t item_count, double items_per_cell) {
        lo = box.lo;
        Vec3 extent = (box.hi - box.lo).cwiseMax(1e-12);
        const double target_cells = std::max(1.0, double(item_count) / items_per_cell);
        const double vol = extent.prod();
        double h = std::cbrt(vol / target_cells);
        if (!(h > 0.0)) h = 1.0;
        for (int k = 0; k < 3; ++k) {
            dims[k] = std::clamp(int(std::ceil(extent[k] / h)), 1, 192);
            cell[k] = extent[k] / dims[k];
            if (!(cell[k] > 0.0)) cell[k] = 1.0;
        }
    }

    std::array<int, 3> cell_of(const Vec3& p) const {
        std::array<int, 3> c;
        for (int k = 0; k < 3; ++k) {
            c[k] = std::clamp(int(std::floor((p[k] - lo[k]) / cell[k])), 0, dims[k] - 1);
        }
        return c;
    }

    int linear(int x, int y, int z) const { return (z * dims[1] + y) * dims[0] + x; }
    int cell_count() const { return dims[0] * dims[1] * dims[2]; }
    double min_cell_edge() const { return cell.minCoeff(); }

    Aabb cell_box(int x, int y, int z) const {
        Aabb b;
        b.lo = lo + Vec3(x * cell[0], y * cell[1], z * cell[2]);
        b.hi = b.lo + cell;
        return b;
    }

    int max_ring(const std::array<int, 3>& c) const {
        int r = 0;
        for (int k = 0; k < 3; ++k) r = std::max({r, c[k], dims[k] - 1 - c[k]});
        return r;
    }
};

// Visits cells at Chebyshev ring r around center; calls fn(x,y,z) for each.
template <typename F>
void for_ring(const GridFrame& g, const std::array<int, 3>& c, int r, F&& fn) {
    const int x0 = std::max(0, c[0] - r), x1 = std::min(g.dims[0] - 1, c[0] + r);
    const int y0 = std::max(0, c[1] - r), y1 = std::min(g.dims[1] - 1, c[1] + r);
    const int z0 = std::max(0, c[2] - r), z1 = std::min(g.dims[2] - 1, c[2] + r);
    for (int z = z0; z <= z1; ++z) {
        for (int y = y0; y <= y1; ++y) {
            const bool face = (z == c[2] - r || z == c[2] + r || y == c[1] - r || y == c[1] + r);
            if (face) {
                for (int x = x0; x <= x1; ++x) fn(x, y, z);
            } else {
                if (c[0] - r >= 0) fn(c[0] - r, y, z);
                if (r > 0 && c[0] + r <= g.dims[0] - 1) fn(c[0] + r, y, z);
            }
        }
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Exact nearest-neighbor grid over a fixed point set.

class PointGrid {
public:
    explicit PointGrid(const std::vector<Vec3>& points) : points_(&points) {
        require(!points.empty(), errc::empty_point_set, "point grid over empty set");
        Aabb box;
        for (const auto& p : points) box.expand(p);
        frame_.fit(box, points.size(), 2.0);
        cells_.assign(frame_.cell_count() + 1, 0);
        std::vector<int> cell_of(points.size());
        for (std::size_t i = 0; i < points.size(); ++i) {
            auto c = frame_.cell_of(points[i]);
            cell_of[i] = frame_.linear(c[0], c[1], c[2]);
            cells_[cell_of[i] + 1]++;
        }
        for (std::size_t i = 1; i < cells_.size(); ++i) cells_[i] += cells_[i - 1];
        items_.resize(points.size());
        std::vector<int> cursor(cells_.begin(), cells_.end() - 1);
        for (std::size_t i = 0; i < points.size(); ++i) items_[cursor[cell_of[i]]++] = int(i);
        // Ascending index order inside each cell keeps tie-breaks identical
        // to a sequential scan.
        for (int c = 0; c < frame_.cell_count(); ++c)
            std::sort(items_.begin() + cells_[c], items_.begin() + cells_[c + 1]);
    }

    // Index of the nearest point; ties resolved toward the lowest index.
    int nearest(const Vec3& q, double* dist2_out = nullptr) const {
        int best = -1;
        double best_d2 = std::numeric_limits<double>::infinity();
        scan_rings(q, [&](int idx) {
            const double d2 = ((*points_)[idx] - q).squaredNorm();
            if (d2 < best_d2 || (d2 == best_d2 && idx < best)) {
                best_d2 = d2;
                best = idx;
            }
        }, [&] { return best_d2; });
        if (dist2_out) *dist2_out = best_d2;
        return best;
    }

    // k nearest points ordered by (distance^2, index).
    std::vector<int> k_nearest(const Vec3& q, int k) const {
        require(k >= 1, errc::bad_argument, "k must be >= 1");
        require(std::size_t(k) <= points_->size(), errc::k_too_large,
                "k exceeds point count");
        std::vector<std::pair<double, int>> best;
        best.reserve(k + 1);
        scan_rings(q, [&](int idx) {
            const double d2 = ((*points_)[idx] - q).squaredNorm();
            std::pair<double, int> cand{d2, idx};
            if (int(best.size()) < k) {
                best.insert(std::upper_bound(best.begin(), best.end(), cand), cand);
            } else if (cand < best.back()) {
                best.pop_back();
                best.insert(std::upper_bound(best.begin(), best.end(), cand), cand);
            }
        }, [&] {
            return int(best.size()) < k ? std::numeric_limits<double>::infinity()
                                        : best.back().first;
        });
        std::vector<int> out(best.size());
        for (std::size_t i = 0; i < best.size(); ++i) out[i] = best[i].second;
        return out;
    }

private:
    template <typename Visit, typename Bound>
    void scan_rings(const Vec3& q, Visit&& visit, Bound&& current_bound) const {
        const auto c = frame_.cell_of(q);
        const int rmax = frame_.max_ring(c);
        const double h = frame_.min_cell_edge();
        for (int r = 0; r <= rmax; ++r) {
            if (r > 0) {
                const double lower = (r - 1) * h;
                if (lower * lower > current_bound()) break;
            }
            detail::for_ring(frame_, c, r, [&](int x, int y, int z) {
                if (frame_.cell_box(x, y, z).dist2(q) > current_bound()) return;
                const int cell = frame_.linear(x, y, z);
                for (int i = cells_[cell]; i < cells_[cell + 1]; ++i) visit(items_[i]);
            });
        }
    }

    const std::vector<Vec3>* points_;
    detail::GridFrame frame_;
    std::vector<int> cells_;
    std::vector<int> items_;
};

// ---------------------------------------------------------------------------
// Point-in-tet locator. Cells index every tet whose bounding box overlaps
// them, so the containing tet of a query is always among the candidates of
// the query's cell. Candidates are scanned in ascending tet index.

class TetLocator {
public:
    static constexpr double kBaryTol = 1e-9;

    TetLocator(const std::vector<Vec3>& vertices, const std::vector<std::array<int, 4>>& tets)
        : vertices_(&vertices), tets_(&tets) {
        require(!tets.empty(), errc::empty_source, "locator over empty mesh");
        Aabb box;
        for (const auto& v : vertices) box.expand(v);
        frame_.fit(box, tets.size(), 4.0);

        std::vector<std::pair<int, int>> entries;  // (cell, tet)
        for (std::size_t t = 0; t < tets.size(); ++t) {
            Aabb tb;
            for (int idx : tets[t]) tb.expand(vertices[idx]);
            const auto clo = frame_.cell_of(tb.lo);
            const auto chi = frame_.cell_of(tb.hi);
            for (int z = clo[2]; z <= chi[2]; ++z)
                for (int y = clo[1]; y <= chi[1]; ++y)
                    for (int x = clo[0]; x <= chi[0]; ++x)
                        entries.emplace_back(frame_.linear(x, y, z), int(t));
        }
        std::sort(entries.begin(), entries.end());
        cells_.assign(frame_.cell_count() + 1, 0);
        items_.resize(entries.size());
        for (std::size_t i = 0; i < entries.size(); ++i) {
            cells_[entries[i].first + 1]++;
            items_[i] = entries[i].second;
        }
        for (std::size_t i = 1; i < cells_.size(); ++i) cells_[i] += cells_[i - 1];
    }

    // Lowest-index tet containing p (barycentric tolerance kBaryTol), or -1.
    int locate(const Vec3& p, std::array<double, 4>& lambda) const {
        const auto c = frame_.cell_of(p);
        const int cell = frame_.linear(c[0], c[1], c[2]);
        for (int i = cells_[cell]; i < cells_[cell + 1]; ++i) {
            const int t = items_[i];
            const auto& tet = (*tets_)[t];
            if (point_in_tet((*vertices_)[tet[0]], (*vertices_)[tet[1]], (*vertices_)[tet[2]],
                             (*vertices_)[tet[3]], p, kBaryTol, lambda))
                return t;
        }
        return -1;
    }

private:
    const std::vector<Vec3>* vertices_;
    const std::vector<std::array<int, 4>>* tets_;
    detail::GridFrame frame_;
    std::vector<int> cells_;
    std::vector<int> items_;
};

// ---------------------------------------------------------------------------
// Exact point-to-triangle-set distance queries.

class TriangleGrid {
public:
    TriangleGrid(const std::vector<Vec3>& vertices, const std::vector<std::array<int, 3>>& tris)
        : vertices_(&vertices), tris_(&tris) {
        require(!tris.empty(), errc::empty_surface, "distance grid over empty surface");
        Aabb box;
        boxes_.resize(tris.size());
        for (std::size_t t = 0; t < tris.size(); ++t) {
            for (int idx : tris[t]) boxes_[t].expand(vertices[idx]);
            box.expand(boxes_[t].lo);
            box.expand(boxes_[t].hi);
        }
        frame_.fit(box, tris.size(), 2.0);
        std::vector<std::pair<int, int>> entries;
        for (std::size_t t = 0; t < tris.size(); ++t) {
            const auto clo = frame_.cell_of(boxes_[t].lo);
            const auto chi = frame_.cell_of(boxes_[t].hi);
            for (int z = clo[2]; z <= chi[2]; ++z)
                for (int y = clo[1]; y <= chi[1]; ++y)
                    for (int x = clo[0]; x <= chi[0]; ++x)
                        entries.emplace_back(frame_.linear(x, y, z), int(t));
        }
        std::sort(entries.begin(), entries.end());
        cells_.assign(frame_.cell_count() + 1, 0);
        items_.resize(entries.size());
        for (std::size_t i = 0; i < entries.size(); ++i) {
            cells_[entries[i].first + 1]++;
            items_[i] = entries[i].second;
        }
        for (std::size_t i = 1; i < cells_.size(); ++i) cells_[i] += cells_[i - 1];
    }

    // Exact min squared distance from q to the triangle set. Triangles that
    // span several cells may be tested more than once; min() is idempotent,
    // so the result is unaffected and queries stay thread-safe.
    double dist2(const Vec3& q) const {
        double best = std::numeric_limits<double>::infinity();
        const auto c = frame_.cell_of(q);
        const int rmax = frame_.max_ring(c);
        const double h = frame_.min_cell_edge();
        for (int r = 0; r <= rmax; ++r) {
            if (r > 0 && best < std::numeric_limits<double>::infinity()) {
                const double lower = (r - 1) * h;
                if (lower * lower > best) break;
            }
            detail::for_ring(frame_, c, r, [&](int x, int y, int z) {
                if (frame_.cell_box(x, y, z).dist2(q) > best) return;
                const int cell = frame_.linear(x, y, z);
                for (int i = cells_[cell]; i < cells_[cell + 1]; ++i) {
                    const int t = items_[i];
                    if (boxes_[t].dist2(q) > best) continue;
                    const auto& tri = (*tris_)[t];
                    const double d2 = point_triangle_dist2(q, (*vertices_)[tri[0]],
                                                           (*vertices_)[tri[1]], (*vertices_)[tri[2]]);
                    best = std::min(best, d2);
                }
            });
        }
        return best;
    }

private:
    const std::vector<Vec3>* vertices_;
    const std::vector<std::array<int, 3>>* tris_;
    std::vector<Aabb> boxes_;
    detail::GridFrame frame_;
    std::vector<int> cells_;
    std::vector<int> items_;
};

}  // namespace flowmesh
