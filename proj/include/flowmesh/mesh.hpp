#pragma once

// Tetrahedral volume-mesh data model. Construction validates the full
// invariant set (index bounds, positive cell volumes after canonical
// orientation, closed 2-manifold boundary, cap labeling) and derives the
// unique edge set, boundary triangle shell, surface edge set and node
// adjacency. Instances are immutable after construction.

#include "flowmesh/core.hpp"
#include "flowmesh/geometry.hpp"

#include <Eigen/Sparse>

#include <algorithm>
#include <array>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace flowmesh {

struct CapPatch {
    std::string name;  // one of {inlet, outlet_1, outlet_2}
    std::vector<std::array<int, 3>> faces;
};

inline bool valid_cap_name(const std::string& name) {
    return name == "inlet" || name == "outlet_1" || name == "outlet_2";
}

namespace detail {

// Rotate a triangle so its smallest index comes first, keeping cyclic order
// (and therefore orientation).
inline std::array<int, 3> canonical_tri(std::array<int, 3> t) {
    if (t[1] < t[0] && t[1] <= t[2]) return {t[1], t[2], t[0]};
    if (t[2] < t[0] && t[2] < t[1]) return {t[2], t[0], t[1]};
    return t;
}

inline std::array<int, 3> sorted_tri(std::array<int, 3> t) {
    std::sort(t.begin(), t.end());
    return t;
}

}  // namespace detail

class VolumeMesh {
public:
    static constexpr double kVolumeEps = 1e-12;  // mm^3

    // `strict_caps` controls the cap fold-over check (neighboring outward
    // normals must agree). Predicted meshes from an untrained network can
    // legitimately fold a cap; they are built with the check disabled.
    VolumeMesh(std::vector<Vec3> vertices, std::vector<std::array<int, 4>> tets,
               std::vector<CapPatch> caps = {}, bool strict_caps = true) {
        vertices_ = std::move(vertices);
        tets_ = std::move(tets);
        require(!vertices_.empty(), errc::bad_argument, "mesh needs at least one vertex");
        require(!tets_.empty(), errc::bad_argument, "mesh needs at least one tetrahedron");
        check_indices(caps);
        orient_tets();
        build_edges();
        build_surface();
        adopt_caps(std::move(caps), strict_caps);
        build_adjacency();
    }

    std::size_t node_count() const { return vertices_.size(); }
    std::size_t cell_count() const { return tets_.size(); }

    const std::vector<Vec3>& vertices() const { return vertices_; }
    const std::vector<std::array<int, 4>>& tets() const { return tets_; }
    const std::vector<CapPatch>& caps() const { return caps_; }
    const std::vector<std::array<int, 2>>& edges() const { return edges_; }
    const std::vector<std::array<int, 3>>& surface_triangles() const { return surface_tris_; }
    const std::vector<std::array<int, 2>>& surface_edges() const { return surface_edges_; }
    const std::vector<int>& surface_vertices() const { return surface_vertices_; }

    // Node adjacency over the tet edge graph, CSR layout.
    const std::vector<int>& adjacency_offsets() const { return adj_offsets_; }
    const std::vector<int>& adjacency() const { return adj_; }
    int degree(int node) const { return adj_offsets_[node + 1] - adj_offsets_[node]; }

    Vec3 centroid() const {
        Vec3 c = Vec3::Zero();
        for (const auto& v : vertices_) c += v;
        return c / double(vertices_.size());
    }

    // Same connectivity, new vertex positions (revalidates everything).
    VolumeMesh with_vertices(std::vector<Vec3> new_vertices, bool strict_caps = true) const {
        require(new_vertices.size() == vertices_.size(), errc::correspondence_mismatch,
                "replacement vertex array has different length");
        return VolumeMesh(std::move(new_vertices), tets_, caps_, strict_caps);
    }

    bool same_connectivity(const VolumeMesh& other) const {
        if (vertices_.size() != other.vertices_.size()) return false;
        if (tets_ != other.tets_) return false;
        if (caps_.size() != other.caps_.size()) return false;
        for (std::size_t i = 0; i < caps_.size(); ++i)
            if (caps_[i].name != other.caps_[i].name || caps_[i].faces != other.caps_[i].faces)
                return false;
        return true;
    }

private:
    void check_indices(const std::vector<CapPatch>& caps) const {
        const int n = int(vertices_.size());
        for (const auto& t : tets_)
            for (int idx : t)
                require(idx >= 0 && idx < n, errc::index_out_of_range,
                        "tet references vertex " + std::to_string(idx));
        for (const auto& cap : caps)
            for (const auto& f : cap.faces)
                for (int idx : f)
                    require(idx >= 0 && idx < n, errc::index_out_of_range,
                            "cap face references vertex " + std::to_string(idx));
    }

    void orient_tets() {
        for (auto& t : tets_) {
            double vol = tet_signed_volume(vertices_[t[0]], vertices_[t[1]], vertices_[t[2]],
                                           vertices_[t[3]]);
            if (vol < 0.0) {
                std::swap(t[2], t[3]);
                vol = -vol;
            }
            require(vol > kVolumeEps, errc::degenerate_cell,
                    "tet volume " + format_double(vol) + " below threshold");
        }
    }

    void build_edges() {
        static constexpr int pairs[6][2] = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
        edges_.reserve(tets_.size() * 6);
        for (const auto& t : tets_) {
            for (const auto& p : pairs) {
                int a = t[p[0]], b = t[p[1]];
                if (a > b) std::swap(a, b);
                edges_.push_back({a, b});
            }
        }
        std::sort(edges_.begin(), edges_.end());
        edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
        for (const auto& e : edges_)
            require((vertices_[e[0]] - vertices_[e[1]]).squaredNorm() > 0.0, errc::degenerate_cell,
                    "zero-length edge " + std::to_string(e[0]) + "-" + std::to_string(e[1]));
    }

    void build_surface() {
        // Outward-oriented faces of a positively-oriented tet (0,1,2,3).
        static constexpr int faces[4][3] = {{1, 2, 3}, {0, 3, 2}, {0, 1, 3}, {0, 2, 1}};
        std::map<std::array<int, 3>, std::pair<int, std::array<int, 3>>> census;  // key -> (count, oriented)
        for (const auto& t : tets_) {
            for (const auto& f : faces) {
                std::array<int, 3> oriented{t[f[0]], t[f[1]], t[f[2]]};
                auto key = detail::sorted_tri(oriented);
                auto [it, inserted] = census.try_emplace(key, 1, oriented);
                if (!inserted) {
                    it->second.first += 1;
                    require(it->second.first <= 2, errc::nonmanifold_surface,
                            "face shared by more than two tets");
                }
            }
        }
        for (const auto& [key, entry] : census) {
            if (entry.first == 1) surface_tris_.push_back(detail::canonical_tri(entry.second));
        }
        require(!surface_tris_.empty(), errc::nonmanifold_surface, "mesh has no boundary");
        std::sort(surface_tris_.begin(), surface_tris_.end());

        // Closed 2-manifold check: every boundary edge borders exactly two
        // boundary triangles. This also yields the surface edge set.
        std::map<std::array<int, 2>, int> edge_census;
        for (const auto& tri : surface_tris_) {
            for (int k = 0; k < 3; ++k) {
                int a = tri[k], b = tri[(k + 1) % 3];
                if (a > b) std::swap(a, b);
                edge_census[{a, b}] += 1;
            }
        }
        for (const auto& [e, count] : edge_census) {
            require(count == 2, errc::nonmanifold_surface,
                    "boundary edge " + std::to_string(e[0]) + "-" + std::to_string(e[1]) +
                        " borders " + std::to_string(count) + " boundary triangles");
            surface_edges_.push_back(e);
        }

        std::vector<int> verts;
        verts.reserve(surface_tris_.size() * 3);
        for (const auto& tri : surface_tris_)
            for (int idx : tri) verts.push_back(idx);
        std::sort(verts.begin(), verts.end());
        verts.erase(std::unique(verts.begin(), verts.end()), verts.end());
        surface_vertices_ = std::move(verts);
    }

    void adopt_caps(std::vector<CapPatch> caps, bool strict_caps) {
        if (caps.empty()) return;
        require(caps.size() == 3, errc::bad_cap_labeling,
                "expected exactly 3 caps, got " + std::to_string(caps.size()));

        std::map<std::array<int, 3>, std::array<int, 3>> boundary;  // sorted key -> outward orientation
        for (const auto& tri : surface_tris_) boundary[detail::sorted_tri(tri)] = tri;

        std::sort(caps.begin(), caps.end(),
                  [](const CapPatch& a, const CapPatch& b) { return a.name < b.name; });
        std::map<std::array<int, 3>, int> claimed;
        for (auto& cap : caps) {
            require(valid_cap_name(cap.name), errc::bad_cap_labeling,
                    "unknown cap name '" + cap.name + "'");
            require(!cap.faces.empty(), errc::bad_cap_labeling, "cap '" + cap.name + "' is empty");
            for (auto& f : cap.faces) {
                auto key = detail::sorted_tri(f);
                auto it = boundary.find(key);
                require(it != boundary.end(), errc::bad_cap_labeling,
                        "cap '" + cap.name + "' face is not a boundary face");
                require(claimed.insert({key, 1}).second, errc::bad_cap_labeling,
                        "boundary face labeled twice");
                f = it->second;  // canonical outward orientation
            }
            std::sort(cap.faces.begin(), cap.faces.end());
            if (strict_caps) check_cap_consistency(cap);
        }
        for (std::size_t i = 1; i < caps.size(); ++i)
            require(caps[i].name != caps[i - 1].name, errc::bad_cap_labeling,
                    "duplicate cap name '" + caps[i].name + "'");
        caps_ = std::move(caps);
    }

    // Neighboring cap faces (sharing an edge) must agree in direction once
    // oriented outward; a folded patch is a labeling error.
    void check_cap_consistency(const CapPatch& cap) const {
        std::map<std::array<int, 2>, std::vector<std::size_t>> by_edge;
        for (std::size_t fi = 0; fi < cap.faces.size(); ++fi) {
            const auto& f = cap.faces[fi];
            for (int k = 0; k < 3; ++k) {
                int a = f[k], b = f[(k + 1) % 3];
                if (a > b) std::swap(a, b);
                by_edge[{a, b}].push_back(fi);
            }
        }
        auto normal = [&](std::size_t fi) {
            const auto& f = cap.faces[fi];
            return triangle_unit_normal(vertices_[f[0]], vertices_[f[1]], vertices_[f[2]]);
        };
        for (const auto& [edge, incident] : by_edge) {
            (void)edge;
            if (incident.size() != 2) continue;
            require(normal(incident[0]).dot(normal(incident[1])) > 0.0, errc::bad_cap_labeling,
                    "cap '" + cap.name + "' has inconsistent face orientation");
        }
    }

    void build_adjacency() {
        const int n = int(vertices_.size());
        std::vector<int> deg(n, 0);
        for (const auto& e : edges_) {
            deg[e[0]]++;
            deg[e[1]]++;
        }
        adj_offsets_.assign(n + 1, 0);
        for (int i = 0; i < n; ++i) adj_offsets_[i + 1] = adj_offsets_[i] + deg[i];
        adj_.resize(adj_offsets_[n]);
        std::vector<int> cursor(adj_offsets_.begin(), adj_offsets_.end() - 1);
        for (const auto& e : edges_) {
            adj_[cursor[e[0]]++] = e[1];
            adj_[cursor[e[1]]++] = e[0];
        }
    }

    std::vector<Vec3> vertices_;
    std::vector<std::array<int, 4>> tets_;
    std::vector<CapPatch> caps_;
    std::vector<std::array<int, 2>> edges_;
    std::vector<std::array<int, 3>> surface_tris_;
    std::vector<std::array<int, 2>> surface_edges_;
    std::vector<int> surface_vertices_;
    std::vector<int> adj_offsets_;
    std::vector<int> adj_;
};

inline VolumeMesh build_mesh(std::vector<Vec3> vertices, std::vector<std::array<int, 4>> tets,
                             std::vector<CapPatch> caps = {}) {
    return VolumeMesh(std::move(vertices), std::move(tets), std::move(caps));
}

struct SurfaceView {
    const std::vector<std::array<int, 3>>* triangles;
    const std::vector<int>* vertex_indices;
};

inline SurfaceView extract_surface(const VolumeMesh& mesh) {
    return SurfaceView{&mesh.surface_triangles(), &mesh.surface_vertices()};
}

// ---------------------------------------------------------------------------
// Scaled graph Laplacian for Chebyshev filters. With the lambda_max = 2
// convention, Ltilde = 2 (I - D^-1/2 A D^-1/2) / lambda_max - I reduces to
// -D^-1/2 A D^-1/2. Zero-degree nodes get all-zero rows.

struct ScaledLaplacian {
    Eigen::SparseMatrix<double> matrix;
    double lambda_max = 2.0;
    std::string normalization = "sym";

    int node_count() const { return int(matrix.rows()); }
};

inline ScaledLaplacian scaled_laplacian_from_edges(int node_count,
                                                   const std::vector<std::array<int, 2>>& edges) {
    std::vector<double> degree(node_count, 0.0);
    for (const auto& e : edges) {
        degree[e[0]] += 1.0;
        degree[e[1]] += 1.0;
    }
    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(edges.size() * 2);
    for (const auto& e : edges) {
        const double w = -1.0 / std::sqrt(degree[e[0]] * degree[e[1]]);
        entries.emplace_back(e[0], e[1], w);
        entries.emplace_back(e[1], e[0], w);
    }
    ScaledLaplacian out;
    out.matrix.resize(node_count, node_count);
    out.matrix.setFromTriplets(entries.begin(), entries.end());
    out.matrix.makeCompressed();
    return out;
}

inline ScaledLaplacian scaled_laplacian(const VolumeMesh& mesh) {
    return scaled_laplacian_from_edges(int(mesh.node_count()), mesh.edges());
}

}  // namespace flowmesh
