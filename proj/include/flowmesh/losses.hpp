#pragma once

// The five mesh/CFD loss terms, their analytic gradients with respect to
// predicted vertex positions (and node fields for the CFD term), and the
// weighted combinations. Values use the printed formulas: Chamfer terms are
// sums (not means), edge-length deviation uses the population standard
// deviation, cap normals are unit-normalized.
//
// Reductions are deterministically ordered (pairwise summation over fixed
// index ranges), so results do not depend on the thread count.

#include "flowmesh/core.hpp"
#include "flowmesh/fields.hpp"
#include "flowmesh/mesh.hpp"
#include "flowmesh/spatial.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <vector>

namespace flowmesh {

struct LossWeights {
    double lambda1 = 1.0;    // point (Chamfer) terms
    double lambda2 = 0.5;    // edge-length deviation terms
    double lambda3 = 1.25;   // aspect ratio
    double lambda4 = 0.005;  // cap coplanarity
    double lambda5 = 15.0;   // CFD (pressure/velocity MAE)

    void validate() const {
        require(lambda1 >= 0 && lambda2 >= 0 && lambda3 >= 0 && lambda4 >= 0 && lambda5 >= 0,
                errc::bad_argument, "loss weights must be non-negative");
    }
};

struct EdgeStats {
    double mean = 0.0;
    double stddev = 0.0;  // population

    double deviation() const { return stddev / mean; }
};

struct LossReport {
    double point = 0.0;
    double point_surface = 0.0;
    double edge = 0.0;
    double edge_surface = 0.0;
    double aspect = 0.0;
    double cap = 0.0;
    double cfd = 0.0;
    bool has_cfd = false;
    double mesh = 0.0;

    // Lambda-weighted gradients; empty unless requested.
    std::vector<Vec3> position_grad;
    std::vector<double> pressure_grad;
    std::vector<Vec3> velocity_grad;

    double weighted_total(const LossWeights& w) const {
        return w.lambda1 * (point + point_surface) + w.lambda2 * (edge + edge_surface) +
               w.lambda3 * aspect + w.lambda4 * cap + w.lambda5 * cfd;
    }
};

// ---------------------------------------------------------------------------
// Chamfer point loss: sum of squared nearest-neighbor distances, both ways.

struct ChamferResult {
    double value = 0.0;
    std::vector<Vec3> grad;  // w.r.t. pred points, if requested
};

namespace detail {

// Bidirectional Chamfer against a prebuilt truth grid. Nearest-neighbor
// assignments are treated as locally fixed in the gradient (a valid
// subgradient away from ties).
inline ChamferResult chamfer_against(const std::vector<Vec3>& pred, const PointGrid& truth_grid,
                                     const std::vector<Vec3>& truth, bool want_grad) {
    require(!pred.empty() && !truth.empty(), errc::empty_point_set,
            "chamfer loss needs non-empty point sets");
    const PointGrid pred_grid(pred);

    std::vector<double> d2_fwd(pred.size());
    std::vector<int> nn_fwd(pred.size());
    parallel_for(pred.size(), [&](std::size_t i) {
        nn_fwd[i] = truth_grid.nearest(pred[i], &d2_fwd[i]);
    });

    std::vector<double> d2_bwd(truth.size());
    std::vector<int> nn_bwd(truth.size());
    parallel_for(truth.size(), [&](std::size_t i) {
        nn_bwd[i] = pred_grid.nearest(truth[i], &d2_bwd[i]);
    });

    ChamferResult out;
    out.value = pairwise_sum(d2_fwd) + pairwise_sum(d2_bwd);
    if (want_grad) {
        out.grad.assign(pred.size(), Vec3::Zero());
        for (std::size_t i = 0; i < pred.size(); ++i)
            out.grad[i] = 2.0 * (pred[i] - truth[nn_fwd[i]]);
        for (std::size_t j = 0; j < truth.size(); ++j)
            out.grad[nn_bwd[j]] += 2.0 * (pred[nn_bwd[j]] - truth[j]);
    }
    return out;
}

}  // namespace detail

inline ChamferResult chamfer_loss(const std::vector<Vec3>& pred, const std::vector<Vec3>& truth,
                                  bool want_grad) {
    require(!pred.empty() && !truth.empty(), errc::empty_point_set,
            "chamfer_loss needs non-empty point sets");
    const PointGrid truth_grid(truth);
    return detail::chamfer_against(pred, truth_grid, truth, want_grad);
}

// ---------------------------------------------------------------------------
// Edge-length deviation D_Edge = sigma/mu and the loss D(P) - D(T).

inline EdgeStats edge_stats(const std::vector<Vec3>& positions,
                            const std::vector<std::array<int, 2>>& edges) {
    require(!edges.empty(), errc::no_edges, "edge statistics over empty edge set");
    const std::size_t m = edges.size();
    auto length = [&](std::size_t k) {
        return (positions[edges[k][0]] - positions[edges[k][1]]).norm();
    };
    EdgeStats s;
    s.mean = pairwise_sum(m, length) / double(m);
    s.stddev = std::sqrt(std::max(0.0, pairwise_sum(m, [&](std::size_t k) {
                             const double d = length(k) - s.mean;
                             return d * d;
                         }) / double(m)));
    return s;
}

struct EdgeDeviationResult {
    double value = 0.0;
    EdgeStats pred_stats;
    EdgeStats template_stats;
    std::vector<Vec3> grad;  // w.r.t. pred positions (same length), if requested
};

// Gradient flows only through D_Edge(P); the template side is a constant.
inline EdgeDeviationResult edge_deviation_term(const std::vector<Vec3>& pred_positions,
                                               const std::vector<std::array<int, 2>>& pred_edges,
                                               EdgeStats template_stats, bool want_grad) {
    EdgeDeviationResult out;
    out.pred_stats = edge_stats(pred_positions, pred_edges);
    out.template_stats = template_stats;
    out.value = out.pred_stats.deviation() - template_stats.deviation();
    if (want_grad) {
        out.grad.assign(pred_positions.size(), Vec3::Zero());
        const double mu = out.pred_stats.mean;
        const double sigma = out.pred_stats.stddev;
        const double m = double(pred_edges.size());
        if (sigma > 0.0) {
            for (const auto& e : pred_edges) {
                const Vec3 d = pred_positions[e[0]] - pred_positions[e[1]];
                const double len = d.norm();
                // dD/dlen = (mu (len - mu)/sigma - sigma) / (m mu^2)
                const double dD = (mu * (len - mu) / sigma - sigma) / (m * mu * mu);
                const Vec3 g = (dD / len) * d;
                out.grad[e[0]] += g;
                out.grad[e[1]] -= g;
            }
        }
        // sigma == 0 sits at the non-smooth minimum of D; subgradient 0.
    }
    return out;
}

inline EdgeDeviationResult edge_deviation_loss(const VolumeMesh& pred, const VolumeMesh& tmpl,
                                               bool surface_only, bool want_grad) {
    const auto& pred_edges = surface_only ? pred.surface_edges() : pred.edges();
    const auto& tmpl_edges = surface_only ? tmpl.surface_edges() : tmpl.edges();
    return edge_deviation_term(pred.vertices(), pred_edges,
                               edge_stats(tmpl.vertices(), tmpl_edges), want_grad);
}

// ---------------------------------------------------------------------------
// Aspect ratio A(M): per-cell longest/shortest edge, averaged over cells.

inline constexpr std::array<std::array<int, 2>, 6> kTetEdgePairs{
    {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}};

struct AspectResult {
    double value = 0.0;           // L_Aspect = A(P) - A(T)
    double pred_aspect = 0.0;     // A(P)
    double template_aspect = 0.0; // A(T)
    std::vector<Vec3> grad;
};

inline double aspect_mean(const std::vector<Vec3>& positions,
                          const std::vector<std::array<int, 4>>& tets) {
    require(!tets.empty(), errc::bad_argument, "aspect ratio over empty cell set");
    const double sum = pairwise_sum(tets.size(), [&](std::size_t c) {
        const auto& t = tets[c];
        double lmin = std::numeric_limits<double>::infinity();
        double lmax = 0.0;
        for (const auto& pr : kTetEdgePairs) {
            const double len = (positions[t[pr[0]]] - positions[t[pr[1]]]).norm();
            if (len > lmax) lmax = len;
            if (len < lmin) lmin = len;
        }
        require(lmin > 0.0, errc::degenerate_cell, "zero-length edge in aspect ratio");
        return lmax / lmin;
    });
    return sum / double(tets.size());
}

// Argmax/argmin edges treated as locally fixed; ties resolved toward the
// lowest edge index by the strict comparisons below.
inline AspectResult aspect_ratio_term(const std::vector<Vec3>& pred_positions,
                                      const std::vector<std::array<int, 4>>& tets,
                                      double template_aspect, bool want_grad) {
    AspectResult out;
    out.pred_aspect = aspect_mean(pred_positions, tets);
    out.template_aspect = template_aspect;
    out.value = out.pred_aspect - template_aspect;
    if (want_grad) {
        out.grad.assign(pred_positions.size(), Vec3::Zero());
        const double inv_cells = 1.0 / double(tets.size());
        for (const auto& t : tets) {
            int imax = 0, imin = 0;
            double lmax = -1.0, lmin = std::numeric_limits<double>::infinity();
            std::array<double, 6> lens;
            for (int k = 0; k < 6; ++k) {
                lens[k] = (pred_positions[t[kTetEdgePairs[k][0]]] -
                           pred_positions[t[kTetEdgePairs[k][1]]]).norm();
                if (lens[k] > lmax) { lmax = lens[k]; imax = k; }
                if (lens[k] < lmin) { lmin = lens[k]; imin = k; }
            }
            // d(lmax/lmin)/dlmax = 1/lmin ; d/dlmin = -lmax/lmin^2
            auto add_edge_grad = [&](int k, double coeff) {
                const int a = t[kTetEdgePairs[k][0]], b = t[kTetEdgePairs[k][1]];
                const Vec3 d = pred_positions[a] - pred_positions[b];
                const Vec3 g = (coeff / lens[k]) * d;
                out.grad[a] += g;
                out.grad[b] -= g;
            };
            add_edge_grad(imax, inv_cells / lmin);
            add_edge_grad(imin, -inv_cells * lmax / (lmin * lmin));
        }
    }
    return out;
}

inline AspectResult aspect_ratio_loss(const VolumeMesh& pred, const VolumeMesh& tmpl,
                                      bool want_grad) {
    return aspect_ratio_term(pred.vertices(), pred.tets(),
                             aspect_mean(tmpl.vertices(), tmpl.tets()), want_grad);
}

// ---------------------------------------------------------------------------
// Cap coplanarity: per cap, sum of ||n_k - mean(n)||^2 over unit face normals.

struct CapResult {
    double value = 0.0;
    std::vector<Vec3> grad;
};

inline CapResult cap_coplanar_term(const std::vector<Vec3>& positions,
                                   const std::vector<CapPatch>& caps, bool want_grad) {
    require(caps.size() == 3, errc::missing_caps, "cap loss needs 3 labeled caps");
    CapResult out;
    if (want_grad) out.grad.assign(positions.size(), Vec3::Zero());

    std::vector<double> cap_values;
    for (const auto& cap : caps) {
        const std::size_t f = cap.faces.size();
        std::vector<Vec3> normals(f);
        for (std::size_t k = 0; k < f; ++k) {
            const auto& face = cap.faces[k];
            normals[k] = triangle_unit_normal(positions[face[0]], positions[face[1]],
                                              positions[face[2]]);
        }
        Vec3 mean = Vec3::Zero();
        for (const auto& n : normals) mean += n;
        mean /= double(f);
        cap_values.push_back(pairwise_sum(f, [&](std::size_t k) {
            return (normals[k] - mean).squaredNorm();
        }));
        if (want_grad) {
            for (std::size_t k = 0; k < f; ++k) {
                // d/dn_k of sum_i ||n_i - mean||^2 collapses to 2 (n_k - mean)
                // because sum_i (n_i - mean) = 0.
                const Vec3 gn = 2.0 * (normals[k] - mean);
                const auto& face = cap.faces[k];
                const Vec3& a = positions[face[0]];
                const Vec3& b = positions[face[1]];
                const Vec3& c = positions[face[2]];
                const Vec3 raw = triangle_raw_normal(a, b, c);
                const double len = raw.norm();
                const Vec3 n = raw / len;
                // dn/draw = (I - n n^T)/len applied to gn
                const Vec3 gr = (gn - n * n.dot(gn)) / len;
                // raw = (b-a) x (c-a); chain rule via scalar triple products.
                out.grad[face[0]] += gr.cross(c - b);
                out.grad[face[1]] += (c - a).cross(gr);
                out.grad[face[2]] += gr.cross(b - a);
            }
        }
    }
    out.value = pairwise_sum(cap_values);
    return out;
}

inline CapResult cap_coplanar_loss(const VolumeMesh& mesh, bool want_grad) {
    return cap_coplanar_term(mesh.vertices(), mesh.caps(), want_grad);
}

// ---------------------------------------------------------------------------
// CFD loss: pooled mean absolute error over 4 N entries (pressure + 3
// velocity components), in normalized space.

struct CfdResult {
    double value = 0.0;
    std::vector<double> pressure_grad;
    std::vector<Vec3> velocity_grad;
};

inline CfdResult cfd_loss(const NodeFields& pred, const NodeFields& truth, bool want_grad) {
    require(pred.node_count() == truth.node_count(), errc::field_length_mismatch,
            "cfd_loss field lengths differ");
    require(pred.space == FieldSpace::normalized && truth.space == FieldSpace::normalized,
            errc::wrong_space, "cfd_loss expects normalized fields");
    const std::size_t n = pred.node_count();
    require(n > 0, errc::field_length_mismatch, "cfd_loss over empty fields");

    const double denom = 4.0 * double(n);
    CfdResult out;
    out.value = pairwise_sum(n, [&](std::size_t j) {
        double s = std::abs(pred.pressure[j] - truth.pressure[j]);
        for (int k = 0; k < 3; ++k) s += std::abs(pred.velocity[j][k] - truth.velocity[j][k]);
        return s;
    }) / denom;
    if (want_grad) {
        out.pressure_grad.assign(n, 0.0);
        out.velocity_grad.assign(n, Vec3::Zero());
        auto sgn = [](double d) { return d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0); };
        for (std::size_t j = 0; j < n; ++j) {
            out.pressure_grad[j] = sgn(pred.pressure[j] - truth.pressure[j]) / denom;
            for (int k = 0; k < 3; ++k)
                out.velocity_grad[j][k] = sgn(pred.velocity[j][k] - truth.velocity[j][k]) / denom;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Combined mesh loss. The evaluator caches everything that depends only on
// the template and the ground truth, so iterative fitting pays only for the
// prediction-dependent parts.

class MeshLossEvaluator {
public:
    MeshLossEvaluator(const VolumeMesh& tmpl, const VolumeMesh& truth,
                      const NodeFields* truth_fields, LossWeights weights)
        : tmpl_(&tmpl), truth_(&truth), truth_fields_(truth_fields), weights_(weights) {
        weights_.validate();
        if (truth_fields_) {
            require(truth_fields_->space == FieldSpace::normalized, errc::wrong_space,
                    "truth fields must be normalized for the CFD term");
            require(truth_fields_->node_count() == truth.node_count(), errc::field_length_mismatch,
                    "truth fields do not match truth mesh");
        }
        truth_grid_.emplace(truth.vertices());
        truth_surface_points_.reserve(truth.surface_vertices().size());
        for (int idx : truth.surface_vertices()) truth_surface_points_.push_back(truth.vertices()[idx]);
        truth_surface_grid_.emplace(truth_surface_points_);

        template_edge_stats_ = edge_stats(tmpl.vertices(), tmpl.edges());
        template_surface_edge_stats_ = edge_stats(tmpl.vertices(), tmpl.surface_edges());
        template_aspect_ = aspect_mean(tmpl.vertices(), tmpl.tets());
    }

    const LossWeights& weights() const { return weights_; }
    const VolumeMesh& tmpl() const { return *tmpl_; }

    bool cfd_active() const { return truth_fields_ != nullptr && weights_.lambda5 > 0.0; }

    // `positions` uses the template's connectivity; `pred_fields` (normalized)
    // is required when the CFD term is active.
    LossReport evaluate(const std::vector<Vec3>& positions, const NodeFields* pred_fields,
                        bool want_grad) const {
        require(positions.size() == tmpl_->node_count(), errc::correspondence_mismatch,
                "prediction does not match template node count");
        LossReport rep;

        // Point terms (all vertices, then surface vertices only).
        const ChamferResult all =
            detail::chamfer_against(positions, *truth_grid_, truth_->vertices(), want_grad);
        rep.point = all.value;

        std::vector<Vec3> surf_positions(tmpl_->surface_vertices().size());
        for (std::size_t i = 0; i < surf_positions.size(); ++i)
            surf_positions[i] = positions[tmpl_->surface_vertices()[i]];
        const ChamferResult surf = detail::chamfer_against(surf_positions, *truth_surface_grid_,
                                                           truth_surface_points_, want_grad);
        rep.point_surface = surf.value;

        // Edge-length deviation terms.
        const EdgeDeviationResult edge_all =
            edge_deviation_term(positions, tmpl_->edges(), template_edge_stats_, want_grad);
        rep.edge = edge_all.value;
        const EdgeDeviationResult edge_surf = edge_deviation_term(
            positions, tmpl_->surface_edges(), template_surface_edge_stats_, want_grad);
        rep.edge_surface = edge_surf.value;

        // Aspect ratio and cap coplanarity.
        const AspectResult aspect =
            aspect_ratio_term(positions, tmpl_->tets(), template_aspect_, want_grad);
        rep.aspect = aspect.value;
        const CapResult cap = cap_coplanar_term(positions, tmpl_->caps(), want_grad);
        rep.cap = cap.value;

        // CFD term.
        CfdResult cfd;
        if (cfd_active()) {
            require(pred_fields != nullptr, errc::field_length_mismatch,
                    "CFD term active but prediction carries no fields");
            cfd = cfd_loss(*pred_fields, *truth_fields_, want_grad);
            rep.cfd = cfd.value;
            rep.has_cfd = true;
        }

        rep.mesh = rep.weighted_total(weights_);
        require(std::isfinite(rep.mesh), errc::non_finite_loss, "mesh loss is not finite");

        if (want_grad) {
            rep.position_grad.assign(positions.size(), Vec3::Zero());
            for (std::size_t i = 0; i < positions.size(); ++i) {
                rep.position_grad[i] = weights_.lambda1 * all.grad[i] +
                                       weights_.lambda2 * (edge_all.grad[i] + edge_surf.grad[i]) +
                                       weights_.lambda3 * aspect.grad[i] +
                                       weights_.lambda4 * cap.grad[i];
            }
            for (std::size_t i = 0; i < surf_positions.size(); ++i)
                rep.position_grad[tmpl_->surface_vertices()[i]] += weights_.lambda1 * surf.grad[i];
            if (rep.has_cfd) {
                rep.pressure_grad.assign(positions.size(), 0.0);
                rep.velocity_grad.assign(positions.size(), Vec3::Zero());
                for (std::size_t i = 0; i < positions.size(); ++i) {
                    rep.pressure_grad[i] = weights_.lambda5 * cfd.pressure_grad[i];
                    rep.velocity_grad[i] = weights_.lambda5 * cfd.velocity_grad[i];
                }
            }
        }
        return rep;
    }

private:
    const VolumeMesh* tmpl_;
    const VolumeMesh* truth_;
    const NodeFields* truth_fields_;
    LossWeights weights_;
    std::optional<PointGrid> truth_grid_;
    std::vector<Vec3> truth_surface_points_;
    std::optional<PointGrid> truth_surface_grid_;
    EdgeStats template_edge_stats_;
    EdgeStats template_surface_edge_stats_;
    double template_aspect_ = 0.0;
};

inline LossReport mesh_loss(const VolumeMesh& pred, const NodeFields* pred_fields,
                            const VolumeMesh& truth, const NodeFields* truth_fields,
                            const VolumeMesh& tmpl, const LossWeights& weights, bool want_grad) {
    require(pred.same_connectivity(tmpl), errc::correspondence_mismatch,
            "prediction and template must share connectivity");
    MeshLossEvaluator eval(tmpl, truth, truth_fields, weights);
    return eval.evaluate(pred.vertices(), pred_fields, want_grad);
}

inline double total_loss(const std::vector<LossReport>& branch_reports) {
    require(branch_reports.size() == 3, errc::wrong_branch_count,
            "total loss expects exactly 3 branch reports");
    return branch_reports[0].mesh + branch_reports[1].mesh + branch_reports[2].mesh;
}

}  // namespace flowmesh
