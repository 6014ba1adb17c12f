#pragma once

// Direct gradient-based deformation of a template volume mesh onto a target
// (centroid pre-alignment + adaptive-moment descent on the combined mesh
// loss), and node-wise averaging of point-correspondent meshes.

#include "flowmesh/core.hpp"
#include "flowmesh/losses.hpp"
#include "flowmesh/mesh.hpp"

#include <chrono>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace flowmesh {

struct FitConfig {
    int max_iters = 2000;
    double step_size = 0.05;  // mm per Adam step
    double beta_momentum = 0.9;
    double beta_variance = 0.999;
    double eps_stability = 1e-8;
    double tolerance = 1e-6;    // relative smoothed-loss change
    int tolerance_window = 50;  // iterations
    LossWeights weights;
    std::uint64_t seed = 0;  // reserved for stochastic variants

    void validate() const {
        require(max_iters >= 1, errc::bad_argument, "max_iters must be >= 1");
        require(step_size > 0.0, errc::bad_argument, "step_size must be > 0");
        require(beta_momentum >= 0.0 && beta_momentum < 1.0 && beta_variance >= 0.0 &&
                    beta_variance < 1.0,
                errc::bad_argument, "betas must lie in [0, 1)");
        require(eps_stability > 0.0, errc::bad_argument, "eps_stability must be > 0");
        weights.validate();
    }
};

struct FitIterationRecord {
    int iteration = 0;
    double point = 0.0, point_surface = 0.0;
    double edge = 0.0, edge_surface = 0.0;
    double aspect = 0.0, cap = 0.0, cfd = 0.0;
    double mesh = 0.0;
};

struct FitTrace {
    std::vector<FitIterationRecord> iterations;
    double wall_seconds = 0.0;
    std::string termination;  // "converged" | "max_iters"
    double best_loss = 0.0;
    int best_iteration = 0;
};

struct FitResult {
    VolumeMesh mesh;
    NodeFields fields;  // normalized; empty when the CFD term was inactive
    FitTrace trace;
};

// Deforms `tmpl` onto `target`, moving vertex positions only (the template's
// connectivity is preserved, so the result is point-correspondent with the
// template). When `target_fields` (normalized) is present, node fields are
// optimized jointly under the lambda5-weighted CFD term; otherwise lambda5
// is forced to 0. Returns the best-loss iterate.
inline FitResult fit_template(const VolumeMesh& tmpl, const VolumeMesh& target,
                              const NodeFields* target_fields, FitConfig config) {
    config.validate();
    if (target_fields == nullptr) config.weights.lambda5 = 0.0;
    const bool joint_fields = target_fields != nullptr && config.weights.lambda5 > 0.0;

    const auto t_start = std::chrono::steady_clock::now();
    const MeshLossEvaluator evaluator(tmpl, target, joint_fields ? target_fields : nullptr,
                                      config.weights);

    // Initial rigid alignment: centroid match only.
    const Vec3 shift = target.centroid() - tmpl.centroid();
    std::vector<Vec3> positions = tmpl.vertices();
    for (auto& p : positions) p += shift;

    NodeFields fields;
    if (joint_fields) {
        fields.space = FieldSpace::normalized;
        fields.pressure.assign(tmpl.node_count(), 0.0);
        fields.velocity.assign(tmpl.node_count(), Vec3::Zero());
    }

    const std::size_t n = positions.size();
    std::vector<Vec3> m_pos(n, Vec3::Zero()), v_pos(n, Vec3::Zero());
    std::vector<double> m_p, v_p;
    std::vector<Vec3> m_vel, v_vel;
    if (joint_fields) {
        m_p.assign(n, 0.0);
        v_p.assign(n, 0.0);
        m_vel.assign(n, Vec3::Zero());
        v_vel.assign(n, Vec3::Zero());
    }

    FitTrace trace;
    trace.best_loss = std::numeric_limits<double>::infinity();
    std::vector<Vec3> best_positions = positions;
    NodeFields best_fields = fields;
    std::vector<double> smoothed;
    double smooth_acc = 0.0;
    trace.termination = "max_iters";

    for (int iter = 0; iter < config.max_iters; ++iter) {
        const LossReport rep =
            evaluator.evaluate(positions, joint_fields ? &fields : nullptr, true);

        trace.iterations.push_back({iter, rep.point, rep.point_surface, rep.edge,
                                    rep.edge_surface, rep.aspect, rep.cap, rep.cfd, rep.mesh});
        if (rep.mesh < trace.best_loss) {
            trace.best_loss = rep.mesh;
            trace.best_iteration = iter;
            best_positions = positions;
            if (joint_fields) best_fields = fields;
        }

        // A numerically-zero loss is an exact fit; stepping away from it only
        // trades the data term against the quality terms.
        if (rep.mesh <= 1e-12) {
            trace.termination = "converged";
            break;
        }

        // Exponentially smoothed loss; converged when the smoothed value
        // stops moving (relative) over the tolerance window.
        smooth_acc = iter == 0 ? rep.mesh : 0.8 * smooth_acc + 0.2 * rep.mesh;
        smoothed.push_back(smooth_acc);
        if (int(smoothed.size()) > config.tolerance_window) {
            const double past = smoothed[smoothed.size() - 1 - config.tolerance_window];
            const double rel = std::abs(smooth_acc - past) / std::max(std::abs(past), 1e-30);
            if (rel < config.tolerance) {
                trace.termination = "converged";
                break;
            }
        }

        // Adam update.
        const double b1 = config.beta_momentum, b2 = config.beta_variance;
        const double corr1 = 1.0 - std::pow(b1, double(iter + 1));
        const double corr2 = 1.0 - std::pow(b2, double(iter + 1));
        for (std::size_t i = 0; i < n; ++i) {
            for (int k = 0; k < 3; ++k) {
                const double g = rep.position_grad[i][k];
                m_pos[i][k] = b1 * m_pos[i][k] + (1.0 - b1) * g;
                v_pos[i][k] = b2 * v_pos[i][k] + (1.0 - b2) * g * g;
                positions[i][k] -= config.step_size * (m_pos[i][k] / corr1) /
                                   (std::sqrt(v_pos[i][k] / corr2) + config.eps_stability);
            }
        }
        if (joint_fields) {
            for (std::size_t i = 0; i < n; ++i) {
                const double gp = rep.pressure_grad[i];
                m_p[i] = b1 * m_p[i] + (1.0 - b1) * gp;
                v_p[i] = b2 * v_p[i] + (1.0 - b2) * gp * gp;
                fields.pressure[i] -= config.step_size * (m_p[i] / corr1) /
                                      (std::sqrt(v_p[i] / corr2) + config.eps_stability);
                for (int k = 0; k < 3; ++k) {
                    const double gv = rep.velocity_grad[i][k];
                    m_vel[i][k] = b1 * m_vel[i][k] + (1.0 - b1) * gv;
                    v_vel[i][k] = b2 * v_vel[i][k] + (1.0 - b2) * gv * gv;
                    fields.velocity[i][k] -= config.step_size * (m_vel[i][k] / corr1) /
                                             (std::sqrt(v_vel[i][k] / corr2) +
                                              config.eps_stability);
                }
            }
        }
    }

    trace.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();

    VolumeMesh fitted = tmpl.with_vertices(std::move(best_positions));
    return FitResult{std::move(fitted), std::move(best_fields), std::move(trace)};
}

// Node-wise arithmetic mean of point-correspondent meshes; connectivity is
// copied from the first mesh. Validation errors (e.g. a degenerate averaged
// cell) propagate rather than being silently fixed.
inline VolumeMesh average_correspondent_meshes(const std::vector<const VolumeMesh*>& meshes) {
    require(!meshes.empty(), errc::bad_argument, "average over zero meshes");
    const VolumeMesh& first = *meshes.front();
    for (const auto* m : meshes)
        require(m->same_connectivity(first), errc::correspondence_mismatch,
                "meshes are not point-correspondent");
    const std::size_t n = first.node_count();
    std::vector<Vec3> mean(n, Vec3::Zero());
    for (std::size_t i = 0; i < n; ++i) {
        for (int k = 0; k < 3; ++k) {
            // Accumulate offsets from the first mesh: identical inputs then
            // reproduce their positions bit-exactly.
            const double base = first.vertices()[i][k];
            mean[i][k] = base + pairwise_sum(meshes.size(), [&](std::size_t s) {
                                    return meshes[s]->vertices()[i][k] - base;
                                }) / double(meshes.size());
        }
    }
    return first.with_vertices(std::move(mean));
}

}  // namespace flowmesh
