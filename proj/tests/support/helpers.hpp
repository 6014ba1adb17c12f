#pragma once

// Shared fixtures for the test suites: tiny canonical meshes, phantom
// shortcuts and a scratch-directory guard.

#include "flowmesh/mesh.hpp"
#include "flowmesh/synth.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace testsup {

using flowmesh::Vec3;

inline std::vector<Vec3> regular_tet_vertices() {
    const double s3 = std::sqrt(3.0), s6 = std::sqrt(6.0);
    return {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0.5, s3 / 2.0, 0), Vec3(0.5, s3 / 6.0, s6 / 3.0)};
}

inline flowmesh::VolumeMesh single_regular_tet() {
    return flowmesh::VolumeMesh(regular_tet_vertices(), {{0, 1, 2, 3}});
}

inline flowmesh::VolumeMesh two_tets_shared_face() {
    // Shared face (0,1,2); apexes above and below.
    std::vector<Vec3> v{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0.3, 0.3, 1),
                        Vec3(0.3, 0.3, -1)};
    return flowmesh::VolumeMesh(v, {{0, 1, 2, 3}, {0, 1, 2, 4}});
}

inline flowmesh::PhantomSpec quick_spec(int nodes = 600, std::uint64_t seed = 0) {
    flowmesh::PhantomSpec spec;
    spec.target_nodes = nodes;
    spec.seed = seed;
    spec.image_size = 32;  // keep test images small
    return spec;
}

struct TempDir {
    std::filesystem::path path;

    explicit TempDir(const std::string& tag) {
        path = std::filesystem::temp_directory_path() / ("flowmesh_test_" + tag);
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }

    std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace testsup
