#include "flowmesh/mesh.hpp"
#include "flowmesh/synth.hpp"

#include "support/helpers.hpp"
#include "support/oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <set>

using namespace flowmesh;
using testsup::single_regular_tet;

TEST_CASE("single regular tetrahedron derives forced structure") {
    const VolumeMesh mesh = single_regular_tet();
    CHECK(mesh.edges().size() == 6);
    CHECK(mesh.surface_triangles().size() == 4);
    CHECK(mesh.surface_vertices().size() == 4);
    CHECK(mesh.surface_edges().size() == 6);
}

TEST_CASE("degenerate cells are rejected") {
    auto verts = testsup::regular_tet_vertices();
    CHECK_THROWS_MATCHES(VolumeMesh(verts, {{0, 1, 2, 2}}), Error,
                         Catch::Matchers::Predicate<Error>(
                             [](const Error& e) { return e.code() == errc::degenerate_cell; }));
    // Flat tet: all four points coplanar.
    std::vector<Vec3> flat{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(1, 1, 0)};
    CHECK_THROWS_AS(VolumeMesh(flat, {{0, 1, 2, 3}}), Error);
}

TEST_CASE("indices out of range are rejected") {
    auto verts = testsup::regular_tet_vertices();
    try {
        VolumeMesh mesh(verts, {{0, 1, 2, 4}});
        FAIL("expected IndexOutOfRange");
    } catch (const Error& e) {
        CHECK(e.code() == errc::index_out_of_range);
    }
}

TEST_CASE("negative orientation is fixed canonically and idempotently") {
    auto verts = testsup::regular_tet_vertices();
    // Swap two indices so the input volume is negative.
    VolumeMesh mesh(verts, {{0, 1, 3, 2}});
    const auto& t = mesh.tets()[0];
    CHECK(tet_signed_volume(verts[t[0]], verts[t[1]], verts[t[2]], verts[t[3]]) > 0.0);

    // Rebuilding from the emitted arrays must reproduce identical structure.
    VolumeMesh rebuilt(mesh.vertices(), mesh.tets(), mesh.caps());
    CHECK(rebuilt.tets() == mesh.tets());
    CHECK(rebuilt.edges() == mesh.edges());
    CHECK(rebuilt.surface_triangles() == mesh.surface_triangles());
    CHECK(rebuilt.surface_vertices() == mesh.surface_vertices());
}

TEST_CASE("two tets sharing a face hide the interior face") {
    const VolumeMesh mesh = testsup::two_tets_shared_face();
    CHECK(mesh.surface_triangles().size() == 6);
    for (const auto& tri : mesh.surface_triangles()) {
        auto sorted = tri;
        std::sort(sorted.begin(), sorted.end());
        CHECK(sorted != std::array<int, 3>{0, 1, 2});
    }
    // All five vertices are on the surface.
    CHECK(mesh.surface_vertices().size() == 5);
}

TEST_CASE("more than two tets on a face is non-manifold") {
    std::vector<Vec3> v{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0.3, 0.3, 1),
                        Vec3(0.3, 0.3, -1), Vec3(0.6, 0.6, 0.5)};
    try {
        VolumeMesh mesh(v, {{0, 1, 2, 3}, {0, 1, 2, 4}, {0, 1, 2, 5}});
        FAIL("expected NonManifoldSurface");
    } catch (const Error& e) {
        CHECK(e.code() == errc::nonmanifold_surface);
    }
}

TEST_CASE("phantom mesh passes an independent edge/face census") {
    const PhantomBundle bundle = generate_phantom(testsup::quick_spec(500));
    const VolumeMesh& mesh = bundle.mesh;
    CHECK(mesh.caps().size() == 3);

    // Census oracle: recount unique edges and boundary faces from the raw
    // index lists.
    std::set<std::array<int, 2>> edges;
    std::map<std::array<int, 3>, int> faces;
    static const int fidx[4][3] = {{1, 2, 3}, {0, 3, 2}, {0, 1, 3}, {0, 2, 1}};
    static const int eidx[6][2] = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
    for (const auto& t : mesh.tets()) {
        for (const auto& e : eidx) {
            std::array<int, 2> key{t[e[0]], t[e[1]]};
            if (key[0] > key[1]) std::swap(key[0], key[1]);
            edges.insert(key);
        }
        for (const auto& f : fidx) {
            std::array<int, 3> key{t[f[0]], t[f[1]], t[f[2]]};
            std::sort(key.begin(), key.end());
            faces[key] += 1;
        }
    }
    std::size_t boundary = 0;
    for (const auto& [key, count] : faces) {
        (void)key;
        if (count == 1) ++boundary;
    }
    CHECK(mesh.edges().size() == edges.size());
    CHECK(mesh.surface_triangles().size() == boundary);

    // Closed surface identity: 3 T_s = 2 E_s.
    CHECK(3 * mesh.surface_triangles().size() == 2 * mesh.surface_edges().size());

    // Interior axis nodes are not surface vertices.
    std::set<int> surf(mesh.surface_vertices().begin(), mesh.surface_vertices().end());
    bool found_interior = false;
    for (std::size_t i = 0; i < bundle.lattice.size(); ++i) {
        const auto& pt = bundle.lattice[i];
        if (!pt.wall && pt.z != 0.0 && pt.z != bundle.spec.length_mm) {
            CHECK(surf.count(int(i)) == 0);
            found_interior = true;
        }
    }
    CHECK(found_interior);
}

TEST_CASE("cap labeling is validated") {
    const PhantomBundle bundle = generate_phantom(testsup::quick_spec(400));
    const VolumeMesh& mesh = bundle.mesh;

    SECTION("wrong cap count") {
        std::vector<CapPatch> two(mesh.caps().begin(), mesh.caps().begin() + 2);
        try {
            VolumeMesh bad(mesh.vertices(), mesh.tets(), two);
            FAIL("expected BadCapLabeling");
        } catch (const Error& e) {
            CHECK(e.code() == errc::bad_cap_labeling);
        }
    }
    SECTION("unknown name") {
        auto caps = mesh.caps();
        caps[0].name = "side_port";
        CHECK_THROWS_AS(VolumeMesh(mesh.vertices(), mesh.tets(), caps), Error);
    }
    SECTION("non-boundary face") {
        auto caps = mesh.caps();
        // Use an interior face: any face shared by two tets. Fabricate from
        // the first tet's face that is not on the surface.
        std::map<std::array<int, 3>, int> faces;
        static const int fidx[4][3] = {{1, 2, 3}, {0, 3, 2}, {0, 1, 3}, {0, 2, 1}};
        std::array<int, 3> interior{};
        bool found = false;
        for (const auto& t : mesh.tets()) {
            for (const auto& f : fidx) {
                std::array<int, 3> key{t[f[0]], t[f[1]], t[f[2]]};
                std::sort(key.begin(), key.end());
                if (++faces[key] == 2) {
                    interior = key;
                    found = true;
                    break;
                }
            }
            if (found) break;
        }
        REQUIRE(found);
        caps[0].faces.push_back(interior);
        try {
            VolumeMesh bad(mesh.vertices(), mesh.tets(), caps);
            FAIL("expected BadCapLabeling");
        } catch (const Error& e) {
            CHECK(e.code() == errc::bad_cap_labeling);
        }
    }
}

TEST_CASE("scaled laplacian matches hand and dense oracles") {
    SECTION("two nodes, one edge") {
        const ScaledLaplacian lap = scaled_laplacian_from_edges(2, {{0, 1}});
        Eigen::MatrixXd dense = Eigen::MatrixXd(lap.matrix);
        CHECK(dense(0, 0) == 0.0);
        CHECK(dense(0, 1) == -1.0);
        CHECK(dense(1, 0) == -1.0);
        CHECK(dense(1, 1) == 0.0);
    }
    SECTION("isolated node has a zero row") {
        const ScaledLaplacian lap = scaled_laplacian_from_edges(3, {{0, 1}});
        Eigen::MatrixXd dense = Eigen::MatrixXd(lap.matrix);
        CHECK(dense.row(2).cwiseAbs().maxCoeff() == 0.0);
        CHECK(dense.col(2).cwiseAbs().maxCoeff() == 0.0);
    }
    SECTION("dense oracle on a small mesh") {
        // A small tube lattice has < 50 nodes at minimum resolution.
        PhantomSpec spec = testsup::quick_spec(400);
        spec.radial_divisions = 2;
        spec.axial_divisions = 4;
        spec.target_nodes = 100;
        const PhantomBundle bundle = generate_phantom(spec);
        const VolumeMesh& mesh = bundle.mesh;
        const ScaledLaplacian lap = scaled_laplacian(mesh);
        const Eigen::MatrixXd dense =
            oracle::dense_scaled_laplacian(int(mesh.node_count()), mesh.edges());
        const Eigen::MatrixXd got = Eigen::MatrixXd(lap.matrix);
        CHECK((got - dense).cwiseAbs().maxCoeff() < 1e-15);
        CHECK((got - got.transpose()).cwiseAbs().maxCoeff() == 0.0);
    }
    SECTION("spectral radius is at most 1") {
        const PhantomBundle bundle = generate_phantom(testsup::quick_spec(500, 3));
        const ScaledLaplacian lap = scaled_laplacian(bundle.mesh);
        Eigen::VectorXd x = Eigen::VectorXd::Ones(lap.node_count());
        x.normalize();
        double radius = 0.0;
        for (int it = 0; it < 200; ++it) {
            Eigen::VectorXd y = lap.matrix * x;
            radius = y.norm();
            if (radius == 0.0) break;
            x = y / radius;
        }
        CHECK(radius <= 1.0 + 1e-9);
    }
}

TEST_CASE("extract_surface returns the boundary view") {
    const VolumeMesh mesh = single_regular_tet();
    const SurfaceView view = extract_surface(mesh);
    CHECK(view.triangles->size() == 4);
    CHECK(view.vertex_indices->size() == 4);
}
