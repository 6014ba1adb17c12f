#include "flowmesh/metrics.hpp"
#include "flowmesh/synth.hpp"

#include "support/helpers.hpp"
#include "support/oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace flowmesh;

TEST_CASE("voxelize") {
    SECTION("grid entirely outside the mesh gives an all-zero mask") {
        const auto mesh = testsup::single_regular_tet();
        GridSpec grid;
        grid.dims = {4, 4, 4};
        grid.origin = Vec3(100, 100, 100);
        const VoxelMask mask = voxelize(mesh, grid);
        CHECK(mask.count_set() == 0);
    }
    SECTION("unit cube as five tets fills a 4^3 center lattice") {
        std::vector<Vec3> v{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(1, 1, 0),
                            Vec3(0, 0, 1), Vec3(1, 0, 1), Vec3(0, 1, 1), Vec3(1, 1, 1)};
        std::vector<std::array<int, 4>> tets;
        detail::split_hex({0, 1, 2, 3, 4, 5, 6, 7}, false, tets);
        const VolumeMesh cube(v, tets);
        GridSpec grid;
        grid.dims = {4, 4, 4};
        grid.spacing = Vec3::Constant(0.25);
        grid.origin = Vec3::Constant(0.125);
        const VoxelMask mask = voxelize(cube, grid);
        CHECK(mask.count_set() == 64);
    }
    SECTION("matches the all-tets oracle") {
        const PhantomBundle bundle = generate_phantom(testsup::quick_spec(400, 7));
        GridSpec grid = cover_mesh(
            GridSpec{{1, 1, 1}, Vec3::Constant(2.0), bundle.mesh.vertices()[0]}, bundle.mesh);
        const VoxelMask mask = voxelize(bundle.mesh, grid);
        REQUIRE(mask.grid.dims[0] * mask.grid.dims[1] * mask.grid.dims[2] <= 40000);
        std::size_t idx = 0;
        for (int z = 0; z < mask.grid.dims[2]; ++z) {
            for (int y = 0; y < mask.grid.dims[1]; ++y) {
                for (int x = 0; x < mask.grid.dims[0]; ++x, ++idx) {
                    const Vec3 center = mask.grid.origin +
                                        Vec3(x * mask.grid.spacing[0], y * mask.grid.spacing[1],
                                             z * mask.grid.spacing[2]);
                    const bool brute =
                        oracle::point_in_mesh_brute(bundle.mesh, center, TetLocator::kBaryTol);
                    CHECK(bool(mask.values[idx]) == brute);
                }
            }
        }
    }
}

TEST_CASE("dice") {
    GridSpec grid;
    grid.dims = {4, 2, 2};
    auto mask = [&](std::initializer_list<int> set) {
        VoxelMask m;
        m.grid = grid;
        m.values.assign(16, 0);
        for (int i : set) m.values[i] = 1;
        return m;
    };
    SECTION("identity, disjoint, half-overlap anchors") {
        const auto a = mask({0, 1, 2, 3, 4, 5, 6, 7});
        CHECK(dice(a, a) == 1.0);
        const auto b = mask({8, 9, 10, 11, 12, 13, 14, 15});
        CHECK(dice(a, b) == 0.0);
        const auto c = mask({4, 5, 6, 7, 8, 9, 10, 11});
        CHECK(dice(a, c) == 0.5);
    }
    SECTION("both empty is defined as 1") {
        CHECK(dice(mask({}), mask({})) == 1.0);
    }
    SECTION("grid mismatch is rejected") {
        VoxelMask other = mask({1});
        other.grid.spacing = Vec3::Constant(0.5);
        CHECK_THROWS_AS(dice(mask({1}), other), Error);
    }
    SECTION("symmetry") {
        const auto a = mask({0, 2, 4, 6});
        const auto b = mask({0, 3, 4, 9, 12});
        CHECK(dice(a, b) == dice(b, a));
    }
}

TEST_CASE("surface distances") {
    SECTION("identical surfaces give zero") {
        const PhantomBundle bundle = generate_phantom(testsup::quick_spec(400, 9));
        const auto r = surface_distances(bundle.mesh, bundle.mesh);
        CHECK(r.assd == 0.0);
        CHECK(r.hd == 0.0);
    }
    SECTION("parallel patches separated by d") {
        const double d = 0.75;
        TriSurface a, b;
        a.all_positions = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(1, 1, 0), Vec3(0, 1, 0)};
        a.triangles = {{0, 1, 2}, {0, 2, 3}};
        a.vertices = a.all_positions;
        b = a;
        for (auto& p : b.all_positions) p[2] += d;
        b.vertices = b.all_positions;
        const auto r = surface_distances(a, b);
        CHECK_THAT(r.assd, Catch::Matchers::WithinRel(d, 1e-14));
        CHECK_THAT(r.hd, Catch::Matchers::WithinRel(d, 1e-14));
    }
    SECTION("matches the all-triangles oracle and ASSD <= HD") {
        const PhantomBundle p1 = generate_phantom(testsup::quick_spec(400, 10));
        const PhantomBundle p2 = perturb_phantom(p1, 0.8, 20);
        const auto fast = surface_distances(p1.mesh, p2.mesh);

        const auto sa = surface_of(p1.mesh);
        const auto sb = surface_of(p2.mesh);
        std::vector<double> all;
        for (const auto& v : sa.vertices)
            all.push_back(oracle::surface_dist_brute(v, sb.all_positions, sb.triangles));
        for (const auto& v : sb.vertices)
            all.push_back(oracle::surface_dist_brute(v, sa.all_positions, sa.triangles));
        const double assd = pairwise_sum(all) / double(all.size());
        double hd = 0.0;
        for (double x : all) hd = std::max(hd, x);
        CHECK_THAT(fast.assd, Catch::Matchers::WithinAbs(assd, 1e-9));
        CHECK_THAT(fast.hd, Catch::Matchers::WithinAbs(hd, 1e-9));
        CHECK(fast.assd <= fast.hd);
    }
}

TEST_CASE("node errors") {
    SECTION("identical fields give zeros") {
        // Bifurcation: every channel of the analytic field varies, so no
        // truth range degenerates.
        PhantomSpec spec = testsup::quick_spec(400, 11);
        spec.kind = "bifurcation";
        const PhantomBundle bundle = generate_phantom(spec);
        const auto r = node_errors(bundle.fields, bundle.fields);
        for (int c = 0; c < kErrorChannels; ++c) {
            CHECK(r.mnae_s[c] == 0.0);
            CHECK(r.rmse[c] == 0.0);
        }
    }
    SECTION("hand-computed two-node example") {
        NodeFields truth, pred;
        truth.space = pred.space = FieldSpace::raw;
        truth.pressure = {0.0, 10.0};
        pred.pressure = {1.0, 10.0};
        truth.velocity = {Vec3(0, 0, 0), Vec3(1, 2, 3)};
        pred.velocity = truth.velocity;
        const auto r = node_errors(pred, truth);
        CHECK_THAT(r.nae[0][0], Catch::Matchers::WithinRel(10.0, 1e-14));
        CHECK(r.nae[0][1] == 0.0);
        CHECK_THAT(r.mnae_s[0], Catch::Matchers::WithinRel(5.0, 1e-14));
        CHECK_THAT(r.rmse[0], Catch::Matchers::WithinRel(std::sqrt(0.5), 1e-14));
        CHECK(r.mnae_s[1] == 0.0);
    }
    SECTION("constant truth channel raises ZeroRange") {
        NodeFields truth, pred;
        truth.space = pred.space = FieldSpace::raw;
        truth.pressure = {5.0, 5.0};
        pred.pressure = {5.0, 6.0};
        truth.velocity = {Vec3(0, 0, 0), Vec3(1, 1, 1)};
        pred.velocity = truth.velocity;
        try {
            node_errors(pred, truth);
            FAIL("expected ZeroRange");
        } catch (const Error& e) {
            CHECK(e.code() == errc::zero_range);
        }
    }
}

TEST_CASE("population node errors") {
    PhantomSpec spec = testsup::quick_spec(400, 12);
    spec.kind = "bifurcation";
    const PhantomBundle base = generate_phantom(spec);
    std::vector<NodeErrorResult> subjects;
    for (std::uint64_t s = 1; s <= 3; ++s) {
        const PhantomBundle v = perturb_phantom(base, 0.5, s);
        subjects.push_back(node_errors(v.fields, base.fields));
    }
    const auto mnae_n = population_node_errors(subjects);

    SECTION("single subject reproduces its NAE array") {
        const auto single = population_node_errors({subjects[0]});
        CHECK(single[0] == subjects[0].nae[0]);
    }
    SECTION("per-node mean of two subjects") {
        const auto two = population_node_errors({subjects[0], subjects[1]});
        for (std::size_t j = 0; j < two[0].size(); j += 31)
            CHECK_THAT(two[0][j], Catch::Matchers::WithinAbs(
                                      0.5 * (subjects[0].nae[0][j] + subjects[1].nae[0][j]),
                                      1e-12));
    }
    SECTION("aggregation identity: node mean of MNAE_n equals subject mean of MNAE_s") {
        for (int c = 0; c < kErrorChannels; ++c) {
            const double lhs = pairwise_sum(mnae_n[c]) / double(mnae_n[c].size());
            const double rhs = pairwise_sum(subjects.size(), [&](std::size_t s) {
                                   return subjects[s].mnae_s[c];
                               }) / double(subjects.size());
            CHECK_THAT(lhs, Catch::Matchers::WithinRel(rhs, 1e-12));
        }
    }
}

TEST_CASE("bland-altman") {
    SECTION("identical vectors give zeros") {
        const std::vector<double> x{1, 2, 3, 4};
        const auto r = bland_altman(x, x);
        CHECK(r.bias == 0.0);
        CHECK(r.loa_low == 0.0);
        CHECK(r.loa_high == 0.0);
    }
    SECTION("constant offset gives (c, c, c) exactly") {
        const std::vector<double> truth{1, 2, 3, 4, 5, 6, 7, 8};
        std::vector<double> pred = truth;
        const double c = 0.5;  // dyadic, so the sums stay exact
        for (auto& v : pred) v += c;
        const auto r = bland_altman(pred, truth);
        CHECK(r.bias == c);
        CHECK(r.loa_low == c);
        CHECK(r.loa_high == c);
    }
    SECTION("matches the direct formula") {
        Rng rng(91);
        std::vector<double> a(64), b(64);
        for (auto& v : a) v = rng.uniform(-5, 5);
        for (auto& v : b) v = rng.uniform(-5, 5);
        const auto r = bland_altman(a, b);
        double mean = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) mean += a[i] - b[i];
        mean /= double(a.size());
        double var = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double d = a[i] - b[i] - mean;
            var += d * d;
        }
        var /= double(a.size() - 1);
        CHECK_THAT(r.bias, Catch::Matchers::WithinAbs(mean, 1e-12));
        CHECK_THAT(r.loa_high, Catch::Matchers::WithinAbs(mean + 1.96 * std::sqrt(var), 1e-12));
    }
    SECTION("needs at least two samples") {
        CHECK_THROWS_AS(bland_altman({1.0}, {2.0}), Error);
    }
}

TEST_CASE("centerline resampling") {
    SECTION("uniform segment lands on integer stations") {
        Centerline line;
        line.points = {Vec3(0, 0, 0), Vec3(99, 0, 0)};
        const Centerline r = resample_centerline(line, 100);
        REQUIRE(r.points.size() == 100);
        for (int i = 0; i < 100; ++i)
            CHECK_THAT(r.points[i][0], Catch::Matchers::WithinAbs(double(i), 1e-9));
    }
    SECTION("endpoints are reproduced bit-exactly") {
        Centerline line;
        line.points = {Vec3(0.1, 0.2, 0.3), Vec3(1.7, -2.9, 0.4), Vec3(3.3, 1.1, -0.8)};
        const Centerline r = resample_centerline(line, 17);
        CHECK(r.points.front() == line.points.front());
        CHECK(r.points.back() == line.points.back());
    }
    SECTION("arc-length stations match the prefix-sum oracle on an L shape") {
        Centerline line;
        line.points = {Vec3(0, 0, 0), Vec3(50, 0, 0), Vec3(50, 50, 0)};
        const int n = 41;
        const Centerline r = resample_centerline(line, n);
        const double total = 100.0;
        for (int i = 0; i < n; ++i) {
            const double target = total * i / double(n - 1);
            // Oracle: position along the L at arc length `target`.
            const Vec3 expect = target <= 50.0 ? Vec3(target, 0, 0) : Vec3(50, target - 50.0, 0);
            CHECK((r.points[i] - expect).norm() < 1e-12);
        }
    }
    SECTION("zero-length polyline is rejected") {
        Centerline line;
        line.points = {Vec3(1, 1, 1), Vec3(1, 1, 1)};
        CHECK_THROWS_AS(resample_centerline(line, 10), Error);
    }
}

TEST_CASE("centerline profiles") {
    const PhantomBundle bundle = generate_phantom(testsup::quick_spec(500, 13));
    const Centerline line = resample_centerline(bundle.centerlines.front(), 20);

    SECTION("k equal to the node count gives the global mean everywhere") {
        const auto prof =
            centerline_profile(bundle.mesh, bundle.fields, line, int(bundle.mesh.node_count()));
        const double pmean =
            pairwise_sum(bundle.fields.pressure) / double(bundle.fields.pressure.size());
        for (const auto& s : prof) CHECK_THAT(s.pressure, Catch::Matchers::WithinRel(pmean, 1e-9));
    }
    SECTION("constant field gives a constant profile") {
        NodeFields constant = bundle.fields;
        std::fill(constant.pressure.begin(), constant.pressure.end(), 7.25);
        const auto prof = centerline_profile(bundle.mesh, constant, line, 5);
        for (const auto& s : prof) CHECK(s.pressure == 7.25);
    }
    SECTION("matches the brute-force k-NN oracle") {
        const auto prof = centerline_profile(bundle.mesh, bundle.fields, line, 5);
        for (std::size_t i = 0; i < line.points.size(); ++i) {
            std::vector<std::pair<double, int>> d;
            for (std::size_t j = 0; j < bundle.mesh.node_count(); ++j)
                d.emplace_back((bundle.mesh.vertices()[j] - line.points[i]).squaredNorm(), int(j));
            std::sort(d.begin(), d.end());
            double p = 0.0, vmag = 0.0;
            for (int k = 0; k < 5; ++k) {
                p += bundle.fields.pressure[d[k].second];
                vmag += bundle.fields.velocity[d[k].second].norm();
            }
            CHECK(prof[i].pressure == p / 5.0);
            CHECK(prof[i].velocity_magnitude == vmag / 5.0);
        }
    }
    SECTION("k larger than the node count is rejected") {
        CHECK_THROWS_AS(
            centerline_profile(bundle.mesh, bundle.fields, line,
                               int(bundle.mesh.node_count()) + 1),
            Error);
    }
}

TEST_CASE("discrete Frechet distance") {
    using V2 = Eigen::Vector2d;
    SECTION("identical curves give zero") {
        std::vector<V2> a{{0, 0}, {1, 2}, {3, 1}};
        CHECK(frechet_distance(a, a) == 0.0);
    }
    SECTION("parallel offset segments") {
        std::vector<V2> a{{0, 0}, {1, 0}};
        std::vector<V2> b{{0, 1}, {1, 1}};
        CHECK(frechet_distance(a, b) == 1.0);
    }
    SECTION("matches exhaustive coupling enumeration on short curves") {
        Rng rng(101);
        for (int rep = 0; rep < 40; ++rep) {
            const int n = rng.uniform_int(1, 6), m = rng.uniform_int(1, 6);
            std::vector<V2> a(n), b(m);
            for (auto& p : a) p = V2(rng.uniform_int(-3, 3), rng.uniform_int(-3, 3));
            for (auto& p : b) p = V2(rng.uniform_int(-3, 3), rng.uniform_int(-3, 3));
            CHECK(frechet_distance(a, b) == oracle::frechet_brute(a, b));
        }
    }
    SECTION("symmetry, endpoint lower bound, triangle inequality") {
        Rng rng(102);
        for (int rep = 0; rep < 20; ++rep) {
            auto curve = [&](int n) {
                std::vector<V2> c(n);
                for (auto& p : c) p = V2(rng.uniform(-4, 4), rng.uniform(-4, 4));
                return c;
            };
            const auto a = curve(rng.uniform_int(2, 8));
            const auto b = curve(rng.uniform_int(2, 8));
            const auto c = curve(rng.uniform_int(2, 8));
            const double ab = frechet_distance(a, b);
            CHECK(ab == frechet_distance(b, a));
            CHECK(ab >= (a.front() - b.front()).norm() - 1e-15);
            CHECK(ab >= (a.back() - b.back()).norm() - 1e-15);
            CHECK(ab <= frechet_distance(a, c) + frechet_distance(c, b) + 1e-12);
        }
    }
    SECTION("normalized variant divides by the range in percent") {
        std::vector<V2> a{{0, 0}, {1, 0}};
        std::vector<V2> b{{0, 2}, {1, 2}};
        CHECK(frechet_normalized(a, b, 10.0) == 20.0);
        CHECK_THROWS_AS(frechet_normalized(a, b, 0.0), Error);
    }
    SECTION("empty curves are rejected") {
        CHECK_THROWS_AS(frechet_distance({}, {{0.0, 0.0}}), Error);
    }
}

TEST_CASE("wilcoxon signed-rank test") {
    SECTION("all-equal pairs drop every difference") {
        const std::vector<double> x{1, 2, 3};
        const auto r = wilcoxon_signed_rank(x, x);
        CHECK(r.n_effective == 0);
        CHECK(r.p == 1.0);
    }
    SECTION("five positive differences give the exact textbook p") {
        const std::vector<double> a{2, 3, 4, 5, 6};
        const std::vector<double> b{1, 1, 1, 1, 1};
        const auto r = wilcoxon_signed_rank(a, b);
        CHECK(r.w == 0.0);
        CHECK(r.p == 0.0625);
    }
    SECTION("matches 2^n enumeration for n <= 10, including ties") {
        Rng rng(111);
        for (int rep = 0; rep < 30; ++rep) {
            const int n = rng.uniform_int(2, 10);
            std::vector<double> a(n), b(n);
            for (int i = 0; i < n; ++i) {
                a[i] = rng.uniform_int(-4, 4);  // integer-valued => frequent ties
                b[i] = rng.uniform_int(-4, 4);
            }
            const auto r = wilcoxon_signed_rank(a, b);
            if (r.n_effective == 0) {
                CHECK(r.p == 1.0);
                continue;
            }
            const auto ranks = oracle::signed_rank_ranks(a, b);
            CHECK_THAT(r.p, Catch::Matchers::WithinAbs(oracle::wilcoxon_brute_p(ranks, r.w),
                                                       1e-12));
        }
    }
    SECTION("normal approximation for larger n is a sane two-sided p") {
        Rng rng(112);
        std::vector<double> a(40), b(40);
        for (int i = 0; i < 40; ++i) {
            b[i] = rng.uniform(-1, 1);
            a[i] = b[i] + rng.uniform(-0.5, 1.5);  // biased positive
        }
        const auto r = wilcoxon_signed_rank(a, b);
        CHECK(r.p > 0.0);
        CHECK(r.p <= 1.0);
        CHECK(r.n_effective > 10);
    }
    SECTION("length mismatch is rejected") {
        CHECK_THROWS_AS(wilcoxon_signed_rank({1.0}, {1.0, 2.0}), Error);
    }
}
