#include "dismesh/hierarchy.hpp"

#include "test_helpers.hpp"

#include <doctest.h>

#include <Eigen/Dense>

#include <fstream>

using namespace dismesh;

namespace {

std::string read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void check_row_stochastic(const Eigen::SparseMatrix<double>& op) {
    Eigen::VectorXd sums = Eigen::VectorXd::Zero(op.rows());
    for (int k = 0; k < op.outerSize(); ++k) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(op, k); it; ++it) {
            CHECK(it.value() >= 0.0);
            sums[it.row()] += it.value();
        }
    }
    for (Eigen::Index r = 0; r < sums.size(); ++r) {
        CHECK(sums[r] == doctest::Approx(1.0).epsilon(1e-6));
    }
}

}  // namespace

TEST_CASE("hierarchy: one level keeps the template and no operators") {
    Mesh sphere = testutil::make_icosphere(2);
    MeshHierarchy h = build_hierarchy(sphere, 1, 4.0);
    REQUIRE(h.num_levels() == 1);
    CHECK(h.levels[0].vertices == sphere.vertices);
    CHECK(h.down_ops.empty());
    CHECK(h.up_ops.empty());
}

TEST_CASE("hierarchy: factor-4 level count band on the 642-vertex sphere") {
    Mesh sphere = testutil::make_icosphere(3);
    REQUIRE(sphere.vertex_count() == 642);
    MeshHierarchy h = build_hierarchy(sphere, 2, 4.0);
    CHECK(h.levels[1].vertex_count() >= 145);
    CHECK(h.levels[1].vertex_count() <= 177);
}

TEST_CASE("hierarchy: operators are row-stochastic and preserve constants") {
    Mesh sphere = testutil::make_icosphere(3);
    MeshHierarchy h = build_hierarchy(sphere, 3, 4.0);
    for (const auto& op : h.down_ops) check_row_stochastic(op);
    for (const auto& op : h.up_ops) check_row_stochastic(op);

    Eigen::MatrixXd ones = Eigen::MatrixXd::Constant(sphere.vertex_count(), 2, 3.5);
    Eigen::MatrixXd coarse = restrict(ones, h, 0);
    CHECK((coarse.array() == 3.5).all());  // selection rows are exact
    Eigen::MatrixXd back = prolong(coarse, h, 0);
    CHECK((back.array() - 3.5).abs().maxCoeff() <= 1e-12);
}

TEST_CASE("hierarchy: down rows select surviving vertices") {
    Mesh sphere = testutil::make_icosphere(2);
    MeshHierarchy h = build_hierarchy(sphere, 2, 4.0);
    const auto& down = h.down_ops[0];
    for (int k = 0; k < down.outerSize(); ++k) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(down, k); it; ++it) {
            CHECK(it.value() == 1.0);
        }
    }
    CHECK(down.nonZeros() == h.levels[1].vertex_count());
}

TEST_CASE("restrict and prolong match a dense oracle") {
    Mesh sphere = testutil::make_icosphere(2);
    MeshHierarchy h = build_hierarchy(sphere, 3, 3.0);
    Rng rng(17);
    for (int k = 0; k < 2; ++k) {
        const Eigen::Index nf = h.down_ops[static_cast<std::size_t>(k)].cols();
        const Eigen::Index nc = h.down_ops[static_cast<std::size_t>(k)].rows();
        Eigen::MatrixXd fine(nf, 4), coarse(nc, 4);
        for (Eigen::Index i = 0; i < nf; ++i) {
            for (int c = 0; c < 4; ++c) fine(i, c) = rng.uniform(-2, 2);
        }
        for (Eigen::Index i = 0; i < nc; ++i) {
            for (int c = 0; c < 4; ++c) coarse(i, c) = rng.uniform(-2, 2);
        }
        Eigen::MatrixXd down_dense = Eigen::MatrixXd(h.down_ops[static_cast<std::size_t>(k)]);
        Eigen::MatrixXd up_dense = Eigen::MatrixXd(h.up_ops[static_cast<std::size_t>(k)]);
        CHECK((restrict(fine, h, k) - down_dense * fine).lpNorm<Eigen::Infinity>() <= 1e-12);
        CHECK((prolong(coarse, h, k) - up_dense * coarse).lpNorm<Eigen::Infinity>() <= 1e-12);
    }
    CHECK_THROWS_AS(restrict(Eigen::MatrixXd::Zero(3, 3), h, 0), HierarchyError);
    CHECK_THROWS_AS(prolong(Eigen::MatrixXd::Zero(3, 3), h, 0), HierarchyError);
}

TEST_CASE("edge_collapse_cost: coplanar quadrics cost zero on the plane") {
    // two vertices on the plane z = 0
    Eigen::Vector4d plane(0, 0, 1, 0);
    Eigen::Matrix4d q = plane * plane.transpose();
    CollapseCandidate c = edge_collapse_cost(q, q, {1, 0, 0}, {0, 1, 0});
    CHECK(c.cost == doctest::Approx(0.0));
    CHECK(std::abs(c.position.z()) <= 1e-12);
}

TEST_CASE("edge_collapse_cost: matches the dense 4x4 oracle on a cube corner") {
    // corner at the origin with faces x=0, y=0, z=0 on one endpoint and
    // x=1, y=0, z=0 style planes on the other
    auto plane_q = [](double a, double b, double c, double d) {
        Eigen::Vector4d p(a, b, c, d);
        return Eigen::Matrix4d(p * p.transpose());
    };
    Eigen::Matrix4d qa = plane_q(1, 0, 0, 0) + plane_q(0, 1, 0, 0) + plane_q(0, 0, 1, 0);
    Eigen::Matrix4d qb = plane_q(1, 0, 0, -1) + plane_q(0, 1, 0, 0) + plane_q(0, 0, 1, 0);
    CollapseCandidate c = edge_collapse_cost(qa, qb, {0, 0, 0}, {1, 0, 0});

    Eigen::Matrix4d q = qa + qb;
    Eigen::Matrix4d solve_mat = q;
    solve_mat.row(3) << 0, 0, 0, 1;
    Eigen::Vector4d opt = solve_mat.inverse() * Eigen::Vector4d(0, 0, 0, 1);
    const double oracle_cost = opt.dot(q * opt);
    CHECK(c.cost == doctest::Approx(oracle_cost).epsilon(1e-9));
    CHECK((c.position - opt.head<3>()).norm() <= 1e-9);
}

TEST_CASE("edge_collapse_cost: singular quadric falls back to the midpoint") {
    Eigen::Vector4d plane(0, 0, 1, -2);
    Eigen::Matrix4d q = plane * plane.transpose();
    CollapseCandidate c = edge_collapse_cost(q, q, {0, 0, 2}, {4, 0, 2});
    CHECK((c.position - Eigen::Vector3d(2, 0, 2)).norm() <= 1e-12);
    CHECK(c.cost == doctest::Approx(0.0));
}

TEST_CASE("vertex quadrics are positive semidefinite") {
    Mesh sphere = testutil::make_icosphere(2);
    auto quadrics = vertex_quadrics(sphere);
    for (const auto& q : quadrics) {
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(q);
        CHECK(eig.eigenvalues().minCoeff() >= -1e-8);
    }
}

TEST_CASE("hierarchy: every level stays manifold") {
    Mesh sphere = testutil::make_icosphere(3);
    MeshHierarchy h = build_hierarchy(sphere, 4, 3.0);
    for (const Mesh& level : h.levels) {
        CHECK_NOTHROW(build_adjacency(level));
    }
    // vertex counts shrink by the factor within +-10%
    for (std::size_t k = 1; k < h.levels.size(); ++k) {
        const double expected = h.levels[k - 1].vertex_count() / 3.0;
        CHECK(h.levels[k].vertex_count() >= static_cast<int>(expected * 0.9) - 1);
        CHECK(h.levels[k].vertex_count() <= static_cast<int>(expected * 1.1) + 1);
    }
}

TEST_CASE("hierarchy: open-boundary templates decimate cleanly") {
    Mesh grid = testutil::make_grid(12, 12);
    MeshHierarchy h = build_hierarchy(grid, 3, 3.0);
    for (const auto& op : h.down_ops) check_row_stochastic(op);
    for (const auto& op : h.up_ops) check_row_stochastic(op);
    CHECK_NOTHROW(build_adjacency(h.levels[2]));
}

TEST_CASE("hierarchy: deterministic and serializable") {
    testutil::TempDir dir("hier");
    Mesh sphere = testutil::make_icosphere(2);
    const std::uint64_t key = mesh_content_hash(sphere);
    MeshHierarchy a = build_hierarchy(sphere, 3, 4.0);
    MeshHierarchy b = build_hierarchy(sphere, 3, 4.0);
    save_hierarchy(a, dir.file("a.bin"), key, 3, 4.0);
    save_hierarchy(b, dir.file("b.bin"), key, 3, 4.0);
    CHECK(read_bytes(dir.file("a.bin")) == read_bytes(dir.file("b.bin")));

    MeshHierarchy loaded;
    REQUIRE(load_hierarchy(dir.file("a.bin"), key, 3, 4.0, &loaded));
    CHECK(loaded.num_levels() == a.num_levels());
    CHECK(loaded.levels[2].vertices == a.levels[2].vertices);
    CHECK(Eigen::MatrixXd(loaded.up_ops[1]) == Eigen::MatrixXd(a.up_ops[1]));

    // wrong cache key is rejected
    CHECK_FALSE(load_hierarchy(dir.file("a.bin"), key + 1, 3, 4.0, &loaded));
    CHECK_FALSE(load_hierarchy(dir.file("a.bin"), key, 4, 4.0, &loaded));
}
