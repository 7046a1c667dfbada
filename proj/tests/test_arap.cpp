#include "dismesh/arap.hpp"

#include "so3_grid_oracle.hpp"
#include "test_helpers.hpp"

#include <doctest.h>

#include <Eigen/Geometry>

#include <cmath>

using namespace dismesh;

namespace {

std::vector<std::pair<int, Eigen::Vector3d>> anchors_at(const Mesh& mesh,
                                                        const std::vector<int>& ids) {
    std::vector<std::pair<int, Eigen::Vector3d>> out;
    for (int v : ids) out.emplace_back(v, mesh.vertices.row(v).transpose());
    return out;
}

struct RandomCell {
    std::vector<Eigen::Vector3d> edges, deformed;
    std::vector<double> weights;
};

RandomCell make_noisy_cell(Rng& rng, double noise) {
    RandomCell cell;
    const int count = 4 + static_cast<int>(rng.uniform_index(5));
    Eigen::Matrix3d r =
        (Eigen::AngleAxisd(rng.uniform(-M_PI, M_PI), Eigen::Vector3d::UnitZ()) *
         Eigen::AngleAxisd(rng.uniform(0, M_PI), Eigen::Vector3d::UnitY()) *
         Eigen::AngleAxisd(rng.uniform(-M_PI, M_PI), Eigen::Vector3d::UnitX()))
            .toRotationMatrix();
    for (int i = 0; i < count; ++i) {
        Eigen::Vector3d e(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
        Eigen::Vector3d u(rng.uniform(-noise, noise), rng.uniform(-noise, noise),
                          rng.uniform(-noise, noise));
        cell.edges.push_back(e);
        cell.deformed.push_back(r * e + u);
        cell.weights.push_back(1.0);
    }
    return cell;
}

}  // namespace

TEST_CASE("fit_rotation: identity when deformed edges equal rest edges") {
    std::vector<Eigen::Vector3d> e = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 1, 0}};
    std::vector<double> w(e.size(), 1.0);
    Eigen::Matrix3d r = fit_rotation(e, e, w);
    CHECK((r - Eigen::Matrix3d::Identity()).norm() <= 1e-12);
}

TEST_CASE("fit_rotation: exact rigid case recovers the rotation") {
    Eigen::Matrix3d rot =
        Eigen::AngleAxisd(M_PI / 2, Eigen::Vector3d::UnitZ()).toRotationMatrix();
    std::vector<Eigen::Vector3d> e = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    std::vector<Eigen::Vector3d> d;
    for (const auto& x : e) d.push_back(rot * x);
    std::vector<double> w(e.size(), 1.0);
    Eigen::Matrix3d r = fit_rotation(e, d, w);
    CHECK((r - rot).norm() <= 1e-9);
}

TEST_CASE("fit_rotation: all-zero cell throws") {
    std::vector<Eigen::Vector3d> e = {{0, 0, 0}, {0, 0, 0}};
    std::vector<double> w(e.size(), 1.0);
    CHECK_THROWS_WITH_AS(fit_rotation(e, e, w), doctest::Contains("degenerate cell"), ArapError);
}

TEST_CASE("fit_rotation: orthogonal with determinant +1 on random cells") {
    Rng rng(2024);
    for (int trial = 0; trial < 50; ++trial) {
        RandomCell cell = make_noisy_cell(rng, 0.05);
        Eigen::Matrix3d r = fit_rotation(cell.edges, cell.deformed, cell.weights);
        CHECK((r.transpose() * r - Eigen::Matrix3d::Identity()).norm() <= 1e-6);
        CHECK(r.determinant() == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("fit_rotation: beats a 3-degree SO(3) grid on noisy cells") {
    testutil::So3Grid grid(3.0);
    Rng rng(77);
    for (int trial = 0; trial < 5; ++trial) {
        RandomCell cell = make_noisy_cell(rng, 0.01);
        Eigen::Matrix3d fitted = fit_rotation(cell.edges, cell.deformed, cell.weights);
        Eigen::Matrix3d gridded = grid.best_rotation(cell.edges, cell.deformed, cell.weights);
        const double ef = testutil::cell_energy_direct(cell.edges, cell.deformed, cell.weights, fitted);
        const double eg = testutil::cell_energy_direct(cell.edges, cell.deformed, cell.weights, gridded);
        CHECK(ef <= eg + 1e-9);
    }
}

TEST_CASE("arap_energy: zero for identity and for a global rigid motion") {
    Mesh grid = testutil::make_grid(5, 5);
    Adjacency adj = build_adjacency(grid);
    ArapProblem problem =
        make_arap_problem(grid, adj, EdgeWeighting::Uniform, anchors_at(grid, {0}));
    RotationField identity(static_cast<std::size_t>(grid.vertex_count()),
                           Eigen::Matrix3d::Identity());
    CHECK(arap_energy(problem, grid, identity) == 0.0);

    Eigen::Matrix3d rot = Eigen::AngleAxisd(0.7, Eigen::Vector3d(1, 2, 3).normalized()).toRotationMatrix();
    Mesh moved = grid;
    moved.vertices = (grid.vertices * rot.transpose()).rowwise() + Eigen::RowVector3d(1, -2, 0.5);
    RotationField field(static_cast<std::size_t>(grid.vertex_count()), rot);
    CHECK(arap_energy(problem, moved, field) <= 1e-10);
}

TEST_CASE("arap_energy: single displaced vertex expands to 2 * sum |delta e|^2") {
    Mesh grid = testutil::make_grid(5, 5);
    Adjacency adj = build_adjacency(grid);
    ArapProblem problem =
        make_arap_problem(grid, adj, EdgeWeighting::Uniform, anchors_at(grid, {0}));
    const int moved_vertex = 2 + 5 * 2;
    const Eigen::RowVector3d d(0.25, 0, 0);  // along an incident edge direction
    Mesh deformed = grid;
    deformed.vertices.row(moved_vertex) += d;
    RotationField identity(static_cast<std::size_t>(grid.vertex_count()),
                           Eigen::Matrix3d::Identity());
    // every incident edge changes by d in one cell and by -d in the neighbor cell
    const double degree = static_cast<double>(adj.one_ring[moved_vertex].size());
    const double expected = 2.0 * degree * d.squaredNorm();
    CHECK(arap_energy(problem, deformed, identity) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("arap_energy: topology mismatch is rejected") {
    Mesh grid = testutil::make_grid(4, 4);
    Mesh other = testutil::make_grid(5, 4);
    Adjacency adj = build_adjacency(grid);
    ArapProblem problem =
        make_arap_problem(grid, adj, EdgeWeighting::Uniform, anchors_at(grid, {0}));
    RotationField identity(static_cast<std::size_t>(grid.vertex_count()),
                           Eigen::Matrix3d::Identity());
    CHECK_THROWS_AS(arap_energy(problem, other, identity), ArapError);
}

TEST_CASE("solve_positions: all vertices anchored reproduces the source") {
    Mesh grid = testutil::make_grid(4, 4);
    Adjacency adj = build_adjacency(grid);
    std::vector<int> all(static_cast<std::size_t>(grid.vertex_count()));
    for (int i = 0; i < grid.vertex_count(); ++i) all[static_cast<std::size_t>(i)] = i;
    ArapProblem problem =
        make_arap_problem(grid, adj, EdgeWeighting::Uniform, anchors_at(grid, all));
    RotationField identity(static_cast<std::size_t>(grid.vertex_count()),
                           Eigen::Matrix3d::Identity());
    Mesh out = solve_positions(problem, identity);
    CHECK((out.vertices - grid.vertices).lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("solve_positions: global rotation with two anchors") {
    Mesh grid = testutil::make_grid(5, 4);
    Adjacency adj = build_adjacency(grid);
    Eigen::Matrix3d rot = Eigen::AngleAxisd(1.1, Eigen::Vector3d(0, 1, 1).normalized()).toRotationMatrix();
    Mesh target = grid;
    target.vertices = grid.vertices * rot.transpose();
    ArapProblem problem =
        make_arap_problem(grid, adj, EdgeWeighting::Uniform, anchors_at(target, {0, 13}));
    RotationField field(static_cast<std::size_t>(grid.vertex_count()), rot);
    Mesh out = solve_positions(problem, field);
    CHECK((out.vertices - target.vertices).lpNorm<Eigen::Infinity>() <= 1e-6);
    // anchors exactly
    CHECK((out.vertices.row(0) - target.vertices.row(0)).norm() == 0.0);
    CHECK((out.vertices.row(13) - target.vertices.row(13)).norm() == 0.0);
}

TEST_CASE("solve_positions: hand-solved single free vertex") {
    Mesh grid = testutil::make_grid(3, 3);
    Adjacency adj = build_adjacency(grid);
    const int free_vertex = 4;  // center
    Rng rng(5);
    Mesh target = grid;
    for (int i = 0; i < grid.vertex_count(); ++i) {
        for (int c = 0; c < 3; ++c) target.vertices(i, c) += rng.uniform(-0.2, 0.2);
    }
    std::vector<int> anchored;
    for (int i = 0; i < grid.vertex_count(); ++i) {
        if (i != free_vertex) anchored.push_back(i);
    }
    ArapProblem problem =
        make_arap_problem(grid, adj, EdgeWeighting::Uniform, anchors_at(target, anchored));
    RotationField field(static_cast<std::size_t>(grid.vertex_count()));
    for (auto& r : field) {
        r = Eigen::AngleAxisd(rng.uniform(-0.5, 0.5), Eigen::Vector3d(rng.uniform(-1, 1), rng.uniform(-1, 1), 1).normalized())
                .toRotationMatrix();
    }
    Mesh out = solve_positions(problem, field);

    const auto& ring = adj.one_ring[free_vertex];
    Eigen::Vector3d acc = Eigen::Vector3d::Zero();
    for (int j : ring) {
        Eigen::Vector3d eij = (grid.vertices.row(free_vertex) - grid.vertices.row(j)).transpose();
        acc += target.vertices.row(j).transpose() +
               0.5 * (field[free_vertex] + field[static_cast<std::size_t>(j)]) * eij;
    }
    Eigen::Vector3d expected = acc / static_cast<double>(ring.size());
    CHECK((out.vertices.row(free_vertex).transpose() - expected).norm() <= 1e-9);
}

TEST_CASE("solve_positions: disconnected component without anchor names the component") {
    VertexMatrix v(6, 3);
    v << 0, 0, 0, 1, 0, 0, 0, 1, 0, 5, 5, 0, 6, 5, 0, 5, 6, 0;
    FaceMatrix f(2, 3);
    f << 0, 1, 2, 3, 4, 5;
    Mesh mesh = make_mesh(v, f);
    Adjacency adj = build_adjacency(mesh);
    ArapProblem problem = make_arap_problem(mesh, adj, EdgeWeighting::Uniform, anchors_at(mesh, {0}));
    RotationField identity(6, Eigen::Matrix3d::Identity());
    CHECK_THROWS_WITH_AS(solve_positions(problem, identity),
                         doctest::Contains("has no anchor"), ArapError);
}

TEST_CASE("arap_deform: fixed point when the target equals the source") {
    Mesh grid = testutil::make_grid(6, 5);
    ArapConfig cfg;
    Mesh out = arap_deform(grid, grid, cfg, 3);
    CHECK((out.vertices - grid.vertices).lpNorm<Eigen::Infinity>() <= 1e-6);
}

TEST_CASE("arap_deform: recovers a rigid motion from 5% anchors in one iteration") {
    Mesh grid = testutil::make_grid(8, 8);
    Eigen::Matrix3d rot = Eigen::AngleAxisd(0.9, Eigen::Vector3d(1, 1, 0).normalized()).toRotationMatrix();
    Mesh target = grid;
    target.vertices = (grid.vertices * rot.transpose()).rowwise() + Eigen::RowVector3d(0.3, 0, -1);
    ArapConfig cfg;
    cfg.anchor_fraction = 0.05;
    cfg.iterations = 1;
    Mesh out = arap_deform(grid, target, cfg, 11);
    const double err = (out.vertices - target.vertices).rowwise().norm().maxCoeff();
    CHECK(err <= 1e-3 * bounding_box_diagonal(grid));
}

TEST_CASE("arap_deform: two iterations do not increase the energy of one") {
    // bent sheet: rotate the right half of a grid about the y axis
    Mesh grid = testutil::make_grid(10, 4);
    Mesh bent = grid;
    Eigen::Matrix3d rot = Eigen::AngleAxisd(0.8, Eigen::Vector3d::UnitY()).toRotationMatrix();
    for (int i = 0; i < grid.vertex_count(); ++i) {
        if (grid.vertices(i, 0) > 4.5) {
            Eigen::Vector3d p = grid.vertices.row(i).transpose();
            Eigen::Vector3d pivot(4.5, p.y(), 0);
            bent.vertices.row(i) = (pivot + rot * (p - pivot)).transpose();
        }
    }
    Adjacency adj = build_adjacency(grid);
    ArapSolver solver(grid, adj, EdgeWeighting::Uniform);
    ArapConfig cfg;
    Mesh one = solver.deform(grid, bent, cfg.anchor_fraction, 1, 21);
    Mesh two = solver.deform(grid, bent, cfg.anchor_fraction, 2, 21);

    Rng rng(21);
    auto picks = rng.sample_without_replacement(grid.vertex_count(),
                                                static_cast<int>(std::ceil(0.05 * grid.vertex_count())));
    ArapProblem problem = make_arap_problem(grid, adj, EdgeWeighting::Uniform, {});
    for (int v : picks) problem.anchors.emplace_back(v, bent.vertices.row(v).transpose());
    const double e1 = arap_energy(problem, one, fit_rotations(problem, one));
    const double e2 = arap_energy(problem, two, fit_rotations(problem, two));
    CHECK(e2 <= e1 + 1e-12);
}

TEST_CASE("arap alternation: energy never increases (random problems)") {
    Rng rng(31337);
    for (int trial = 0; trial < 4; ++trial) {
        Mesh grid = testutil::make_grid(6, 6);
        Mesh guess = grid;
        for (int i = 0; i < grid.vertex_count(); ++i) {
            for (int c = 0; c < 3; ++c) guess.vertices(i, c) += rng.uniform(-0.4, 0.4);
        }
        Adjacency adj = build_adjacency(grid);
        auto picks = rng.sample_without_replacement(grid.vertex_count(), 3);
        ArapProblem problem = make_arap_problem(grid, adj, EdgeWeighting::Uniform, {});
        for (int v : picks) problem.anchors.emplace_back(v, guess.vertices.row(v).transpose());

        Mesh current = guess;
        double prev = arap_energy(problem, current, fit_rotations(problem, current));
        for (int it = 0; it < 3; ++it) {
            RotationField rotations = fit_rotations(problem, current);
            current = solve_positions(problem, rotations);
            const double e = arap_energy(problem, current, fit_rotations(problem, current));
            CHECK(e <= prev + 1e-10);
            prev = e;
        }
    }
}

TEST_CASE("arap_deform: translation invariance") {
    Mesh grid = testutil::make_grid(6, 4);
    Mesh target = grid;
    Rng rng(8);
    for (int i = 0; i < grid.vertex_count(); ++i) {
        for (int c = 0; c < 3; ++c) target.vertices(i, c) += rng.uniform(-0.3, 0.3);
    }
    const Eigen::RowVector3d t(2.5, -1.0, 4.0);
    Mesh grid_t = grid;
    grid_t.vertices.rowwise() += t;
    Mesh target_t = target;
    target_t.vertices.rowwise() += t;

    ArapConfig cfg;
    Mesh a = arap_deform(grid, target, cfg, 99);
    Mesh b = arap_deform(grid_t, target_t, cfg, 99);
    CHECK(((b.vertices.rowwise() - t) - a.vertices).lpNorm<Eigen::Infinity>() <= 1e-9);
}

TEST_CASE("arap_deform: anchors land exactly on the target") {
    Mesh grid = testutil::make_grid(7, 5);
    Mesh target = grid;
    Rng rng(4);
    for (int i = 0; i < grid.vertex_count(); ++i) {
        for (int c = 0; c < 3; ++c) target.vertices(i, c) += rng.uniform(-0.5, 0.5);
    }
    ArapConfig cfg;
    cfg.anchor_fraction = 0.1;
    Mesh out = arap_deform(grid, target, cfg, 123);
    Rng rng2(123);
    auto picks = rng2.sample_without_replacement(
        grid.vertex_count(), static_cast<int>(std::ceil(cfg.anchor_fraction * grid.vertex_count())));
    for (int v : picks) {
        CHECK((out.vertices.row(v) - target.vertices.row(v)).norm() == 0.0);
    }
}

TEST_CASE("cotangent weighting is available and symmetric") {
    Mesh grid = testutil::make_grid(5, 5);
    Adjacency adj = build_adjacency(grid);
    ArapProblem problem =
        make_arap_problem(grid, adj, EdgeWeighting::Cotangent, anchors_at(grid, {0}));
    for (int i = 0; i < grid.vertex_count(); ++i) {
        const auto& ring = adj.one_ring[static_cast<std::size_t>(i)];
        for (std::size_t s = 0; s < ring.size(); ++s) {
            const int j = ring[s];
            CHECK(problem.weights[static_cast<std::size_t>(i)][s] > 0.0);
            const auto& jring = adj.one_ring[static_cast<std::size_t>(j)];
            const auto it = std::find(jring.begin(), jring.end(), i);
            const std::size_t js = static_cast<std::size_t>(it - jring.begin());
            CHECK(problem.weights[static_cast<std::size_t>(i)][s] ==
                  doctest::Approx(problem.weights[static_cast<std::size_t>(j)][js]));
        }
    }
}
