#include "dismesh/arap.hpp"

#include "dismesh/rng.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>
#include <deque>

namespace dismesh {

namespace {

std::vector<std::vector<double>> uniform_weights(const Adjacency& adj) {
    std::vector<std::vector<double>> w(adj.one_ring.size());
    for (std::size_t i = 0; i < adj.one_ring.size(); ++i) {
        w[i].assign(adj.one_ring[i].size(), 1.0);
    }
    return w;
}

// (cot(alpha) + cot(beta)) / 2 over the angles opposite each edge, clamped
// positive so the weight invariant holds on obtuse meshes.
std::vector<std::vector<double>> cotangent_weights(const Mesh& mesh, const Adjacency& adj) {
    const double kMinWeight = 1e-6;
    std::vector<std::vector<double>> w(adj.one_ring.size());
    std::vector<std::vector<double>> acc(adj.one_ring.size());
    for (std::size_t i = 0; i < adj.one_ring.size(); ++i) {
        acc[i].assign(adj.one_ring[i].size(), 0.0);
    }
    auto slot = [&](int i, int j) -> double* {
        const auto& ring = adj.one_ring[static_cast<std::size_t>(i)];
        for (std::size_t s = 0; s < ring.size(); ++s) {
            if (ring[s] == j) return &acc[static_cast<std::size_t>(i)][s];
        }
        return nullptr;
    };
    for (int f = 0; f < mesh.face_count(); ++f) {
        for (int c = 0; c < 3; ++c) {
            const int k = mesh.faces(f, c);
            const int i = mesh.faces(f, (c + 1) % 3);
            const int j = mesh.faces(f, (c + 2) % 3);
            Eigen::Vector3d a = (mesh.vertices.row(i) - mesh.vertices.row(k)).transpose();
            Eigen::Vector3d b = (mesh.vertices.row(j) - mesh.vertices.row(k)).transpose();
            const double cross = a.cross(b).norm();
            const double cot = cross > 1e-300 ? a.dot(b) / cross : 0.0;
            if (double* s = slot(i, j)) *s += 0.5 * cot;
            if (double* s = slot(j, i)) *s += 0.5 * cot;
        }
    }
    for (std::size_t i = 0; i < acc.size(); ++i) {
        w[i].resize(acc[i].size());
        for (std::size_t s = 0; s < acc[i].size(); ++s) {
            w[i][s] = std::max(acc[i][s], kMinWeight);
        }
    }
    return w;
}

std::vector<int> label_components(const Adjacency& adj, int* num_components) {
    const int n = adj.vertex_count();
    std::vector<int> label(static_cast<std::size_t>(n), -1);
    int next = 0;
    for (int seed = 0; seed < n; ++seed) {
        if (label[static_cast<std::size_t>(seed)] != -1) continue;
        std::deque<int> queue{seed};
        label[static_cast<std::size_t>(seed)] = next;
        while (!queue.empty()) {
            int v = queue.front();
            queue.pop_front();
            for (int j : adj.one_ring[static_cast<std::size_t>(v)]) {
                if (label[static_cast<std::size_t>(j)] == -1) {
                    label[static_cast<std::size_t>(j)] = next;
                    queue.push_back(j);
                }
            }
        }
        ++next;
    }
    *num_components = next;
    return label;
}

void check_anchor_coverage(const std::vector<int>& component, int num_components,
                           const std::vector<std::pair<int, Eigen::Vector3d>>& anchors) {
    std::vector<bool> covered(static_cast<std::size_t>(num_components), false);
    for (const auto& [v, _] : anchors) covered[static_cast<std::size_t>(component[static_cast<std::size_t>(v)])] = true;
    for (int c = 0; c < num_components; ++c) {
        if (!covered[static_cast<std::size_t>(c)]) {
            int witness = -1;
            for (std::size_t v = 0; v < component.size(); ++v) {
                if (component[v] == c) { witness = static_cast<int>(v); break; }
            }
            throw ArapError("singular system: connected component " + std::to_string(c) +
                            " (containing vertex " + std::to_string(witness) + ") has no anchor");
        }
    }
}

void validate_problem(const ArapProblem& problem) {
    if (!problem.source || !problem.adjacency) throw ArapError("problem missing source or adjacency");
    if (problem.anchors.empty()) throw ArapError("at least one anchor is required");
    const int n = problem.source->vertex_count();
    for (const auto& [v, _] : problem.anchors) {
        if (v < 0 || v >= n) throw ArapError("anchor vertex index out of range");
    }
}

// Laplacian with anchor rows and columns replaced by identity, plus the
// matching right-hand side. The triplet structure is identical for every
// anchor set (zeroed entries stay as explicit zeros).
void assemble_system(const ArapProblem& problem, const RotationField& rotations,
                     std::vector<Eigen::Triplet<double>>* triplets, Eigen::MatrixX3d* rhs) {
    const Mesh& src = *problem.source;
    const Adjacency& adj = *problem.adjacency;
    const int n = src.vertex_count();
    std::vector<char> is_anchor(static_cast<std::size_t>(n), 0);
    Eigen::MatrixX3d anchor_pos = Eigen::MatrixX3d::Zero(n, 3);
    for (const auto& [v, p] : problem.anchors) {
        is_anchor[static_cast<std::size_t>(v)] = 1;
        anchor_pos.row(v) = p.transpose();
    }
    triplets->clear();
    triplets->reserve(static_cast<std::size_t>(n) * 8);
    rhs->setZero(n, 3);
    for (int i = 0; i < n; ++i) {
        const auto& ring = adj.one_ring[static_cast<std::size_t>(i)];
        const auto& wi = problem.weights[static_cast<std::size_t>(i)];
        if (is_anchor[static_cast<std::size_t>(i)]) {
            triplets->emplace_back(i, i, 1.0);
            for (int j : ring) triplets->emplace_back(i, j, 0.0);
            rhs->row(i) = anchor_pos.row(i);
            continue;
        }
        double diag = 0.0;
        Eigen::Vector3d b = Eigen::Vector3d::Zero();
        for (std::size_t s = 0; s < ring.size(); ++s) {
            const int j = ring[s];
            const double w = wi[s];
            diag += w;
            Eigen::Vector3d eij = (src.vertices.row(i) - src.vertices.row(j)).transpose();
            b += 0.5 * w *
                 ((rotations[static_cast<std::size_t>(i)] + rotations[static_cast<std::size_t>(j)]) * eij);
            if (is_anchor[static_cast<std::size_t>(j)]) {
                triplets->emplace_back(i, j, 0.0);
                b += w * anchor_pos.row(j).transpose();
            } else {
                triplets->emplace_back(i, j, -w);
            }
        }
        triplets->emplace_back(i, i, diag);
        rhs->row(i) = b.transpose();
    }
}

Mesh run_solve(const ArapProblem& problem, const RotationField& rotations,
               Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>* cached) {
    validate_problem(problem);
    const Mesh& src = *problem.source;
    const int n = src.vertex_count();
    if (static_cast<int>(rotations.size()) != n) throw ArapError("rotation field size mismatch");

    int num_components = 0;
    std::vector<int> component = label_components(*problem.adjacency, &num_components);
    check_anchor_coverage(component, num_components, problem.anchors);

    std::vector<Eigen::Triplet<double>> triplets;
    Eigen::MatrixX3d rhs;
    assemble_system(problem, rotations, &triplets, &rhs);
    Eigen::SparseMatrix<double> system(n, n);
    system.setFromTriplets(triplets.begin(), triplets.end());

    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> local;
    auto* solver = cached ? cached : &local;
    if (!cached) solver->analyzePattern(system);
    solver->factorize(system);
    if (solver->info() != Eigen::Success) throw ArapError("factorization failed");

    Eigen::MatrixX3d x = solver->solve(rhs);
    const double bnorm = rhs.norm();
    if (bnorm > 0.0) {
        double rel = (system * x - rhs).norm() / bnorm;
        if (rel > 1e-8) {
            x += solver->solve(rhs - system * x);  // one refinement step
            rel = (system * x - rhs).norm() / bnorm;
            if (rel > 1e-8) throw ArapError("position solve did not converge");
        }
    }

    Mesh out = src;
    out.vertices = x;
    // anchors are pinned by construction; reassert exactly against roundoff
    for (const auto& [v, p] : problem.anchors) out.vertices.row(v) = p.transpose();
    return out;
}

}  // namespace

ArapProblem make_arap_problem(const Mesh& source, const Adjacency& adjacency,
                              EdgeWeighting weighting,
                              std::vector<std::pair<int, Eigen::Vector3d>> anchors) {
    ArapProblem p;
    p.source = &source;
    p.adjacency = &adjacency;
    p.weights = weighting == EdgeWeighting::Uniform ? uniform_weights(adjacency)
                                                    : cotangent_weights(source, adjacency);
    p.anchors = std::move(anchors);
    return p;
}

Eigen::Matrix3d fit_rotation(std::span<const Eigen::Vector3d> edges,
                             std::span<const Eigen::Vector3d> deformed_edges,
                             std::span<const double> weights) {
    Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();
    for (std::size_t s = 0; s < edges.size(); ++s) {
        covariance += weights[s] * edges[s] * deformed_edges[s].transpose();
    }
    if (!(covariance.norm() > 0.0)) throw ArapError("degenerate cell");
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(covariance, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d u = svd.matrixU();
    Eigen::Matrix3d v = svd.matrixV();
    Eigen::Matrix3d r = v * u.transpose();
    if (r.determinant() < 0.0) {
        v.col(2) = -v.col(2);  // singular values are sorted descending
        r = v * u.transpose();
    }
    return r;
}

RotationField fit_rotations(const ArapProblem& problem, const Mesh& deformed) {
    const Mesh& src = *problem.source;
    const Adjacency& adj = *problem.adjacency;
    if (deformed.topology_id != src.topology_id) throw ArapError("topology mismatch");
    const int n = src.vertex_count();
    RotationField rotations(static_cast<std::size_t>(n));
    std::vector<Eigen::Vector3d> e, et;
    for (int i = 0; i < n; ++i) {
        const auto& ring = adj.one_ring[static_cast<std::size_t>(i)];
        e.clear();
        et.clear();
        for (int j : ring) {
            e.emplace_back((src.vertices.row(j) - src.vertices.row(i)).transpose());
            et.emplace_back((deformed.vertices.row(j) - deformed.vertices.row(i)).transpose());
        }
        rotations[static_cast<std::size_t>(i)] =
            fit_rotation(e, et, problem.weights[static_cast<std::size_t>(i)]);
    }
    return rotations;
}

double arap_energy(const ArapProblem& problem, const Mesh& deformed,
                   const RotationField& rotations) {
    const Mesh& src = *problem.source;
    const Adjacency& adj = *problem.adjacency;
    if (deformed.topology_id != src.topology_id) throw ArapError("topology mismatch");
    double energy = 0.0;
    for (int i = 0; i < src.vertex_count(); ++i) {
        const auto& ring = adj.one_ring[static_cast<std::size_t>(i)];
        const auto& wi = problem.weights[static_cast<std::size_t>(i)];
        for (std::size_t s = 0; s < ring.size(); ++s) {
            const int j = ring[s];
            Eigen::Vector3d e = (src.vertices.row(j) - src.vertices.row(i)).transpose();
            Eigen::Vector3d et = (deformed.vertices.row(j) - deformed.vertices.row(i)).transpose();
            energy += wi[s] * (et - rotations[static_cast<std::size_t>(i)] * e).squaredNorm();
        }
    }
    return energy;
}

Mesh solve_positions(const ArapProblem& problem, const RotationField& rotations) {
    return run_solve(problem, rotations, nullptr);
}

ArapSolver::ArapSolver(const Mesh& reference, const Adjacency& adjacency, EdgeWeighting weighting)
    : adjacency_(&adjacency) {
    weights_ = weighting == EdgeWeighting::Uniform ? uniform_weights(adjacency)
                                                   : cotangent_weights(reference, adjacency);
    component_ = label_components(adjacency, &num_components_);

    const int n = adjacency.vertex_count();
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(n) * 8);
    for (int i = 0; i < n; ++i) {
        triplets.emplace_back(i, i, 1.0);
        for (int j : adjacency.one_ring[static_cast<std::size_t>(i)]) {
            triplets.emplace_back(i, j, -0.1);
        }
    }
    pattern_.resize(n, n);
    pattern_.setFromTriplets(triplets.begin(), triplets.end());
    ldlt_.analyzePattern(pattern_);
}

Mesh ArapSolver::solve(const ArapProblem& problem, const RotationField& rotations) const {
    return run_solve(problem, rotations, &ldlt_);
}

Mesh ArapSolver::deform(const Mesh& source, const Mesh& target_guess, double anchor_fraction,
                        int iterations, std::uint64_t seed) const {
    if (source.topology_id != target_guess.topology_id) throw ArapError("topology mismatch");
    if (!(anchor_fraction > 0.0) || anchor_fraction > 1.0) {
        throw ArapError("anchor fraction must be in (0, 1]");
    }
    const int n = source.vertex_count();
    const int num_anchors = std::min(n, static_cast<int>(std::ceil(anchor_fraction * n)));
    Rng rng(seed);
    std::vector<int> picks = rng.sample_without_replacement(n, num_anchors);
    ArapProblem problem;
    problem.source = &source;
    problem.adjacency = adjacency_;
    problem.weights = weights_;
    problem.anchors.reserve(picks.size());
    for (int v : picks) {
        problem.anchors.emplace_back(v, target_guess.vertices.row(v).transpose());
    }
    Mesh deformed = target_guess;
    for (int it = 0; it < iterations; ++it) {
        RotationField rotations = fit_rotations(problem, deformed);
        deformed = solve(problem, rotations);
    }
    return deformed;
}

Mesh arap_deform(const Mesh& source, const Mesh& target_guess, const ArapConfig& config,
                 std::uint64_t seed) {
    Adjacency adjacency = build_adjacency(source);
    ArapSolver solver(source, adjacency, config.weighting);
    return solver.deform(source, target_guess, config.anchor_fraction, config.iterations, seed);
}

}  // namespace dismesh
