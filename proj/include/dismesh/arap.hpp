#pragma once

#include "dismesh/adjacency.hpp"
#include "dismesh/mesh.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCholesky>

#include <cstdint>
#include <memory>
#include <span>
#include <utility>
#include <vector>

namespace dismesh {

class ArapError : public MeshError {
public:
    using MeshError::MeshError;
};

enum class EdgeWeighting { Uniform, Cotangent };

// Per-vertex cell rotations. Each matrix is orthogonal with det +1.
using RotationField = std::vector<Eigen::Matrix3d>;

// Deformation problem: a source mesh whose cells should move as rigidly as
// possible while a set of anchor vertices is pinned to fixed positions.
struct ArapProblem {
    const Mesh* source = nullptr;
    const Adjacency* adjacency = nullptr;
    std::vector<std::vector<double>> weights;  // aligned with adjacency->one_ring
    std::vector<std::pair<int, Eigen::Vector3d>> anchors;
};

ArapProblem make_arap_problem(const Mesh& source, const Adjacency& adjacency,
                              EdgeWeighting weighting,
                              std::vector<std::pair<int, Eigen::Vector3d>> anchors);

// Optimal cell rotation aligning rest edges with deformed edges: SVD of the
// weighted covariance, determinant corrected by flipping the column paired
// with the smallest singular value. Throws ArapError("degenerate cell") when
// every edge pair is zero.
Eigen::Matrix3d fit_rotation(std::span<const Eigen::Vector3d> edges,
                             std::span<const Eigen::Vector3d> deformed_edges,
                             std::span<const double> weights);

RotationField fit_rotations(const ArapProblem& problem, const Mesh& deformed);

// Total cell energy: sum over vertices i and ring neighbors j of
// w_ij * |deformed_edge_ij - R_i * edge_ij|^2.
double arap_energy(const ArapProblem& problem, const Mesh& deformed,
                   const RotationField& rotations);

// Screened Laplacian solve for the deformed positions given fixed cell
// rotations. Anchor rows are hard identity constraints; anchor positions are
// reproduced exactly. Throws when a connected component contains no anchor.
Mesh solve_positions(const ArapProblem& problem, const RotationField& rotations);

struct ArapConfig {
    double anchor_fraction = 0.05;  // of the vertex count, ceil
    int iterations = 1;
    EdgeWeighting weighting = EdgeWeighting::Uniform;
};

// Reusable per-topology state: adjacency, uniform weights and the symbolic
// Cholesky analysis of the Laplacian pattern. Safe to share immutably, but a
// single instance must not be used from two threads at once (the numeric
// factorization is per call).
class ArapSolver {
public:
    ArapSolver(const Mesh& reference, const Adjacency& adjacency, EdgeWeighting weighting);

    // One or more alternations of rotation fitting and position solving,
    // starting from target_guess, with ceil(fraction*N) random anchors pinned
    // at target_guess positions. Deterministic per seed.
    Mesh deform(const Mesh& source, const Mesh& target_guess, double anchor_fraction,
                int iterations, std::uint64_t seed) const;

    Mesh solve(const ArapProblem& problem, const RotationField& rotations) const;

    const Adjacency& adjacency() const { return *adjacency_; }
    const std::vector<std::vector<double>>& weights() const { return weights_; }

private:
    const Adjacency* adjacency_;
    std::vector<std::vector<double>> weights_;
    std::vector<int> component_;  // connected component label per vertex
    int num_components_ = 0;
    Eigen::SparseMatrix<double> pattern_;  // Laplacian sparsity, values rewritten per call
    mutable Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;  // symbolic part cached
};

// Convenience wrapper that builds the solver state on the fly.
Mesh arap_deform(const Mesh& source, const Mesh& target_guess, const ArapConfig& config,
                 std::uint64_t seed);

}  // namespace dismesh
