#pragma once

#include "dismesh/mesh.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <cstdint>
#include <string>
#include <vector>

namespace dismesh {

class HierarchyError : public MeshError {
public:
    using MeshError::MeshError;
};

// Multiresolution stack built by quadric-error edge collapse. down_ops[k]
// maps per-vertex features from level k to level k+1 (selection rows),
// up_ops[k] maps them back (barycentric rows). All operator rows are
// nonnegative and sum to one.
struct MeshHierarchy {
    std::vector<Mesh> levels;  // fine to coarse
    std::vector<Eigen::SparseMatrix<double>> down_ops;
    std::vector<Eigen::SparseMatrix<double>> up_ops;

    int num_levels() const { return static_cast<int>(levels.size()); }
};

// Minimizer of the pooled quadric pair over collapse positions. Falls back to
// the best of the two endpoints and the midpoint when the quadric's 3x3 block
// has condition number above 1e12.
struct CollapseCandidate {
    double cost;
    Eigen::Vector3d position;
};
CollapseCandidate edge_collapse_cost(const Eigen::Matrix4d& qa, const Eigen::Matrix4d& qb,
                                     const Eigen::Vector3d& pa, const Eigen::Vector3d& pb);

// Per-vertex accumulation of face-plane quadrics, with a 1e3-weighted
// perpendicular-plane penalty on boundary edges.
std::vector<Eigen::Matrix4d> vertex_quadrics(const Mesh& mesh);

MeshHierarchy build_hierarchy(const Mesh& tmpl, int num_levels, double factor);

Eigen::MatrixXd restrict(const Eigen::MatrixXd& features, const MeshHierarchy& hierarchy, int k);
Eigen::MatrixXd prolong(const Eigen::MatrixXd& features, const MeshHierarchy& hierarchy, int k);

// Binary cache, keyed by template hash and build parameters. load returns an
// empty optional-like flag through the bool; contents untouched on mismatch.
void save_hierarchy(const MeshHierarchy& hierarchy, const std::string& path,
                    std::uint64_t template_hash, int num_levels, double factor);
bool load_hierarchy(const std::string& path, std::uint64_t template_hash, int num_levels,
                    double factor, MeshHierarchy* out);

std::uint64_t mesh_content_hash(const Mesh& mesh);

}  // namespace dismesh
