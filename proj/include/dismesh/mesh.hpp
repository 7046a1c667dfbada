#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace dismesh {

using VertexMatrix = Eigen::Matrix<double, Eigen::Dynamic, 3>;
using FaceMatrix = Eigen::Matrix<int, Eigen::Dynamic, 3>;

class MeshError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Triangle mesh with fixed connectivity. Meshes that share a topology_id are
// guaranteed to have identical faces and vertex count, so per-vertex data is
// in correspondence across them.
struct Mesh {
    VertexMatrix vertices;
    FaceMatrix faces;
    std::string topology_id;

    int vertex_count() const { return static_cast<int>(vertices.rows()); }
    int face_count() const { return static_cast<int>(faces.rows()); }
};

std::string compute_topology_id(int vertex_count, const FaceMatrix& faces);

// Validates face indices (in range, three distinct per face) and assigns the
// topology token. Throws MeshError on violation.
Mesh make_mesh(VertexMatrix vertices, FaceMatrix faces);

Eigen::RowVector3d centroid(const Mesh& mesh);

// Translates vertices so the centroid is at the origin. Faces are untouched.
Mesh center(const Mesh& mesh);

double bounding_box_diagonal(const Mesh& mesh);

// 64-bit FNV-1a, used for topology tokens and content fingerprints.
std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed = 0xCBF29CE484222325ULL);

}  // namespace dismesh
