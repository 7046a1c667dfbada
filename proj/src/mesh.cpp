#include "dismesh/mesh.hpp"

#include <cstdio>

namespace dismesh {

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < size; ++i) {
        h ^= p[i];
        h *= 0x100000001B3ULL;
    }
    return h;
}

std::string compute_topology_id(int vertex_count, const FaceMatrix& faces) {
    std::uint64_t h = fnv1a(&vertex_count, sizeof(vertex_count));
    // FaceMatrix is column-major and dense, hashing raw storage is stable
    h = fnv1a(faces.data(), sizeof(int) * static_cast<std::size_t>(faces.size()), h);
    char buf[20];
    std::snprintf(buf, sizeof(buf), "t%016llx", static_cast<unsigned long long>(h));
    return buf;
}

Mesh make_mesh(VertexMatrix vertices, FaceMatrix faces) {
    const int n = static_cast<int>(vertices.rows());
    for (int f = 0; f < faces.rows(); ++f) {
        const int a = faces(f, 0), b = faces(f, 1), c = faces(f, 2);
        if (a < 0 || a >= n || b < 0 || b >= n || c < 0 || c >= n) {
            throw MeshError("face " + std::to_string(f) + ": vertex index out of range");
        }
        if (a == b || b == c || a == c) {
            throw MeshError("face " + std::to_string(f) + ": degenerate (repeated vertex index)");
        }
    }
    Mesh mesh;
    mesh.topology_id = compute_topology_id(n, faces);
    mesh.vertices = std::move(vertices);
    mesh.faces = std::move(faces);
    return mesh;
}

Eigen::RowVector3d centroid(const Mesh& mesh) {
    if (mesh.vertices.rows() == 0) return Eigen::RowVector3d::Zero();
    return mesh.vertices.colwise().mean();
}

Mesh center(const Mesh& mesh) {
    Mesh out = mesh;
    out.vertices.rowwise() -= centroid(mesh);
    return out;
}

double bounding_box_diagonal(const Mesh& mesh) {
    if (mesh.vertices.rows() == 0) return 0.0;
    Eigen::RowVector3d lo = mesh.vertices.colwise().minCoeff();
    Eigen::RowVector3d hi = mesh.vertices.colwise().maxCoeff();
    return (hi - lo).norm();
}

}  // namespace dismesh
