#pragma once

#include "dismesh/mesh.hpp"

#include <vector>

namespace dismesh {

// Ordered one-ring connectivity. Rings are counterclockwise with respect to
// outward face normals. Closed fans start at the lowest-index neighbor; open
// fans start at the boundary neighbor that has no predecessor, so the walk is
// a single run. Deterministic for a fixed faces array.
struct Adjacency {
    std::vector<std::vector<int>> one_ring;
    // e_ij = v_j - v_i, aligned with one_ring, taken from the construction mesh
    std::vector<std::vector<Eigen::Vector3d>> incident_edges;
    std::vector<bool> boundary;

    int vertex_count() const { return static_cast<int>(one_ring.size()); }
};

// Throws MeshError for non-manifold input: an edge shared by more than two
// faces (offending edges listed), inconsistent winding, or a vertex whose
// incident faces do not form a single fan.
Adjacency build_adjacency(const Mesh& mesh);

}  // namespace dismesh
