#pragma once

#include "dismesh/adjacency.hpp"
#include "dismesh/mesh.hpp"

#include <vector>

namespace dismesh {

// Fixed-length per-vertex index sequences: the vertex itself, then its
// one-ring in fan order, then successive rings. Sequences shorter than
// `length` are padded with kSpiralPad.
struct SpiralSet {
    static constexpr int kSpiralPad = -1;

    int num_vertices = 0;
    int length = 0;
    std::vector<int> indices;  // row-major, num_vertices * length

    int at(int vertex, int slot) const { return indices[static_cast<std::size_t>(vertex * length + slot)]; }
};

// Deterministic: ring 1 starts at the lowest-index neighbor and walks
// counterclockwise; ring k+1 enumerates, for each ring-k vertex in order, its
// unvisited fan neighbors. Throws MeshError on isolated vertices.
SpiralSet build_spirals(const Mesh& mesh, const Adjacency& adjacency, int length);

}  // namespace dismesh
