#include "dismesh/adjacency.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace dismesh {

Adjacency build_adjacency(const Mesh& mesh) {
    const int n = mesh.vertex_count();

    // successor[i][j] = k when face (i, j, k) is incident at i; walking
    // successors enumerates the ring counterclockwise for outward normals
    std::vector<std::map<int, int>> successor(n);
    std::vector<std::map<int, int>> predecessor(n);
    std::map<std::pair<int, int>, int> edge_use;  // undirected edge -> face count
    std::ostringstream bad_edges;
    int bad_count = 0;

    for (int f = 0; f < mesh.face_count(); ++f) {
        const int v[3] = {mesh.faces(f, 0), mesh.faces(f, 1), mesh.faces(f, 2)};
        for (int c = 0; c < 3; ++c) {
            const int i = v[c], a = v[(c + 1) % 3], b = v[(c + 2) % 3];
            if (successor[i].count(a)) {
                // two faces traverse edge (i,a) in the same direction
                throw MeshError("non-manifold or inconsistently wound edge (" + std::to_string(i) +
                                "," + std::to_string(a) + ")");
            }
            successor[i][a] = b;
            predecessor[i][b] = a;
            auto key = std::minmax(i, a);
            if (++edge_use[{key.first, key.second}] > 2 && bad_count < 8) {
                bad_edges << (bad_count ? ", " : "") << "(" << key.first << "," << key.second << ")";
                ++bad_count;
            }
        }
    }
    if (bad_count > 0) {
        throw MeshError("non-manifold edges shared by more than two faces: " + bad_edges.str());
    }

    Adjacency adj;
    adj.one_ring.resize(n);
    adj.incident_edges.resize(n);
    adj.boundary.assign(n, false);

    for (int i = 0; i < n; ++i) {
        const auto& succ = successor[i];
        if (succ.empty()) continue;  // isolated vertex: empty ring

        // open fan iff some neighbor has no predecessor
        int start = -1;
        for (const auto& [j, _] : succ) {
            if (!predecessor[i].count(j)) {
                if (start != -1) {
                    throw MeshError("vertex " + std::to_string(i) +
                                    ": incident faces do not form a single fan");
                }
                start = j;
            }
        }
        bool open = start != -1;
        adj.boundary[i] = open;
        if (!open) start = succ.begin()->first;  // lowest index, std::map order

        std::vector<int> ring;
        ring.reserve(succ.size() + 1);
        int cur = start;
        while (true) {
            ring.push_back(cur);
            auto it = succ.find(cur);
            if (it == succ.end()) break;          // open fan end (last neighbor has no successor)
            cur = it->second;
            if (cur == start) break;              // closed ring complete
            if (ring.size() > succ.size() + 1) {
                throw MeshError("vertex " + std::to_string(i) +
                                ": incident faces do not form a single fan");
            }
        }
        // every neighbor must appear exactly once
        std::size_t degree = succ.size() + (open ? 1 : 0);
        if (ring.size() != degree) {
            throw MeshError("vertex " + std::to_string(i) +
                            ": incident faces do not form a single fan");
        }
        adj.one_ring[i] = ring;
        auto& edges = adj.incident_edges[i];
        edges.reserve(ring.size());
        for (int j : ring) {
            edges.emplace_back((mesh.vertices.row(j) - mesh.vertices.row(i)).transpose());
        }
    }
    return adj;
}

}  // namespace dismesh
