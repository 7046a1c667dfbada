#include "dismesh/spiral.hpp"

namespace dismesh {

SpiralSet build_spirals(const Mesh& mesh, const Adjacency& adjacency, int length) {
    if (length < 1) throw MeshError("build_spirals: length must be >= 1");
    const int n = mesh.vertex_count();
    SpiralSet set;
    set.num_vertices = n;
    set.length = length;
    set.indices.assign(static_cast<std::size_t>(n) * static_cast<std::size_t>(length),
                       SpiralSet::kSpiralPad);

    std::vector<char> visited(static_cast<std::size_t>(n), 0);
    std::vector<int> touched;
    for (int v = 0; v < n; ++v) {
        const auto& ring1 = adjacency.one_ring[static_cast<std::size_t>(v)];
        if (ring1.empty()) throw MeshError("build_spirals: isolated vertex " + std::to_string(v));

        touched.clear();
        auto mark = [&](int u) {
            visited[static_cast<std::size_t>(u)] = 1;
            touched.push_back(u);
        };

        int count = 0;
        auto emit = [&](int u) {
            if (count < length) {
                set.indices[static_cast<std::size_t>(v * length + count)] = u;
                ++count;
            }
        };

        emit(v);
        mark(v);
        std::vector<int> ring(ring1.begin(), ring1.end());
        for (int u : ring) mark(u);
        while (count < length && !ring.empty()) {
            std::vector<int> next;
            for (int u : ring) {
                emit(u);
                for (int w : adjacency.one_ring[static_cast<std::size_t>(u)]) {
                    if (!visited[static_cast<std::size_t>(w)]) {
                        mark(w);
                        next.push_back(w);
                    }
                }
            }
            ring = std::move(next);
        }
        for (int u : touched) visited[static_cast<std::size_t>(u)] = 0;
    }
    return set;
}

}  // namespace dismesh
