#pragma once

#include "dismesh/adjacency.hpp"
#include "dismesh/mesh.hpp"
#include "dismesh/rng.hpp"

#include <array>
#include <cmath>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace testutil {

// planar grid with the standard diagonal triangulation, vertices (x + nx*y)
inline dismesh::Mesh make_grid(int nx, int ny) {
    dismesh::VertexMatrix v(nx * ny, 3);
    for (int y = 0; y < ny; ++y) {
        for (int x = 0; x < nx; ++x) {
            v.row(x + nx * y) << static_cast<double>(x), static_cast<double>(y), 0.0;
        }
    }
    dismesh::FaceMatrix f(2 * (nx - 1) * (ny - 1), 3);
    int fi = 0;
    for (int y = 0; y + 1 < ny; ++y) {
        for (int x = 0; x + 1 < nx; ++x) {
            const int a = x + nx * y;
            f.row(fi++) << a, a + 1, a + nx + 1;
            f.row(fi++) << a, a + nx + 1, a + nx;
        }
    }
    return dismesh::make_mesh(std::move(v), std::move(f));
}

inline dismesh::Mesh make_tetrahedron() {
    dismesh::VertexMatrix v(4, 3);
    v << 1, 1, 1, 1, -1, -1, -1, 1, -1, -1, -1, 1;
    dismesh::FaceMatrix f(4, 3);
    f << 0, 2, 1, 0, 1, 3, 0, 3, 2, 1, 2, 3;
    return dismesh::make_mesh(std::move(v), std::move(f));
}

inline dismesh::Mesh make_icosahedron() {
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    dismesh::VertexMatrix v(12, 3);
    v << -1, t, 0, 1, t, 0, -1, -t, 0, 1, -t, 0, 0, -1, t, 0, 1, t,
         0, -1, -t, 0, 1, -t, t, 0, -1, t, 0, 1, -t, 0, -1, -t, 0, 1;
    dismesh::FaceMatrix f(20, 3);
    f << 0, 11, 5, 0, 5, 1, 0, 1, 7, 0, 7, 10, 0, 10, 11,
         1, 5, 9, 5, 11, 4, 11, 10, 2, 10, 7, 6, 7, 1, 8,
         3, 9, 4, 3, 4, 2, 3, 2, 6, 3, 6, 8, 3, 8, 9,
         4, 9, 5, 2, 4, 11, 6, 2, 10, 8, 6, 7, 9, 8, 1;
    return dismesh::make_mesh(std::move(v), std::move(f));
}

inline dismesh::Mesh random_cloud_mesh(int extra_vertices, std::uint64_t seed) {
    // a tetrahedron plus unreferenced random vertices, for centroid math
    dismesh::Mesh tet = make_tetrahedron();
    dismesh::VertexMatrix v(4 + extra_vertices, 3);
    v.topRows(4) = tet.vertices;
    dismesh::Rng rng(seed);
    for (int i = 0; i < extra_vertices; ++i) {
        v.row(4 + i) << rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3);
    }
    return dismesh::make_mesh(std::move(v), tet.faces);
}

// midpoint subdivision of a closed triangle mesh, projected to the unit
// sphere; independent of the production icosphere builder
inline dismesh::Mesh subdivide_to_sphere(const dismesh::Mesh& mesh) {
    std::vector<Eigen::RowVector3d> verts;
    for (int i = 0; i < mesh.vertex_count(); ++i) {
        verts.push_back(mesh.vertices.row(i).normalized());
    }
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
        auto key = std::minmax(a, b);
        auto it = midpoint.find({key.first, key.second});
        if (it != midpoint.end()) return it->second;
        const int idx = static_cast<int>(verts.size());
        verts.push_back((0.5 * (verts[static_cast<std::size_t>(a)] +
                                verts[static_cast<std::size_t>(b)])).normalized());
        midpoint[{key.first, key.second}] = idx;
        return idx;
    };
    std::vector<std::array<int, 3>> faces;
    for (int f = 0; f < mesh.face_count(); ++f) {
        const int a = mesh.faces(f, 0), b = mesh.faces(f, 1), c = mesh.faces(f, 2);
        const int ab = mid(a, b), bc = mid(b, c), ca = mid(c, a);
        faces.push_back({a, ab, ca});
        faces.push_back({b, bc, ab});
        faces.push_back({c, ca, bc});
        faces.push_back({ab, bc, ca});
    }
    dismesh::VertexMatrix v(verts.size(), 3);
    for (std::size_t i = 0; i < verts.size(); ++i) v.row(static_cast<int>(i)) = verts[i];
    dismesh::FaceMatrix fm(faces.size(), 3);
    for (std::size_t i = 0; i < faces.size(); ++i) {
        fm.row(static_cast<int>(i)) << faces[i][0], faces[i][1], faces[i][2];
    }
    return dismesh::make_mesh(std::move(v), std::move(fm));
}

inline dismesh::Mesh make_icosphere(int subdivisions) {
    dismesh::Mesh mesh = make_icosahedron();
    for (int i = 0; i < mesh.vertex_count(); ++i) {
        mesh.vertices.row(i).normalize();
    }
    for (int s = 0; s < subdivisions; ++s) mesh = subdivide_to_sphere(mesh);
    return mesh;
}

class TempDir {
public:
    explicit TempDir(const std::string& name) {
        path_ = (std::filesystem::temp_directory_path() / ("dismesh_test_" + name)).string();
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    const std::string& path() const { return path_; }
    std::string file(const std::string& name) const {
        return (std::filesystem::path(path_) / name).string();
    }

private:
    std::string path_;
};

}  // namespace testutil
