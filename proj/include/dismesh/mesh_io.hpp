#pragma once

#include "dismesh/mesh.hpp"

#include <string>

namespace dismesh {

class MeshIoError : public MeshError {
public:
    using MeshError::MeshError;
};

// Format is chosen by extension: .obj or .ply. PLY can be ASCII or
// binary little-endian; OBJ supports v/f records with triangle faces only.
// If expected_topology is non-empty, a mismatching connectivity is an error.
Mesh load_mesh(const std::string& path, const std::string& expected_topology = "");

// binary applies to PLY only (binary little-endian, doubles, bit-exact
// round trip). OBJ and ASCII PLY are written with 17 significant digits.
void save_mesh(const Mesh& mesh, const std::string& path, bool binary = true);

}  // namespace dismesh
