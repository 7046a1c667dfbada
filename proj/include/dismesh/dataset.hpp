#pragma once

#include "dismesh/mesh.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace dismesh {

struct MeshRecord {
    std::string mesh_id;
    std::string subject_id;
    std::string path;  // absolute, or relative to the manifest directory
};

// Manifest of registered meshes grouped by subject. Every subject owns at
// least two meshes and all meshes share the template connectivity.
struct DatasetIndex {
    std::string manifest_path;
    std::string topology_path;  // template mesh
    std::vector<MeshRecord> records;
    std::map<std::string, std::vector<int>> by_subject;  // record indices, insertion-ordered ids

    int size() const { return static_cast<int>(records.size()); }
    std::string resolve(const std::string& rel) const;
};

DatasetIndex load_dataset_index(const std::string& manifest_path);
void save_dataset_index(const DatasetIndex& index, const std::string& manifest_path);

// Fingerprint over the manifest structure and the referenced file contents.
std::uint64_t dataset_hash(const DatasetIndex& index);

// Loads the template plus every referenced mesh, verifying the shared
// topology. Meshes come back in record order.
struct LoadedDataset {
    DatasetIndex index;
    Mesh template_mesh;
    std::vector<Mesh> meshes;
};
LoadedDataset load_dataset(const std::string& manifest_path);

}  // namespace dismesh
