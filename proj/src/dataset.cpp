#include "dismesh/dataset.hpp"

#include "dismesh/mesh_io.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>

namespace dismesh {

namespace fs = std::filesystem;
using nlohmann::json;

std::string DatasetIndex::resolve(const std::string& rel) const {
    fs::path p(rel);
    if (p.is_absolute() || manifest_path.empty()) return rel;
    return (fs::path(manifest_path).parent_path() / p).string();
}

DatasetIndex load_dataset_index(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw MeshError(manifest_path + ": cannot open manifest");
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw MeshError(manifest_path + ": invalid JSON: " + e.what());
    }
    DatasetIndex index;
    index.manifest_path = manifest_path;
    index.topology_path = doc.at("topology").get<std::string>();
    for (const auto& subj : doc.at("subjects")) {
        const std::string id = subj.at("id").get<std::string>();
        if (index.by_subject.count(id)) throw MeshError("duplicate subject id: " + id);
        auto& slots = index.by_subject[id];
        for (const auto& m : subj.at("meshes")) {
            MeshRecord rec;
            rec.subject_id = id;
            rec.path = m.get<std::string>();
            rec.mesh_id = fs::path(rec.path).stem().string();
            slots.push_back(index.size());
            index.records.push_back(std::move(rec));
        }
        if (slots.size() < 2) {
            throw MeshError("subject " + id + " has fewer than 2 meshes");
        }
    }
    if (index.records.empty()) throw MeshError(manifest_path + ": empty dataset");
    return index;
}

void save_dataset_index(const DatasetIndex& index, const std::string& manifest_path) {
    json subjects = json::array();
    for (const auto& [id, slots] : index.by_subject) {
        json meshes = json::array();
        for (int r : slots) meshes.push_back(index.records[static_cast<std::size_t>(r)].path);
        subjects.push_back({{"id", id}, {"meshes", meshes}});
    }
    json doc = {{"topology", index.topology_path}, {"subjects", subjects}};
    std::ofstream out(manifest_path);
    if (!out) throw MeshError(manifest_path + ": cannot write manifest");
    out << doc.dump(2) << "\n";
}

static std::uint64_t hash_file(const std::string& path, std::uint64_t h) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MeshError(path + ": cannot open for hashing");
    char buf[1 << 16];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        h = fnv1a(buf, static_cast<std::size_t>(in.gcount()), h);
        if (!in) break;
    }
    return h;
}

std::uint64_t dataset_hash(const DatasetIndex& index) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    h = fnv1a(index.topology_path.data(), index.topology_path.size(), h);
    h = hash_file(index.resolve(index.topology_path), h);
    for (const auto& rec : index.records) {
        h = fnv1a(rec.subject_id.data(), rec.subject_id.size(), h);
        h = fnv1a(rec.path.data(), rec.path.size(), h);
        h = hash_file(index.resolve(rec.path), h);
    }
    return h;
}

LoadedDataset load_dataset(const std::string& manifest_path) {
    LoadedDataset data;
    data.index = load_dataset_index(manifest_path);
    data.template_mesh = load_mesh(data.index.resolve(data.index.topology_path));
    data.meshes.reserve(data.index.records.size());
    for (const auto& rec : data.index.records) {
        data.meshes.push_back(
            load_mesh(data.index.resolve(rec.path), data.template_mesh.topology_id));
    }
    return data;
}

}  // namespace dismesh
