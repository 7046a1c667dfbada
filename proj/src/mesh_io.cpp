#include "dismesh/mesh_io.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace dismesh {

namespace {

std::string lower_ext(const std::string& path) {
    auto dot = path.find_last_of('.');
    if (dot == std::string::npos) return "";
    std::string ext = path.substr(dot + 1);
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return ext;
}

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw MeshIoError(path + ": " + what);
}

Mesh load_obj(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(path, "cannot open file");
    std::vector<Eigen::RowVector3d> verts;
    std::vector<Eigen::RowVector3i> faces;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ss(line);
        std::string tag;
        if (!(ss >> tag)) continue;
        if (tag == "v") {
            double x, y, z;
            if (!(ss >> x >> y >> z)) fail(path, "parse failure at line " + std::to_string(lineno));
            verts.emplace_back(x, y, z);
        } else if (tag == "f") {
            std::vector<long> idx;
            std::string tok;
            while (ss >> tok) {
                // accept v, v/vt, v/vt/vn, v//vn; only the vertex index is kept
                std::size_t pos = 0;
                long v = 0;
                try {
                    v = std::stol(tok, &pos);
                } catch (const std::exception&) {
                    fail(path, "parse failure at line " + std::to_string(lineno));
                }
                if (pos == 0) fail(path, "parse failure at line " + std::to_string(lineno));
                if (v < 0) v = static_cast<long>(verts.size()) + v + 1;  // relative indexing
                idx.push_back(v);
            }
            if (idx.size() != 3) {
                fail(path, "non-triangle face at line " + std::to_string(lineno) + " (" +
                               std::to_string(idx.size()) + " vertices)");
            }
            faces.emplace_back(static_cast<int>(idx[0] - 1), static_cast<int>(idx[1] - 1),
                               static_cast<int>(idx[2] - 1));
        }
        // all other records (vn, vt, comments, groups) are ignored
    }
    VertexMatrix V(verts.size(), 3);
    for (std::size_t i = 0; i < verts.size(); ++i) V.row(static_cast<int>(i)) = verts[i];
    FaceMatrix F(faces.size(), 3);
    for (std::size_t i = 0; i < faces.size(); ++i) F.row(static_cast<int>(i)) = faces[i];
    try {
        return make_mesh(std::move(V), std::move(F));
    } catch (const MeshError& e) {
        fail(path, e.what());
    }
}

struct PlyProperty {
    std::string name;
    std::string type;       // scalar type, or item type for lists
    std::string count_type; // non-empty for list properties
};

struct PlyElement {
    std::string name;
    long count = 0;
    std::vector<PlyProperty> props;
};

std::size_t scalar_size(const std::string& t) {
    if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
    if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
    if (t == "int" || t == "uint" || t == "int32" || t == "uint32" || t == "float" || t == "float32") return 4;
    if (t == "double" || t == "float64") return 8;
    return 0;
}

double read_binary_scalar(std::istream& in, const std::string& type, const std::string& path) {
    unsigned char buf[8];
    std::size_t n = scalar_size(type);
    if (n == 0) fail(path, "unsupported property type '" + type + "'");
    if (!in.read(reinterpret_cast<char*>(buf), static_cast<std::streamsize>(n)))
        fail(path, "unexpected end of binary data");
    auto as = [&]<typename T>() {
        T v;
        std::memcpy(&v, buf, sizeof(T));
        return static_cast<double>(v);
    };
    if (type == "char" || type == "int8") return as.operator()<std::int8_t>();
    if (type == "uchar" || type == "uint8") return as.operator()<std::uint8_t>();
    if (type == "short" || type == "int16") return as.operator()<std::int16_t>();
    if (type == "ushort" || type == "uint16") return as.operator()<std::uint16_t>();
    if (type == "int" || type == "int32") return as.operator()<std::int32_t>();
    if (type == "uint" || type == "uint32") return as.operator()<std::uint32_t>();
    if (type == "float" || type == "float32") return as.operator()<float>();
    return as.operator()<double>();
}

double read_ascii_scalar(std::istream& in, const std::string& path) {
    double v;
    if (!(in >> v)) fail(path, "unexpected end of ASCII data");
    return v;
}

Mesh load_ply(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(path, "cannot open file");
    std::string line;
    if (!std::getline(in, line)) fail(path, "empty file");
    if (line.size() && line.back() == '\r') line.pop_back();
    if (line != "ply") fail(path, "not a PLY file");

    std::string format;
    std::vector<PlyElement> elements;
    while (std::getline(in, line)) {
        if (line.size() && line.back() == '\r') line.pop_back();
        std::istringstream ss(line);
        std::string tag;
        ss >> tag;
        if (tag == "comment" || tag == "obj_info" || tag.empty()) continue;
        if (tag == "format") {
            ss >> format;
        } else if (tag == "element") {
            PlyElement e;
            ss >> e.name >> e.count;
            elements.push_back(e);
        } else if (tag == "property") {
            if (elements.empty()) fail(path, "property before element in header");
            PlyProperty p;
            std::string t;
            ss >> t;
            if (t == "list") {
                ss >> p.count_type >> p.type >> p.name;
            } else {
                p.type = t;
                ss >> p.name;
            }
            elements.back().props.push_back(p);
        } else if (tag == "end_header") {
            break;
        } else {
            fail(path, "unrecognized header line: " + line);
        }
    }
    const bool binary = format == "binary_little_endian";
    if (!binary && format != "ascii") fail(path, "unsupported PLY format '" + format + "'");

    std::vector<Eigen::RowVector3d> verts;
    std::vector<Eigen::RowVector3i> faces;
    for (const auto& elem : elements) {
        if (elem.name == "vertex") {
            int ix = -1, iy = -1, iz = -1;
            for (std::size_t i = 0; i < elem.props.size(); ++i) {
                if (elem.props[i].name == "x") ix = static_cast<int>(i);
                if (elem.props[i].name == "y") iy = static_cast<int>(i);
                if (elem.props[i].name == "z") iz = static_cast<int>(i);
                if (!elem.props[i].count_type.empty()) fail(path, "list property on vertex element");
            }
            if (ix < 0 || iy < 0 || iz < 0) fail(path, "vertex element missing x/y/z");
            verts.reserve(static_cast<std::size_t>(elem.count));
            for (long v = 0; v < elem.count; ++v) {
                double coords[3] = {0, 0, 0};
                for (std::size_t i = 0; i < elem.props.size(); ++i) {
                    double val = binary ? read_binary_scalar(in, elem.props[i].type, path)
                                        : read_ascii_scalar(in, path);
                    if (static_cast<int>(i) == ix) coords[0] = val;
                    if (static_cast<int>(i) == iy) coords[1] = val;
                    if (static_cast<int>(i) == iz) coords[2] = val;
                }
                verts.emplace_back(coords[0], coords[1], coords[2]);
            }
        } else if (elem.name == "face") {
            int ilist = -1;
            for (std::size_t i = 0; i < elem.props.size(); ++i) {
                if (!elem.props[i].count_type.empty() &&
                    (elem.props[i].name == "vertex_indices" || elem.props[i].name == "vertex_index")) {
                    ilist = static_cast<int>(i);
                }
            }
            if (ilist < 0) fail(path, "face element missing vertex_indices");
            faces.reserve(static_cast<std::size_t>(elem.count));
            for (long f = 0; f < elem.count; ++f) {
                for (std::size_t i = 0; i < elem.props.size(); ++i) {
                    const auto& p = elem.props[i];
                    if (p.count_type.empty()) {
                        binary ? read_binary_scalar(in, p.type, path) : read_ascii_scalar(in, path);
                        continue;
                    }
                    long n = static_cast<long>(binary ? read_binary_scalar(in, p.count_type, path)
                                                      : read_ascii_scalar(in, path));
                    std::vector<long> idx(static_cast<std::size_t>(n));
                    for (long j = 0; j < n; ++j) {
                        idx[static_cast<std::size_t>(j)] = static_cast<long>(
                            binary ? read_binary_scalar(in, p.type, path) : read_ascii_scalar(in, path));
                    }
                    if (static_cast<int>(i) == ilist) {
                        if (n != 3) {
                            fail(path, "non-triangle face " + std::to_string(f) + " (" +
                                           std::to_string(n) + " vertices)");
                        }
                        faces.emplace_back(static_cast<int>(idx[0]), static_cast<int>(idx[1]),
                                           static_cast<int>(idx[2]));
                    }
                }
            }
        } else {
            // skip unknown elements
            for (long r = 0; r < elem.count; ++r) {
                for (const auto& p : elem.props) {
                    if (p.count_type.empty()) {
                        binary ? read_binary_scalar(in, p.type, path) : read_ascii_scalar(in, path);
                    } else {
                        long n = static_cast<long>(binary ? read_binary_scalar(in, p.count_type, path)
                                                          : read_ascii_scalar(in, path));
                        for (long j = 0; j < n; ++j)
                            binary ? read_binary_scalar(in, p.type, path) : read_ascii_scalar(in, path);
                    }
                }
            }
        }
    }
    VertexMatrix V(verts.size(), 3);
    for (std::size_t i = 0; i < verts.size(); ++i) V.row(static_cast<int>(i)) = verts[i];
    FaceMatrix F(faces.size(), 3);
    for (std::size_t i = 0; i < faces.size(); ++i) F.row(static_cast<int>(i)) = faces[i];
    try {
        return make_mesh(std::move(V), std::move(F));
    } catch (const MeshError& e) {
        fail(path, e.what());
    }
}

void save_obj(const Mesh& mesh, const std::string& path) {
    std::ofstream out(path);
    if (!out) fail(path, "cannot open file for writing");
    char buf[128];
    for (int v = 0; v < mesh.vertex_count(); ++v) {
        std::snprintf(buf, sizeof(buf), "v %.17g %.17g %.17g\n", mesh.vertices(v, 0),
                      mesh.vertices(v, 1), mesh.vertices(v, 2));
        out << buf;
    }
    for (int f = 0; f < mesh.face_count(); ++f) {
        out << "f " << mesh.faces(f, 0) + 1 << ' ' << mesh.faces(f, 1) + 1 << ' '
            << mesh.faces(f, 2) + 1 << '\n';
    }
    if (!out) fail(path, "write failure");
}

void save_ply(const Mesh& mesh, const std::string& path, bool binary) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(path, "cannot open file for writing");
    out << "ply\nformat " << (binary ? "binary_little_endian" : "ascii") << " 1.0\n";
    out << "element vertex " << mesh.vertex_count() << "\n";
    out << "property double x\nproperty double y\nproperty double z\n";
    out << "element face " << mesh.face_count() << "\n";
    out << "property list uchar int vertex_indices\n";
    out << "end_header\n";
    if (binary) {
        for (int v = 0; v < mesh.vertex_count(); ++v) {
            double xyz[3] = {mesh.vertices(v, 0), mesh.vertices(v, 1), mesh.vertices(v, 2)};
            out.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
        }
        for (int f = 0; f < mesh.face_count(); ++f) {
            unsigned char n = 3;
            std::int32_t idx[3] = {mesh.faces(f, 0), mesh.faces(f, 1), mesh.faces(f, 2)};
            out.write(reinterpret_cast<const char*>(&n), 1);
            out.write(reinterpret_cast<const char*>(idx), sizeof(idx));
        }
    } else {
        char buf[128];
        for (int v = 0; v < mesh.vertex_count(); ++v) {
            std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g\n", mesh.vertices(v, 0),
                          mesh.vertices(v, 1), mesh.vertices(v, 2));
            out << buf;
        }
        for (int f = 0; f < mesh.face_count(); ++f) {
            out << "3 " << mesh.faces(f, 0) << ' ' << mesh.faces(f, 1) << ' ' << mesh.faces(f, 2)
                << '\n';
        }
    }
    if (!out) fail(path, "write failure");
}

}  // namespace

Mesh load_mesh(const std::string& path, const std::string& expected_topology) {
    const std::string ext = lower_ext(path);
    Mesh mesh;
    if (ext == "obj") {
        mesh = load_obj(path);
    } else if (ext == "ply") {
        mesh = load_ply(path);
    } else {
        fail(path, "unsupported mesh format '" + ext + "'");
    }
    if (!expected_topology.empty() && mesh.topology_id != expected_topology) {
        fail(path, "topology mismatch: expected " + expected_topology + ", got " + mesh.topology_id);
    }
    return mesh;
}

void save_mesh(const Mesh& mesh, const std::string& path, bool binary) {
    const std::string ext = lower_ext(path);
    if (ext == "obj") {
        save_obj(mesh, path);
    } else if (ext == "ply") {
        save_ply(mesh, path, binary);
    } else {
        fail(path, "unsupported mesh format '" + ext + "'");
    }
}

}  // namespace dismesh
