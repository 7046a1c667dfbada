#include "dismesh/hierarchy.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <array>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <queue>
#include <set>

namespace dismesh {

namespace {

Eigen::Matrix4d plane_quadric(const Eigen::Vector3d& normal, const Eigen::Vector3d& point) {
    Eigen::Vector4d p;
    p << normal, -normal.dot(point);
    return p * p.transpose();
}

// Ericson-style closest point on triangle.
Eigen::Vector3d closest_point_barycentric(const Eigen::Vector3d& p, const Eigen::Vector3d& a,
                                          const Eigen::Vector3d& b, const Eigen::Vector3d& c) {
    const Eigen::Vector3d ab = b - a, ac = c - a, ap = p - a;
    const double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0.0 && d2 <= 0.0) return {1.0, 0.0, 0.0};

    const Eigen::Vector3d bp = p - b;
    const double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3) return {0.0, 1.0, 0.0};

    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
        const double v = d1 / (d1 - d3);
        return {1.0 - v, v, 0.0};
    }

    const Eigen::Vector3d cp = p - c;
    const double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0.0 && d5 <= d6) return {0.0, 0.0, 1.0};

    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
        const double w = d2 / (d2 - d6);
        return {1.0 - w, 0.0, w};
    }

    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
        const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return {0.0, 1.0 - w, w};
    }

    const double denom = 1.0 / (va + vb + vc);
    const double v = vb * denom, w = vc * denom;
    return {1.0 - v - w, v, w};
}

struct HeapEntry {
    double cost;
    int a, b;  // a < b
    Eigen::Vector3d position;
    int version_a, version_b;
};

struct HeapCompare {
    bool operator()(const HeapEntry& x, const HeapEntry& y) const {
        if (x.cost != y.cost) return x.cost > y.cost;
        if (x.a != y.a) return x.a > y.a;
        return x.b > y.b;
    }
};

struct DecimationResult {
    Mesh coarse;
    std::vector<int> survivor;  // coarse index -> fine index
    Eigen::SparseMatrix<double> down;
    Eigen::SparseMatrix<double> up;
};

DecimationResult decimate(const Mesh& fine, int target_count, int level_for_error) {
    const int n = fine.vertex_count();
    std::vector<Eigen::Vector3d> pos(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) pos[static_cast<std::size_t>(i)] = fine.vertices.row(i).transpose();
    std::vector<Eigen::Matrix4d> quadric = vertex_quadrics(fine);

    std::vector<std::set<int>> neighbors(static_cast<std::size_t>(n));
    std::vector<std::array<int, 3>> faces;
    faces.reserve(static_cast<std::size_t>(fine.face_count()));
    std::vector<char> face_alive;
    std::vector<std::set<int>> incident(static_cast<std::size_t>(n));  // face indices
    for (int f = 0; f < fine.face_count(); ++f) {
        std::array<int, 3> tri = {fine.faces(f, 0), fine.faces(f, 1), fine.faces(f, 2)};
        faces.push_back(tri);
        face_alive.push_back(1);
        for (int c = 0; c < 3; ++c) {
            neighbors[static_cast<std::size_t>(tri[c])].insert(tri[(c + 1) % 3]);
            neighbors[static_cast<std::size_t>(tri[c])].insert(tri[(c + 2) % 3]);
            incident[static_cast<std::size_t>(tri[c])].insert(f);
        }
    }

    std::vector<char> alive(static_cast<std::size_t>(n), 1);
    std::vector<int> version(static_cast<std::size_t>(n), 0);
    std::priority_queue<HeapEntry, std::vector<HeapEntry>, HeapCompare> heap;

    auto push_edge = [&](int a, int b) {
        if (a > b) std::swap(a, b);
        CollapseCandidate cand =
            edge_collapse_cost(quadric[static_cast<std::size_t>(a)],
                               quadric[static_cast<std::size_t>(b)], pos[static_cast<std::size_t>(a)],
                               pos[static_cast<std::size_t>(b)]);
        heap.push({cand.cost, a, b, cand.position, version[static_cast<std::size_t>(a)],
                   version[static_cast<std::size_t>(b)]});
    };
    for (int a = 0; a < n; ++a) {
        for (int b : neighbors[static_cast<std::size_t>(a)]) {
            if (a < b) push_edge(a, b);
        }
    }

    auto link_condition = [&](int a, int b) {
        // common neighbors must be exactly the third vertices of the faces on
        // edge (a,b), otherwise the collapse pinches the surface
        std::set<int> common;
        const auto& na = neighbors[static_cast<std::size_t>(a)];
        const auto& nb = neighbors[static_cast<std::size_t>(b)];
        std::set_intersection(na.begin(), na.end(), nb.begin(), nb.end(),
                              std::inserter(common, common.begin()));
        std::set<int> thirds;
        for (int f : incident[static_cast<std::size_t>(a)]) {
            if (!face_alive[static_cast<std::size_t>(f)]) continue;
            const auto& tri = faces[static_cast<std::size_t>(f)];
            bool has_b = tri[0] == b || tri[1] == b || tri[2] == b;
            if (!has_b) continue;
            for (int v : tri) {
                if (v != a && v != b) thirds.insert(v);
            }
        }
        return !thirds.empty() && common == thirds;
    };

    int alive_count = n;
    while (alive_count > target_count && !heap.empty()) {
        HeapEntry top = heap.top();
        heap.pop();
        const int a = top.a, b = top.b;
        if (!alive[static_cast<std::size_t>(a)] || !alive[static_cast<std::size_t>(b)]) continue;
        if (top.version_a != version[static_cast<std::size_t>(a)] ||
            top.version_b != version[static_cast<std::size_t>(b)])
            continue;
        if (!neighbors[static_cast<std::size_t>(a)].count(b)) continue;
        if (!link_condition(a, b)) continue;

        // collapse b into a at the optimal position
        alive[static_cast<std::size_t>(b)] = 0;
        --alive_count;
        pos[static_cast<std::size_t>(a)] = top.position;
        quadric[static_cast<std::size_t>(a)] += quadric[static_cast<std::size_t>(b)];

        for (int f : incident[static_cast<std::size_t>(b)]) {
            if (!face_alive[static_cast<std::size_t>(f)]) continue;
            auto& tri = faces[static_cast<std::size_t>(f)];
            for (int& v : tri) {
                if (v == b) v = a;
            }
            if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2]) {
                face_alive[static_cast<std::size_t>(f)] = 0;
                for (int v : tri) incident[static_cast<std::size_t>(v)].erase(f);
            } else {
                incident[static_cast<std::size_t>(a)].insert(f);
            }
        }
        neighbors[static_cast<std::size_t>(a)].erase(b);
        for (int x : neighbors[static_cast<std::size_t>(b)]) {
            if (x == a) continue;
            neighbors[static_cast<std::size_t>(x)].erase(b);
            neighbors[static_cast<std::size_t>(x)].insert(a);
            neighbors[static_cast<std::size_t>(a)].insert(x);
        }
        neighbors[static_cast<std::size_t>(b)].clear();
        incident[static_cast<std::size_t>(b)].clear();
        ++version[static_cast<std::size_t>(a)];

        for (int x : neighbors[static_cast<std::size_t>(a)]) push_edge(a, x);
    }
    if (alive_count > target_count) {
        throw HierarchyError("decimation stalled at level " + std::to_string(level_for_error) +
                             ": " + std::to_string(alive_count) + " vertices remain, target " +
                             std::to_string(target_count));
    }

    DecimationResult result;
    std::vector<int> coarse_index(static_cast<std::size_t>(n), -1);
    for (int i = 0; i < n; ++i) {
        if (alive[static_cast<std::size_t>(i)]) {
            coarse_index[static_cast<std::size_t>(i)] = static_cast<int>(result.survivor.size());
            result.survivor.push_back(i);
        }
    }
    const int m = static_cast<int>(result.survivor.size());
    VertexMatrix cv(m, 3);
    for (int i = 0; i < m; ++i) {
        cv.row(i) = pos[static_cast<std::size_t>(result.survivor[static_cast<std::size_t>(i)])].transpose();
    }
    std::vector<std::array<int, 3>> ctris;
    for (std::size_t f = 0; f < faces.size(); ++f) {
        if (!face_alive[f]) continue;
        ctris.push_back({coarse_index[static_cast<std::size_t>(faces[f][0])],
                         coarse_index[static_cast<std::size_t>(faces[f][1])],
                         coarse_index[static_cast<std::size_t>(faces[f][2])]});
    }
    FaceMatrix cf(ctris.size(), 3);
    for (std::size_t f = 0; f < ctris.size(); ++f) {
        cf.row(static_cast<int>(f)) << ctris[f][0], ctris[f][1], ctris[f][2];
    }
    result.coarse = make_mesh(std::move(cv), std::move(cf));

    // down: selection of the surviving fine vertex
    {
        std::vector<Eigen::Triplet<double>> t;
        t.reserve(static_cast<std::size_t>(m));
        for (int i = 0; i < m; ++i) t.emplace_back(i, result.survivor[static_cast<std::size_t>(i)], 1.0);
        result.down.resize(m, n);
        result.down.setFromTriplets(t.begin(), t.end());
    }
    // up: barycentric weights of each fine vertex in its nearest coarse triangle
    {
        std::vector<Eigen::Triplet<double>> t;
        t.reserve(static_cast<std::size_t>(n) * 3);
        for (int i = 0; i < n; ++i) {
            const Eigen::Vector3d p = fine.vertices.row(i).transpose();
            double best = std::numeric_limits<double>::infinity();
            int best_f = 0;
            Eigen::Vector3d best_bary = Eigen::Vector3d::Zero();
            for (int f = 0; f < result.coarse.face_count(); ++f) {
                const Eigen::Vector3d a = result.coarse.vertices.row(result.coarse.faces(f, 0)).transpose();
                const Eigen::Vector3d b = result.coarse.vertices.row(result.coarse.faces(f, 1)).transpose();
                const Eigen::Vector3d c = result.coarse.vertices.row(result.coarse.faces(f, 2)).transpose();
                Eigen::Vector3d bary = closest_point_barycentric(p, a, b, c);
                Eigen::Vector3d cp = bary.x() * a + bary.y() * b + bary.z() * c;
                const double d2 = (cp - p).squaredNorm();
                if (d2 < best) {
                    best = d2;
                    best_f = f;
                    best_bary = bary;
                }
            }
            for (int c = 0; c < 3; ++c) {
                if (best_bary[c] != 0.0) {
                    t.emplace_back(i, result.coarse.faces(best_f, c), best_bary[c]);
                }
            }
        }
        result.up.resize(n, m);
        result.up.setFromTriplets(t.begin(), t.end());
    }
    return result;
}

}  // namespace

std::vector<Eigen::Matrix4d> vertex_quadrics(const Mesh& mesh) {
    const int n = mesh.vertex_count();
    std::vector<Eigen::Matrix4d> quadric(static_cast<std::size_t>(n), Eigen::Matrix4d::Zero());
    std::map<std::pair<int, int>, std::pair<int, int>> edge_faces;  // edge -> (count, one face)
    for (int f = 0; f < mesh.face_count(); ++f) {
        const Eigen::Vector3d a = mesh.vertices.row(mesh.faces(f, 0)).transpose();
        const Eigen::Vector3d b = mesh.vertices.row(mesh.faces(f, 1)).transpose();
        const Eigen::Vector3d c = mesh.vertices.row(mesh.faces(f, 2)).transpose();
        Eigen::Vector3d normal = (b - a).cross(c - a);
        const double len = normal.norm();
        if (len > 1e-300) {
            normal /= len;
            const Eigen::Matrix4d q = plane_quadric(normal, a);
            for (int cidx = 0; cidx < 3; ++cidx) {
                quadric[static_cast<std::size_t>(mesh.faces(f, cidx))] += q;
            }
        }
        for (int cidx = 0; cidx < 3; ++cidx) {
            auto key = std::minmax(mesh.faces(f, cidx), mesh.faces(f, (cidx + 1) % 3));
            auto& slot = edge_faces[{key.first, key.second}];
            slot.first += 1;
            slot.second = f;
        }
    }
    // boundary preservation: plane through the edge, perpendicular to the
    // single incident face, heavily weighted
    const double kBoundaryWeight = 1e3;
    for (const auto& [edge, info] : edge_faces) {
        if (info.first != 1) continue;
        const int f = info.second;
        const Eigen::Vector3d a = mesh.vertices.row(edge.first).transpose();
        const Eigen::Vector3d b = mesh.vertices.row(edge.second).transpose();
        const Eigen::Vector3d fa = mesh.vertices.row(mesh.faces(f, 0)).transpose();
        const Eigen::Vector3d fb = mesh.vertices.row(mesh.faces(f, 1)).transpose();
        const Eigen::Vector3d fc = mesh.vertices.row(mesh.faces(f, 2)).transpose();
        Eigen::Vector3d face_normal = (fb - fa).cross(fc - fa);
        Eigen::Vector3d penalty_normal = (b - a).cross(face_normal);
        const double len = penalty_normal.norm();
        if (len <= 1e-300) continue;
        penalty_normal /= len;
        const Eigen::Matrix4d q = kBoundaryWeight * plane_quadric(penalty_normal, a);
        quadric[static_cast<std::size_t>(edge.first)] += q;
        quadric[static_cast<std::size_t>(edge.second)] += q;
    }
    return quadric;
}

CollapseCandidate edge_collapse_cost(const Eigen::Matrix4d& qa, const Eigen::Matrix4d& qb,
                                     const Eigen::Vector3d& pa, const Eigen::Vector3d& pb) {
    const Eigen::Matrix4d q = qa + qb;
    auto eval = [&](const Eigen::Vector3d& p) {
        Eigen::Vector4d h;
        h << p, 1.0;
        return std::max(0.0, h.dot(q * h));
    };
    const Eigen::Matrix3d a = q.topLeftCorner<3, 3>();
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const double smax = svd.singularValues()(0);
    const double smin = svd.singularValues()(2);
    if (smin > 0.0 && smax / smin <= 1e12) {
        Eigen::Vector3d p = svd.solve(-q.block<3, 1>(0, 3));
        return {eval(p), p};
    }
    const Eigen::Vector3d mid = 0.5 * (pa + pb);
    CollapseCandidate best{eval(mid), mid};  // midpoint wins ties
    if (const double ca = eval(pa); ca < best.cost) best = {ca, pa};
    if (const double cb = eval(pb); cb < best.cost) best = {cb, pb};
    return best;
}

MeshHierarchy build_hierarchy(const Mesh& tmpl, int num_levels, double factor) {
    if (num_levels < 1) throw HierarchyError("num_levels must be >= 1");
    if (!(factor > 1.0)) throw HierarchyError("factor must be > 1");
    MeshHierarchy h;
    h.levels.push_back(tmpl);
    for (int k = 1; k < num_levels; ++k) {
        const Mesh& fine = h.levels.back();
        const int target = std::max(4, static_cast<int>(std::lround(fine.vertex_count() / factor)));
        DecimationResult r = decimate(fine, target, k);
        h.levels.push_back(std::move(r.coarse));
        h.down_ops.push_back(std::move(r.down));
        h.up_ops.push_back(std::move(r.up));
    }
    return h;
}

Eigen::MatrixXd restrict(const Eigen::MatrixXd& features, const MeshHierarchy& hierarchy, int k) {
    if (k < 0 || k >= static_cast<int>(hierarchy.down_ops.size())) {
        throw HierarchyError("restrict: level out of range");
    }
    if (features.rows() != hierarchy.down_ops[static_cast<std::size_t>(k)].cols()) {
        throw HierarchyError("restrict: feature rows " + std::to_string(features.rows()) +
                             " do not match level vertex count " +
                             std::to_string(hierarchy.down_ops[static_cast<std::size_t>(k)].cols()));
    }
    return hierarchy.down_ops[static_cast<std::size_t>(k)] * features;
}

Eigen::MatrixXd prolong(const Eigen::MatrixXd& features, const MeshHierarchy& hierarchy, int k) {
    if (k < 0 || k >= static_cast<int>(hierarchy.up_ops.size())) {
        throw HierarchyError("prolong: level out of range");
    }
    if (features.rows() != hierarchy.up_ops[static_cast<std::size_t>(k)].cols()) {
        throw HierarchyError("prolong: feature rows " + std::to_string(features.rows()) +
                             " do not match level vertex count " +
                             std::to_string(hierarchy.up_ops[static_cast<std::size_t>(k)].cols()));
    }
    return hierarchy.up_ops[static_cast<std::size_t>(k)] * features;
}

std::uint64_t mesh_content_hash(const Mesh& mesh) {
    const int n = mesh.vertex_count();
    std::uint64_t h = fnv1a(&n, sizeof(n));
    h = fnv1a(mesh.vertices.data(), sizeof(double) * static_cast<std::size_t>(mesh.vertices.size()), h);
    h = fnv1a(mesh.faces.data(), sizeof(int) * static_cast<std::size_t>(mesh.faces.size()), h);
    return h;
}

namespace {

constexpr char kHierMagic[8] = {'D', 'M', 'H', 'R', '0', '0', '0', '1'};

template <typename T>
void write_pod(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
bool read_pod(std::istream& in, T* v) {
    return static_cast<bool>(in.read(reinterpret_cast<char*>(v), sizeof(T)));
}

void write_sparse(std::ostream& out, const Eigen::SparseMatrix<double>& m) {
    write_pod(out, static_cast<std::int64_t>(m.rows()));
    write_pod(out, static_cast<std::int64_t>(m.cols()));
    write_pod(out, static_cast<std::int64_t>(m.nonZeros()));
    for (int k = 0; k < m.outerSize(); ++k) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(m, k); it; ++it) {
            write_pod(out, static_cast<std::int32_t>(it.row()));
            write_pod(out, static_cast<std::int32_t>(it.col()));
            write_pod(out, it.value());
        }
    }
}

bool read_sparse(std::istream& in, Eigen::SparseMatrix<double>* m) {
    std::int64_t rows = 0, cols = 0, nnz = 0;
    if (!read_pod(in, &rows) || !read_pod(in, &cols) || !read_pod(in, &nnz)) return false;
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(static_cast<std::size_t>(nnz));
    for (std::int64_t i = 0; i < nnz; ++i) {
        std::int32_t r = 0, c = 0;
        double v = 0;
        if (!read_pod(in, &r) || !read_pod(in, &c) || !read_pod(in, &v)) return false;
        t.emplace_back(r, c, v);
    }
    m->resize(rows, cols);
    m->setFromTriplets(t.begin(), t.end());
    return true;
}

}  // namespace

void save_hierarchy(const MeshHierarchy& hierarchy, const std::string& path,
                    std::uint64_t template_hash, int num_levels, double factor) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw HierarchyError(path + ": cannot open for writing");
    out.write(kHierMagic, sizeof(kHierMagic));
    write_pod(out, template_hash);
    write_pod(out, static_cast<std::int32_t>(num_levels));
    write_pod(out, factor);
    write_pod(out, static_cast<std::int32_t>(hierarchy.levels.size()));
    for (const Mesh& level : hierarchy.levels) {
        write_pod(out, static_cast<std::int64_t>(level.vertex_count()));
        write_pod(out, static_cast<std::int64_t>(level.face_count()));
        out.write(reinterpret_cast<const char*>(level.vertices.data()),
                  static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(level.vertices.size())));
        out.write(reinterpret_cast<const char*>(level.faces.data()),
                  static_cast<std::streamsize>(sizeof(int) * static_cast<std::size_t>(level.faces.size())));
    }
    for (const auto& op : hierarchy.down_ops) write_sparse(out, op);
    for (const auto& op : hierarchy.up_ops) write_sparse(out, op);
    if (!out) throw HierarchyError(path + ": write failure");
}

bool load_hierarchy(const std::string& path, std::uint64_t template_hash, int num_levels,
                    double factor, MeshHierarchy* out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return false;
    char magic[8];
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kHierMagic, sizeof(magic)) != 0) {
        return false;
    }
    std::uint64_t hash = 0;
    std::int32_t levels = 0;
    double f = 0;
    if (!read_pod(in, &hash) || !read_pod(in, &levels) || !read_pod(in, &f)) return false;
    if (hash != template_hash || levels != num_levels || f != factor) return false;
    std::int32_t stored = 0;
    if (!read_pod(in, &stored)) return false;
    MeshHierarchy h;
    for (std::int32_t k = 0; k < stored; ++k) {
        std::int64_t nv = 0, nf = 0;
        if (!read_pod(in, &nv) || !read_pod(in, &nf)) return false;
        VertexMatrix v(nv, 3);
        FaceMatrix fm(nf, 3);
        if (!in.read(reinterpret_cast<char*>(v.data()),
                     static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(v.size()))))
            return false;
        if (!in.read(reinterpret_cast<char*>(fm.data()),
                     static_cast<std::streamsize>(sizeof(int) * static_cast<std::size_t>(fm.size()))))
            return false;
        h.levels.push_back(make_mesh(std::move(v), std::move(fm)));
    }
    h.down_ops.resize(static_cast<std::size_t>(stored - 1));
    h.up_ops.resize(static_cast<std::size_t>(stored - 1));
    for (auto& op : h.down_ops) {
        if (!read_sparse(in, &op)) return false;
    }
    for (auto& op : h.up_ops) {
        if (!read_sparse(in, &op)) return false;
    }
    *out = std::move(h);
    return true;
}

}  // namespace dismesh
