#include "dismesh/oracle.hpp"

#include "dismesh/arap.hpp"
#include "dismesh/mesh_io.hpp"

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace dismesh {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kAlphaCut = 0.45;   // limb region half-angle (radians)
constexpr double kAlphaWide = 0.75;  // girth bump half-angle
constexpr double kElevation = 40.0 * M_PI / 180.0;

// icosphere with midpoint subdivision, projected to the unit sphere
void build_icosphere(int subdivisions, VertexMatrix* vertices, FaceMatrix* faces) {
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Eigen::Vector3d> v = {
        {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
        {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
    for (auto& p : v) p.normalize();
    std::vector<std::array<int, 3>> f = {
        {0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11},
        {1, 5, 9}, {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
        {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8}, {3, 8, 9},
        {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1}};
    for (int s = 0; s < subdivisions; ++s) {
        std::map<std::pair<int, int>, int> midpoint;
        auto mid = [&](int a, int b) {
            auto key = std::minmax(a, b);
            auto it = midpoint.find({key.first, key.second});
            if (it != midpoint.end()) return it->second;
            const int idx = static_cast<int>(v.size());
            v.push_back((0.5 * (v[static_cast<std::size_t>(a)] + v[static_cast<std::size_t>(b)])).normalized());
            midpoint[{key.first, key.second}] = idx;
            return idx;
        };
        std::vector<std::array<int, 3>> next;
        next.reserve(f.size() * 4);
        for (const auto& tri : f) {
            const int ab = mid(tri[0], tri[1]);
            const int bc = mid(tri[1], tri[2]);
            const int ca = mid(tri[2], tri[0]);
            next.push_back({tri[0], ab, ca});
            next.push_back({tri[1], bc, ab});
            next.push_back({tri[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        f = std::move(next);
    }
    vertices->resize(static_cast<Eigen::Index>(v.size()), 3);
    for (std::size_t i = 0; i < v.size(); ++i) vertices->row(static_cast<Eigen::Index>(i)) = v[i].transpose();
    faces->resize(static_cast<Eigen::Index>(f.size()), 3);
    for (std::size_t i = 0; i < f.size(); ++i) {
        faces->row(static_cast<Eigen::Index>(i)) << f[i][0], f[i][1], f[i][2];
    }
}

double cap_bump(double cos_angle, double cos_cut) {
    if (cos_angle <= cos_cut) return 0.0;
    const double x = (cos_angle - cos_cut) / (1.0 - cos_cut);
    return x * x;
}

}  // namespace

CreatureOracle::CreatureOracle() {
    VertexMatrix sphere;
    FaceMatrix faces;
    build_icosphere(3, &sphere, &faces);
    const int n = static_cast<int>(sphere.rows());
    dirs_ = sphere;

    const double azimuths[kNumLimbs] = {M_PI / 4, 3 * M_PI / 4, 5 * M_PI / 4, 7 * M_PI / 4};
    for (int k = 0; k < kNumLimbs; ++k) {
        limb_dir_[k] = Eigen::Vector3d(std::cos(kElevation) * std::cos(azimuths[k]),
                                       std::cos(kElevation) * std::sin(azimuths[k]),
                                       -std::sin(kElevation));
        limb_axis1_[k] = limb_dir_[k].cross(Eigen::Vector3d::UnitZ()).normalized();
        limb_axis2_[k] = limb_dir_[k].cross(limb_axis1_[k]).normalized();
    }

    basis_.resize(n, kShapeDims);
    region_.assign(static_cast<std::size_t>(n), -1);
    limb_vertices_.resize(kNumLimbs);
    const double cos_cut = std::cos(kAlphaCut);
    const double cos_wide = std::cos(kAlphaWide);
    for (int i = 0; i < n; ++i) {
        const Eigen::Vector3d d = dirs_.row(i).transpose();
        basis_(i, 0) = 1.0;
        basis_(i, 1) = d.x() * d.x();
        double wide_front = 0.0, wide_back = 0.0;
        for (int k = 0; k < kNumLimbs; ++k) {
            const double c = d.dot(limb_dir_[k]);
            basis_(i, 2 + k) = cap_bump(c, cos_cut);
            const double wide = cap_bump(c, cos_wide);
            (k < 2 ? wide_front : wide_back) += wide;
            if (c > cos_cut) {
                region_[static_cast<std::size_t>(i)] = k;
            }
        }
        basis_(i, 6) = wide_front;
        basis_(i, 7) = wide_back;
        if (region_[static_cast<std::size_t>(i)] >= 0) {
            limb_vertices_[static_cast<std::size_t>(region_[static_cast<std::size_t>(i)])].push_back(i);
        } else {
            body_vertices_.push_back(i);
        }
    }

    // joint center along the limb axis from the non-limb-length columns
    for (int k = 0; k < kNumLimbs; ++k) {
        const Eigen::Vector3d d = limb_dir_[k];
        joint_coeff_[k].setZero();
        joint_coeff_[k](0, 0) = 1.0;
        joint_coeff_[k](0, 1) = d.x() * d.x();
        joint_coeff_[k](0, 6 + (k < 2 ? 0 : 1)) = cap_bump(1.0, cos_wide);
    }

    Mesh raw = make_mesh(sphere, faces);  // placeholder vertices, correct topology
    template_mesh_ = raw;
    const Eigen::VectorXd s0 = default_shape();
    template_mesh_.vertices = rest_vertices(s0);
    template_mesh_ = center(template_mesh_);
}

Eigen::VectorXd CreatureOracle::default_shape() const {
    Eigen::VectorXd s(kShapeDims);
    s << 1.0, 0.3, 0.55, 0.55, 0.55, 0.55, 0.18, 0.18;
    return s;
}

Eigen::VectorXd CreatureOracle::sample_shape(Rng& rng) const {
    Eigen::VectorXd s = default_shape();
    for (int j = 0; j < kShapeDims; ++j) s[j] *= 1.0 + rng.uniform(-0.35, 0.35);
    return s;
}

Eigen::VectorXd CreatureOracle::sample_pose(Rng& rng) const {
    Eigen::VectorXd p(kPoseDims);
    for (int j = 0; j < kPoseDims; ++j) p[j] = rng.uniform(-0.7, 0.7);
    return p;
}

Eigen::Vector3d CreatureOracle::joint_center(const Eigen::VectorXd& shape, int limb) const {
    return (joint_coeff_[limb] * shape).value() * limb_dir_[limb];
}

Eigen::Matrix3d CreatureOracle::limb_rotation(const Eigen::VectorXd& pose, int limb) const {
    const double a1 = pose[2 * limb];
    const double a2 = pose[2 * limb + 1];
    return (Eigen::AngleAxisd(a2, limb_axis2_[limb]) * Eigen::AngleAxisd(a1, limb_axis1_[limb]))
        .toRotationMatrix();
}

VertexMatrix CreatureOracle::rest_vertices(const Eigen::VectorXd& shape) const {
    const Eigen::VectorXd radii = basis_ * shape;
    VertexMatrix v(dirs_.rows(), 3);
    for (Eigen::Index i = 0; i < dirs_.rows(); ++i) v.row(i) = radii[i] * dirs_.row(i);
    return v;
}

Mesh CreatureOracle::generate(const Eigen::VectorXd& shape, const Eigen::VectorXd& pose) const {
    if (shape.size() != kShapeDims || pose.size() != kPoseDims) {
        throw MeshError("oracle: factor vectors must have 8 shape and 8 pose entries");
    }
    Mesh out = template_mesh_;
    VertexMatrix rest = rest_vertices(shape);
    Eigen::Matrix3d rot[kNumLimbs];
    Eigen::Vector3d joint[kNumLimbs];
    for (int k = 0; k < kNumLimbs; ++k) {
        rot[k] = limb_rotation(pose, k);
        joint[k] = joint_center(shape, k);
    }
    for (Eigen::Index i = 0; i < rest.rows(); ++i) {
        const int k = region_[static_cast<std::size_t>(i)];
        if (k < 0) {
            out.vertices.row(i) = rest.row(i);
        } else {
            const Eigen::Vector3d p =
                joint[k] + rot[k] * (rest.row(i).transpose() - joint[k]);
            out.vertices.row(i) = p.transpose();
        }
    }
    return center(out);
}

CreatureOracle::Fit CreatureOracle::fit_factors(const Mesh& mesh, int refine_iterations) const {
    if (mesh.topology_id != template_mesh_.topology_id) {
        throw MeshError("oracle fit: topology mismatch");
    }
    const Eigen::Index n = dirs_.rows();

    // 1) body-only linear fit of the non-limb-length factors plus the
    //    centering translation; body vertices are pose-independent
    const int body_cols[4] = {0, 1, 6, 7};
    Eigen::MatrixXd a(3 * static_cast<Eigen::Index>(body_vertices_.size()), 7);
    Eigen::VectorXd rhs(a.rows());
    for (std::size_t bi = 0; bi < body_vertices_.size(); ++bi) {
        const int i = body_vertices_[bi];
        const Eigen::Vector3d d = dirs_.row(i).transpose();
        for (int c = 0; c < 3; ++c) {
            const Eigen::Index row = static_cast<Eigen::Index>(3 * bi + static_cast<std::size_t>(c));
            for (int j = 0; j < 4; ++j) a(row, j) = basis_(i, body_cols[j]) * d[c];
            a.block(row, 4, 1, 3).setZero();
            a(row, 4 + c) = -1.0;
            rhs(row) = mesh.vertices(i, c);
        }
    }
    Eigen::VectorXd body_sol = a.colPivHouseholderQr().solve(rhs);
    Eigen::VectorXd shape = Eigen::VectorXd::Zero(kShapeDims);
    for (int j = 0; j < 4; ++j) shape[body_cols[j]] = body_sol[j];
    Eigen::Vector3d translation = body_sol.segment<3>(4);

    Eigen::VectorXd pose = Eigen::VectorXd::Zero(kPoseDims);
    Eigen::Matrix3d rot[kNumLimbs];
    for (int k = 0; k < kNumLimbs; ++k) rot[k].setIdentity();

    for (int pass = 0; pass < std::max(1, refine_iterations); ++pass) {
        // 2) limb lengths from rotation-invariant distances to the joint
        for (int k = 0; k < kNumLimbs; ++k) {
            const Eigen::Vector3d c = joint_center(shape, k);
            const double c2 = c.squaredNorm();
            double num = 0.0, den = 0.0;
            for (int i : limb_vertices_[static_cast<std::size_t>(k)]) {
                const Eigen::Vector3d d = dirs_.row(i).transpose();
                const Eigen::Vector3d obs = mesh.vertices.row(i).transpose() + translation;
                const double gamma = d.dot(c);
                const double dist2 = (obs - c).squaredNorm();
                const double under = std::max(0.0, gamma * gamma - c2 + dist2);
                const double rho = gamma + std::sqrt(under);  // rest radius estimate
                // rho = (known radial part) + s_k * bump
                double known = 0.0;
                for (int j = 0; j < kShapeDims; ++j) {
                    if (j != 2 + k) known += basis_(i, j) * shape[j];
                }
                const double bump = basis_(i, 2 + k);
                num += bump * (rho - known);
                den += bump * bump;
            }
            shape[2 + k] = den > 0.0 ? num / den : 0.0;
        }

        // 3) per-limb rotation by weighted point alignment about the joint
        VertexMatrix rest = rest_vertices(shape);
        for (int k = 0; k < kNumLimbs; ++k) {
            const Eigen::Vector3d c = joint_center(shape, k);
            std::vector<Eigen::Vector3d> from, to;
            std::vector<double> w;
            for (int i : limb_vertices_[static_cast<std::size_t>(k)]) {
                from.emplace_back(rest.row(i).transpose() - c);
                to.emplace_back(mesh.vertices.row(i).transpose() + translation - c);
                w.push_back(1.0);
            }
            rot[k] = fit_rotation(from, to, w);
            // R = Rot(axis2, a2) * Rot(axis1, a1) in the joint frame
            Eigen::Matrix3d frame;
            frame.col(0) = limb_axis1_[k];
            frame.col(1) = limb_axis2_[k];
            frame.col(2) = limb_axis1_[k].cross(limb_axis2_[k]);
            const Eigen::Matrix3d r = frame.transpose() * rot[k] * frame;
            pose[2 * k] = std::atan2(-r(1, 2), r(1, 1));
            pose[2 * k + 1] = std::atan2(-r(2, 0), r(0, 0));
        }

        // 4) full linear refit of every shape factor from un-posed vertices,
        //    then the translation from the residual mean
        Eigen::MatrixXd full(3 * n, kShapeDims);
        Eigen::VectorXd frhs(3 * n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const int k = region_[static_cast<std::size_t>(i)];
            const Eigen::Vector3d d = dirs_.row(i).transpose();
            Eigen::Vector3d obs = mesh.vertices.row(i).transpose() + translation;
            if (k >= 0) {
                const Eigen::Vector3d c = joint_center(shape, k);
                obs = c + rot[k].transpose() * (obs - c);
            }
            for (int cc = 0; cc < 3; ++cc) {
                for (int j = 0; j < kShapeDims; ++j) full(3 * i + cc, j) = basis_(i, j) * d[cc];
                frhs(3 * i + cc) = obs[cc];
            }
        }
        shape = full.colPivHouseholderQr().solve(frhs);

        // translation refinement from the pose-independent body vertices
        VertexMatrix refit_rest = rest_vertices(shape);
        Eigen::Vector3d t_acc = Eigen::Vector3d::Zero();
        for (int i : body_vertices_) {
            t_acc += refit_rest.row(i).transpose() - mesh.vertices.row(i).transpose();
        }
        translation = t_acc / static_cast<double>(body_vertices_.size());
    }

    Fit fit;
    fit.shape = shape;
    fit.pose = pose;
    Mesh render = generate(shape, pose);
    fit.residual = (render.vertices - center(mesh).vertices).rowwise().norm().mean();
    return fit;
}

Eigen::VectorXd CreatureOracle::pose_to_quaternions(const Eigen::VectorXd& pose) {
    if (pose.size() != kPoseDims) throw MeshError("pose_to_quaternions: expected 8 angles");
    // one unit quaternion per angle about that joint's fixed axis; only the
    // half-angle functions matter for the metric, axes are constant
    Eigen::VectorXd q(4 * kPoseDims);
    for (int j = 0; j < kPoseDims; ++j) {
        const double half = 0.5 * pose[j];
        q[4 * j] = std::cos(half);
        q[4 * j + 1] = std::sin(half);  // axis direction is fixed per joint
        q[4 * j + 2] = 0.0;
        q[4 * j + 3] = 0.0;
    }
    return q;
}

void save_factors(const OracleFactors& factors, const std::string& path) {
    json subjects = json::object();
    for (const auto& [id, s] : factors.subject_shape) {
        subjects[id] = std::vector<double>(s.data(), s.data() + s.size());
    }
    json meshes = json::object();
    for (const auto& [id, p] : factors.mesh_pose) {
        meshes[id] = {{"subject", factors.mesh_subject.at(id)},
                      {"pose", std::vector<double>(p.data(), p.data() + p.size())}};
    }
    json doc = {{"subjects", subjects}, {"meshes", meshes}};
    std::ofstream out(path);
    if (!out) throw MeshError(path + ": cannot write factors");
    out << doc.dump(2) << "\n";
}

OracleFactors load_factors(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MeshError(path + ": cannot open factors");
    json doc;
    in >> doc;
    OracleFactors f;
    for (const auto& [id, arr] : doc.at("subjects").items()) {
        std::vector<double> v = arr.get<std::vector<double>>();
        f.subject_shape[id] = Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    }
    for (const auto& [id, rec] : doc.at("meshes").items()) {
        std::vector<double> v = rec.at("pose").get<std::vector<double>>();
        f.mesh_pose[id] = Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
        f.mesh_subject[id] = rec.at("subject").get<std::string>();
    }
    return f;
}

GeneratedDataset generate_dataset(const CreatureOracle& oracle, int num_subjects,
                                  int poses_per_subject, std::uint64_t seed,
                                  const std::string& out_dir) {
    if (num_subjects < 2 || poses_per_subject < 2) {
        throw MeshError("generate_dataset: need at least 2 subjects and 2 poses per subject");
    }
    fs::create_directories(fs::path(out_dir) / "meshes");
    GeneratedDataset out;
    out.index.topology_path = "template.ply";
    save_mesh(oracle.template_mesh(), (fs::path(out_dir) / "template.ply").string());

    char buf[64];
    for (int s = 0; s < num_subjects; ++s) {
        std::snprintf(buf, sizeof(buf), "s%03d", s);
        const std::string subject_id = buf;
        Rng shape_rng(mix_seed(seed, static_cast<std::uint64_t>(s) * 2 + 1));
        const Eigen::VectorXd shape = oracle.sample_shape(shape_rng);
        out.factors.subject_shape[subject_id] = shape;
        auto& slots = out.index.by_subject[subject_id];
        for (int p = 0; p < poses_per_subject; ++p) {
            std::snprintf(buf, sizeof(buf), "%s_p%03d", subject_id.c_str(), p);
            const std::string mesh_id = buf;
            Rng pose_rng(mix_seed(mix_seed(seed, static_cast<std::uint64_t>(s)),
                                  static_cast<std::uint64_t>(p) + 17));
            const Eigen::VectorXd pose = oracle.sample_pose(pose_rng);
            const Mesh mesh = oracle.generate(shape, pose);
            const std::string rel = "meshes/" + mesh_id + ".ply";
            save_mesh(mesh, (fs::path(out_dir) / rel).string());
            MeshRecord rec;
            rec.mesh_id = mesh_id;
            rec.subject_id = subject_id;
            rec.path = rel;
            slots.push_back(out.index.size());
            out.index.records.push_back(rec);
            out.factors.mesh_pose[mesh_id] = pose;
            out.factors.mesh_subject[mesh_id] = subject_id;
        }
    }
    const std::string manifest = (fs::path(out_dir) / "index.json").string();
    save_dataset_index(out.index, manifest);
    out.index.manifest_path = manifest;
    out.factors_path = (fs::path(out_dir) / "factors.json").string();
    save_factors(out.factors, out.factors_path);
    return out;
}

}  // namespace dismesh
