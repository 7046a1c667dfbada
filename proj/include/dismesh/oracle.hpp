#pragma once

#include "dismesh/dataset.hpp"
#include "dismesh/mesh.hpp"
#include "dismesh/rng.hpp"

#include <Eigen/Core>

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace dismesh {

// Procedural articulated creature used as evaluation ground truth: a
// star-shaped body (torso plus four limbs) over an icosphere domain. The
// radial profile is linear in eight shape factors, and each limb region is
// rigidly rotated about its joint by two fixed-axis angles, so both factor
// sets can be recovered from a mesh by closed-form fitting. Shape factors are
// untouched by posing, and any (shape, pose) combination can be rendered,
// which gives exact targets for pose transfer.
class CreatureOracle {
public:
    static constexpr int kShapeDims = 8;
    static constexpr int kPoseDims = 8;
    static constexpr int kNumLimbs = 4;

    CreatureOracle();

    // Deterministic render, centered at the origin.
    Mesh generate(const Eigen::VectorXd& shape, const Eigen::VectorXd& pose) const;

    const Mesh& template_mesh() const { return template_mesh_; }
    Eigen::VectorXd default_shape() const;

    Eigen::VectorXd sample_shape(Rng& rng) const;
    Eigen::VectorXd sample_pose(Rng& rng) const;

    struct Fit {
        Eigen::VectorXd shape;
        Eigen::VectorXd pose;
        double residual = 0.0;  // mean vertex distance of the refit render
    };
    // Closed-form shape/pose recovery; exact on rendered meshes, least-squares
    // on arbitrary vertex data with the template connectivity.
    Fit fit_factors(const Mesh& mesh, int refine_iterations = 2) const;

    // Fixed-axis angles to concatenated unit quaternions, one per angle.
    static Eigen::VectorXd pose_to_quaternions(const Eigen::VectorXd& pose);

private:
    Eigen::MatrixXd basis_;                  // N x 8 radial basis
    Eigen::Matrix<double, Eigen::Dynamic, 3> dirs_;
    std::vector<int> region_;                // -1 body, else limb index
    std::vector<std::vector<int>> limb_vertices_;
    std::vector<int> body_vertices_;
    Eigen::Vector3d limb_dir_[kNumLimbs];
    Eigen::Vector3d limb_axis1_[kNumLimbs];
    Eigen::Vector3d limb_axis2_[kNumLimbs];
    Eigen::Matrix<double, 1, kShapeDims> joint_coeff_[kNumLimbs];  // c_k = (coeff . s) * dir
    Mesh template_mesh_;

    Eigen::Vector3d joint_center(const Eigen::VectorXd& shape, int limb) const;
    Eigen::Matrix3d limb_rotation(const Eigen::VectorXd& pose, int limb) const;
    VertexMatrix rest_vertices(const Eigen::VectorXd& shape) const;
};

struct OracleFactors {
    std::map<std::string, Eigen::VectorXd> subject_shape;
    std::map<std::string, Eigen::VectorXd> mesh_pose;
    std::map<std::string, std::string> mesh_subject;
};

void save_factors(const OracleFactors& factors, const std::string& path);
OracleFactors load_factors(const std::string& path);

// Writes the template, per-mesh PLY files, the dataset manifest and the
// factor table under out_dir. Poses are sampled per mesh, shape per subject.
struct GeneratedDataset {
    DatasetIndex index;
    OracleFactors factors;
    std::string factors_path;
};
GeneratedDataset generate_dataset(const CreatureOracle& oracle, int num_subjects,
                                  int poses_per_subject, std::uint64_t seed,
                                  const std::string& out_dir);

}  // namespace dismesh
