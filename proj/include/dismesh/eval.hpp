#pragma once

#include "dismesh/dataset.hpp"
#include "dismesh/model.hpp"
#include "dismesh/oracle.hpp"

#include <Eigen/Core>

#include <optional>
#include <string>
#include <vector>

namespace dismesh {

// Mean vertex-to-vertex distance after centering both meshes (the decoder's
// global translation is unconstrained).
double mean_vertex_error_centered(const Mesh& a, const Mesh& b);

// Value-only encode/decode round trips through the codec interface.
std::pair<Eigen::VectorXd, Eigen::VectorXd> codec_encode(PoseShapeCodec& codec, const Mesh& mesh);
Mesh codec_decode(PoseShapeCodec& codec, const Eigen::VectorXd& beta,
                  const Eigen::VectorXd& theta);

// decode(shape code of shape_src, pose code of pose_src)
Mesh pose_transfer(PoseShapeCodec& codec, const Mesh& shape_src, const Mesh& pose_src);

double pose_transfer_error(PoseShapeCodec& codec, const Mesh& shape_src, const Mesh& pose_src,
                           const Mesh& ground_truth);

// Principal components of a code population (rows are samples). Fit on the
// training split only; evaluation codes are projected, never refit.
class Pca {
public:
    void fit(const Eigen::MatrixXd& rows, int dims);
    Eigen::MatrixXd project(const Eigen::MatrixXd& rows) const;
    int dims() const { return static_cast<int>(components_.cols()); }

private:
    Eigen::RowVectorXd mean_;
    Eigen::MatrixXd components_;  // input_dim x dims
};

struct CodeTable {
    std::vector<std::string> mesh_ids;
    Eigen::MatrixXd shape_codes;  // one row per mesh id
    Eigen::MatrixXd pose_codes;
};

CodeTable encode_codes(PoseShapeCodec& codec, const LoadedDataset& data,
                       const std::vector<int>& record_indices);

enum class CodeChoice { Shape, Pose };

struct RetrievalResult {
    std::string query_id;
    std::string neighbor_id;
    double e_shape = 0.0;
    double e_pose = 0.0;
};

// Nearest neighbor of the query row among the gallery rows by Euclidean
// distance in the chosen code (optionally PCA-projected), scored against the
// oracle factors. The query must not be in the gallery.
RetrievalResult retrieve(const CodeTable& table, const OracleFactors& factors, int query_row,
                         const std::vector<int>& gallery_rows, CodeChoice code,
                         const Pca* pca = nullptr);

// Linear interpolation of one code, the other held at the source's value;
// steps >= 2, endpoints included.
std::vector<Mesh> interpolate(PoseShapeCodec& codec, const Mesh& source, const Mesh& target,
                              CodeChoice component, int steps);

// Factor-space summary of the whole benchmark; serialized to JSON by the CLI.
struct BenchReport {
    double transfer_mean = 0.0;
    double transfer_median = 0.0;
    std::vector<double> transfer_per_pair;
    // mean factor errors by retrieval code: [shape_code][shape_err|pose_err]
    double retrieval_e_shape_by_beta = 0.0;
    double retrieval_e_pose_by_beta = 0.0;
    double retrieval_e_shape_by_theta = 0.0;
    double retrieval_e_pose_by_theta = 0.0;
    std::vector<double> pose_interp_shape_drift;   // per sequence
    std::vector<double> shape_interp_pose_drift;   // per sequence
    double shape_spread = 0.0;  // RMS pairwise distance of subject shape factors
    double pose_spread = 0.0;
};

std::string bench_report_json(const BenchReport& report);

}  // namespace dismesh
