#include "dismesh/eval.hpp"

#include <Eigen/Dense>

#include <json.hpp>

#include <algorithm>

namespace dismesh {

using nlohmann::json;

double mean_vertex_error_centered(const Mesh& a, const Mesh& b) {
    if (a.topology_id != b.topology_id) throw MeshError("vertex error: topology mismatch");
    const Mesh ca = center(a), cb = center(b);
    return (ca.vertices - cb.vertices).rowwise().norm().mean();
}

Mesh pose_transfer(DisentangleModel& model, const Mesh& shape_src, const Mesh& pose_src) {
    auto [beta_s, theta_s] = model.encode(center(shape_src));
    auto [beta_p, theta_p] = model.encode(center(pose_src));
    (void)theta_s;
    (void)beta_p;
    return model.decode_mesh(beta_s, theta_p);
}

double pose_transfer_error(DisentangleModel& model, const Mesh& shape_src, const Mesh& pose_src,
                           const Mesh& ground_truth) {
    return mean_vertex_error_centered(pose_transfer(model, shape_src, pose_src), ground_truth);
}

void Pca::fit(const Eigen::MatrixXd& rows, int dims) {
    if (rows.rows() < 2) throw MeshError("pca: need at least 2 samples");
    dims = std::min<int>(dims, static_cast<int>(rows.cols()));
    mean_ = rows.colwise().mean();
    Eigen::MatrixXd centered = rows.rowwise() - mean_;
    Eigen::MatrixXd cov =
        centered.transpose() * centered / static_cast<double>(rows.rows() - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    // eigenvalues ascending; take the top `dims` columns in descending order
    components_.resize(rows.cols(), dims);
    for (int d = 0; d < dims; ++d) {
        components_.col(d) = eig.eigenvectors().col(rows.cols() - 1 - d);
    }
}

Eigen::MatrixXd Pca::project(const Eigen::MatrixXd& rows) const {
    if (components_.size() == 0) throw MeshError("pca: project before fit");
    return (rows.rowwise() - mean_) * components_;
}

CodeTable encode_codes(DisentangleModel& model, const LoadedDataset& data,
                       const std::vector<int>& record_indices) {
    CodeTable table;
    table.mesh_ids.reserve(record_indices.size());
    table.shape_codes.resize(static_cast<Eigen::Index>(record_indices.size()),
                             model.config().latent_shape_dim);
    table.pose_codes.resize(static_cast<Eigen::Index>(record_indices.size()),
                            model.config().latent_pose_dim);
    for (std::size_t i = 0; i < record_indices.size(); ++i) {
        const int r = record_indices[i];
        const Mesh& mesh = data.meshes[static_cast<std::size_t>(r)];
        auto [beta, theta] = model.encode(center(mesh));
        table.mesh_ids.push_back(data.index.records[static_cast<std::size_t>(r)].mesh_id);
        table.shape_codes.row(static_cast<Eigen::Index>(i)) = beta.transpose();
        table.pose_codes.row(static_cast<Eigen::Index>(i)) = theta.transpose();
    }
    return table;
}

RetrievalResult retrieve(const CodeTable& table, const OracleFactors& factors, int query_row,
                         const std::vector<int>& gallery_rows, CodeChoice code, const Pca* pca) {
    if (gallery_rows.empty()) throw MeshError("retrieve: empty gallery");
    const Eigen::MatrixXd& codes = code == CodeChoice::Shape ? table.shape_codes : table.pose_codes;
    Eigen::MatrixXd space = pca ? pca->project(codes) : codes;

    const Eigen::RowVectorXd q = space.row(query_row);
    double best = std::numeric_limits<double>::infinity();
    int best_row = -1;
    for (int g : gallery_rows) {
        if (g == query_row) throw MeshError("retrieve: query present in gallery");
        const double d = (space.row(g) - q).squaredNorm();
        if (d < best || (d == best && g < best_row)) {
            best = d;
            best_row = g;
        }
    }
    RetrievalResult result;
    result.query_id = table.mesh_ids[static_cast<std::size_t>(query_row)];
    result.neighbor_id = table.mesh_ids[static_cast<std::size_t>(best_row)];
    const auto& qs = factors.subject_shape.at(factors.mesh_subject.at(result.query_id));
    const auto& ns = factors.subject_shape.at(factors.mesh_subject.at(result.neighbor_id));
    result.e_shape = (qs - ns).norm();
    const auto qq = CreatureOracle::pose_to_quaternions(factors.mesh_pose.at(result.query_id));
    const auto nq = CreatureOracle::pose_to_quaternions(factors.mesh_pose.at(result.neighbor_id));
    result.e_pose = (qq - nq).norm();
    return result;
}

std::vector<Mesh> interpolate(DisentangleModel& model, const Mesh& source, const Mesh& target,
                              CodeChoice component, int steps) {
    if (steps < 2) throw MeshError("interpolate: steps must be >= 2");
    auto [beta_s, theta_s] = model.encode(center(source));
    auto [beta_t, theta_t] = model.encode(center(target));
    std::vector<Mesh> out;
    out.reserve(static_cast<std::size_t>(steps));
    for (int i = 0; i < steps; ++i) {
        const double u = static_cast<double>(i) / static_cast<double>(steps - 1);
        if (component == CodeChoice::Shape) {
            out.push_back(model.decode_mesh((1.0 - u) * beta_s + u * beta_t, theta_s));
        } else {
            out.push_back(model.decode_mesh(beta_s, (1.0 - u) * theta_s + u * theta_t));
        }
    }
    return out;
}

std::string bench_report_json(const BenchReport& report) {
    json doc = {
        {"pose_transfer",
         {{"mean", report.transfer_mean},
          {"median", report.transfer_median},
          {"per_pair", report.transfer_per_pair}}},
        {"retrieval",
         {{"by_shape_code", {{"e_shape", report.retrieval_e_shape_by_beta},
                             {"e_pose", report.retrieval_e_pose_by_beta}}},
          {"by_pose_code", {{"e_shape", report.retrieval_e_shape_by_theta},
                            {"e_pose", report.retrieval_e_pose_by_theta}}}}},
        {"interpolation",
         {{"pose_interp_shape_drift", report.pose_interp_shape_drift},
          {"shape_interp_pose_drift", report.shape_interp_pose_drift},
          {"shape_spread", report.shape_spread},
          {"pose_spread", report.pose_spread}}}};
    return doc.dump(2);
}

}  // namespace dismesh
