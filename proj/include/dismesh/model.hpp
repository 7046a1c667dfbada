#pragma once

#include "dismesh/hierarchy.hpp"
#include "dismesh/mesh.hpp"
#include "dismesh/spiral.hpp"
#include "dismesh/tensor.hpp"

#include <Eigen/SparseCore>

#include <cstdint>
#include <string>
#include <vector>

namespace dismesh {

struct ModelConfig {
    int latent_shape_dim = 16;
    int latent_pose_dim = 112;
    std::vector<int> channels = {16, 32, 64, 128};        // encoder stage outputs
    std::vector<int> spiral_lengths = {10, 8, 6, 5};      // per hierarchy level
    double leaky_slope = 0.02;
    double hierarchy_factor = 4.0;

    int num_stages() const { return static_cast<int>(channels.size()); }
    int num_levels() const { return num_stages() + 1; }
    int latent_dim() const { return latent_shape_dim + latent_pose_dim; }

    std::string to_json() const;
    static ModelConfig from_json(const std::string& text);
    std::uint64_t hash() const;
    void validate() const;
};

// Immutable per-topology state shared by every model instance: the template,
// its multiresolution hierarchy and the spiral sequences of each level.
struct TemplateContext {
    Mesh template_mesh;
    MeshHierarchy hierarchy;
    std::vector<SpiralSet> spirals;  // one per conv level, finest first
    std::uint64_t template_hash = 0;
};

TemplateContext make_template_context(const Mesh& tmpl, const ModelConfig& config);
TemplateContext make_template_context(Mesh tmpl, MeshHierarchy hierarchy,
                                      const ModelConfig& config);

// S * x with a constant sparse operator; gradients flow into x only. The
// operator must outlive the tape.
Tensor sparse_matmul(Tape& tape, const Eigen::SparseMatrix<double>& op, const Tensor& x);

// Gather the spiral neighborhood of every vertex, concatenate the rows and
// apply a shared linear map plus bias. Padding slots contribute zeros.
Tensor spiral_conv(Tape& tape, const Tensor& features, const SpiralSet& spirals,
                   const Tensor& weight, const Tensor& bias);

Tensor vertices_tensor(const Mesh& mesh);
Mesh mesh_from_tensor(const Tensor& verts, const Mesh& topology_source);

// Tape-level interface the losses are written against; the production model
// and test stubs both implement it.
class PoseShapeCodec {
public:
    virtual ~PoseShapeCodec() = default;
    virtual Tensor encode_shape(Tape& tape, const Mesh& mesh) = 0;
    virtual Tensor encode_pose(Tape& tape, const Mesh& mesh) = 0;
    virtual Tensor decode(Tape& tape, const Tensor& beta, const Tensor& theta) = 0;
    virtual const Mesh& template_mesh() const = 0;
};

// Dual-branch spiral-convolution autoencoder. The shape and pose encoders
// have the same stage topology but disjoint parameters; the decoder mirrors
// the encoder with prolongation in place of restriction.
class DisentangleModel : public PoseShapeCodec {
public:
    DisentangleModel(const TemplateContext* context, ModelConfig config, std::uint64_t init_seed);

    Tensor encode_shape(Tape& tape, const Mesh& mesh) override;
    Tensor encode_pose(Tape& tape, const Mesh& mesh) override;
    Tensor decode(Tape& tape, const Tensor& beta, const Tensor& theta) override;
    const Mesh& template_mesh() const override { return context_->template_mesh; }

    // tensor-level entry points (used by the losses and the tests)
    Tensor encode_shape_t(Tape& tape, const Tensor& verts);
    Tensor encode_pose_t(Tape& tape, const Tensor& verts);

    // value-only conveniences
    std::pair<Eigen::VectorXd, Eigen::VectorXd> encode(const Mesh& mesh);
    Mesh decode_mesh(const Eigen::VectorXd& beta, const Eigen::VectorXd& theta);

    const std::vector<std::pair<std::string, Tensor>>& named_params() const { return params_; }
    std::vector<Tensor> param_tensors() const;
    void load_named_tensors(const std::vector<std::pair<std::string, Mat>>& tensors);

    const ModelConfig& config() const { return config_; }
    const TemplateContext& context() const { return *context_; }

private:
    struct Branch {
        std::vector<Tensor> conv_w, conv_b;
        Tensor fc_w, fc_b;
    };

    Tensor run_encoder(Tape& tape, const Tensor& verts, const Branch& branch);
    Tensor register_param(const std::string& name, Eigen::Index rows, Eigen::Index cols,
                          class Rng& rng, bool zero);

    const TemplateContext* context_;
    ModelConfig config_;
    Branch shape_enc_, pose_enc_;
    Branch decoder_;  // conv_w/b indexed by level, fc maps latent to the coarse grid
    std::vector<std::pair<std::string, Tensor>> params_;
};

}  // namespace dismesh
