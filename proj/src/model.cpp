#include "dismesh/model.hpp"

#include "dismesh/rng.hpp"

#include <json.hpp>

#include <cmath>
#include <map>

namespace dismesh {

using nlohmann::json;

std::string ModelConfig::to_json() const {
    json doc = {{"latent_shape_dim", latent_shape_dim},
                {"latent_pose_dim", latent_pose_dim},
                {"channels", channels},
                {"spiral_lengths", spiral_lengths},
                {"leaky_slope", leaky_slope},
                {"hierarchy_factor", hierarchy_factor}};
    return doc.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
    json doc = json::parse(text);
    ModelConfig cfg;
    cfg.latent_shape_dim = doc.at("latent_shape_dim").get<int>();
    cfg.latent_pose_dim = doc.at("latent_pose_dim").get<int>();
    cfg.channels = doc.at("channels").get<std::vector<int>>();
    cfg.spiral_lengths = doc.at("spiral_lengths").get<std::vector<int>>();
    cfg.leaky_slope = doc.at("leaky_slope").get<double>();
    cfg.hierarchy_factor = doc.at("hierarchy_factor").get<double>();
    cfg.validate();
    return cfg;
}

std::uint64_t ModelConfig::hash() const {
    const std::string s = to_json();
    return fnv1a(s.data(), s.size());
}

void ModelConfig::validate() const {
    if (latent_shape_dim < 1 || latent_pose_dim < 1) {
        throw TensorError("model config: latent dims must be >= 1");
    }
    if (channels.empty()) throw TensorError("model config: channels list is empty");
    if (spiral_lengths.size() != channels.size()) {
        throw TensorError("model config: spiral_lengths must match channels");
    }
    for (int c : channels) {
        if (c < 1) throw TensorError("model config: channel width must be >= 1");
    }
    for (int l : spiral_lengths) {
        if (l < 1) throw TensorError("model config: spiral length must be >= 1");
    }
    if (!(hierarchy_factor > 1.0)) throw TensorError("model config: hierarchy factor must be > 1");
}

TemplateContext make_template_context(const Mesh& tmpl, const ModelConfig& config) {
    config.validate();
    return make_template_context(tmpl, build_hierarchy(tmpl, config.num_levels(), config.hierarchy_factor),
                                 config);
}

TemplateContext make_template_context(Mesh tmpl, MeshHierarchy hierarchy,
                                      const ModelConfig& config) {
    config.validate();
    if (hierarchy.num_levels() != config.num_levels()) {
        throw TensorError("template context: hierarchy has " +
                          std::to_string(hierarchy.num_levels()) + " levels, model needs " +
                          std::to_string(config.num_levels()));
    }
    TemplateContext ctx;
    ctx.template_hash = mesh_content_hash(tmpl);
    ctx.template_mesh = std::move(tmpl);
    ctx.hierarchy = std::move(hierarchy);
    ctx.spirals.reserve(static_cast<std::size_t>(config.num_stages()));
    for (int s = 0; s < config.num_stages(); ++s) {
        const Mesh& level = ctx.hierarchy.levels[static_cast<std::size_t>(s)];
        Adjacency adj = build_adjacency(level);
        ctx.spirals.push_back(build_spirals(level, adj, config.spiral_lengths[static_cast<std::size_t>(s)]));
    }
    return ctx;
}

Tensor sparse_matmul(Tape& tape, const Eigen::SparseMatrix<double>& op, const Tensor& x) {
    if (op.cols() != x.rows()) {
        throw TensorError("sparse_matmul: operator cols " + std::to_string(op.cols()) +
                          " do not match input rows " + std::to_string(x.rows()));
    }
    if (tape.used()) throw TensorError("tape reused after backward");
    Mat out = op * x.value();
    const bool rg = tape.grad_enabled() && x.requires_grad();
    Tensor y = Tensor::from_matrix(std::move(out), rg);
    if (rg) {
        tape.record([opp = &op, xd = x.ptr(), yd = y.ptr()] {
            if (xd->requires_grad) xd->grad += opp->transpose() * yd->grad;
        });
    }
    return y;
}

Tensor spiral_conv(Tape& tape, const Tensor& features, const SpiralSet& spirals,
                   const Tensor& weight, const Tensor& bias) {
    if (features.rows() != spirals.num_vertices) {
        throw TensorError("spiral_conv: feature rows " + std::to_string(features.rows()) +
                          " do not match spiral vertex count " +
                          std::to_string(spirals.num_vertices));
    }
    Tensor gathered = gather_rows(tape, features, spirals.indices);
    Tensor stacked = reshape(tape, gathered, spirals.num_vertices,
                             static_cast<Eigen::Index>(spirals.length) * features.cols());
    return add(tape, matmul(tape, stacked, weight), bias);
}

Tensor vertices_tensor(const Mesh& mesh) {
    Mat m(mesh.vertex_count(), 3);
    for (int v = 0; v < mesh.vertex_count(); ++v) m.row(v) = mesh.vertices.row(v);
    return Tensor::from_matrix(std::move(m), false);
}

Mesh mesh_from_tensor(const Tensor& verts, const Mesh& topology_source) {
    if (verts.rows() != topology_source.vertex_count() || verts.cols() != 3) {
        throw TensorError("mesh_from_tensor: vertex tensor has wrong shape");
    }
    Mesh out = topology_source;
    for (int v = 0; v < out.vertex_count(); ++v) out.vertices.row(v) = verts.value().row(v);
    return out;
}

DisentangleModel::DisentangleModel(const TemplateContext* context, ModelConfig config,
                                   std::uint64_t init_seed)
    : context_(context), config_(std::move(config)) {
    config_.validate();
    if (context_->hierarchy.num_levels() != config_.num_levels()) {
        throw TensorError("model: template context level count mismatch");
    }
    Rng rng(init_seed);
    const int stages = config_.num_stages();
    const auto& levels = context_->hierarchy.levels;
    const int coarse_n = levels[static_cast<std::size_t>(stages)].vertex_count();
    const int coarse_c = config_.channels.back();

    auto build_encoder = [&](const std::string& prefix, int latent, Branch* br) {
        int in_c = 3;
        for (int s = 0; s < stages; ++s) {
            const int out_c = config_.channels[static_cast<std::size_t>(s)];
            const int l = config_.spiral_lengths[static_cast<std::size_t>(s)];
            br->conv_w.push_back(
                register_param(prefix + ".conv" + std::to_string(s) + ".weight", l * in_c, out_c, rng, false));
            br->conv_b.push_back(
                register_param(prefix + ".conv" + std::to_string(s) + ".bias", 1, out_c, rng, true));
            in_c = out_c;
        }
        br->fc_w = register_param(prefix + ".fc.weight", coarse_n * coarse_c, latent, rng, false);
        br->fc_b = register_param(prefix + ".fc.bias", 1, latent, rng, true);
    };
    build_encoder("shape_enc", config_.latent_shape_dim, &shape_enc_);
    build_encoder("pose_enc", config_.latent_pose_dim, &pose_enc_);

    decoder_.fc_w = register_param("dec.fc.weight", config_.latent_dim(), coarse_n * coarse_c, rng, false);
    decoder_.fc_b = register_param("dec.fc.bias", 1, coarse_n * coarse_c, rng, true);
    decoder_.conv_w.resize(static_cast<std::size_t>(stages));
    decoder_.conv_b.resize(static_cast<std::size_t>(stages));
    for (int s = stages - 1; s >= 0; --s) {
        const int in_c = config_.channels[static_cast<std::size_t>(s)];
        const int out_c = s == 0 ? 3 : config_.channels[static_cast<std::size_t>(s - 1)];
        const int l = config_.spiral_lengths[static_cast<std::size_t>(s)];
        decoder_.conv_w[static_cast<std::size_t>(s)] =
            register_param("dec.conv" + std::to_string(s) + ".weight", l * in_c, out_c, rng, false);
        decoder_.conv_b[static_cast<std::size_t>(s)] =
            register_param("dec.conv" + std::to_string(s) + ".bias", 1, out_c, rng, true);
    }
}

Tensor DisentangleModel::register_param(const std::string& name, Eigen::Index rows,
                                        Eigen::Index cols, Rng& rng, bool zero) {
    Mat m(rows, cols);
    if (zero) {
        m.setZero();
    } else {
        const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
        for (Eigen::Index i = 0; i < rows; ++i) {
            for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(-bound, bound);
        }
    }
    Tensor t = Tensor::from_matrix(std::move(m), true);
    params_.emplace_back(name, t);
    return t;
}

Tensor DisentangleModel::run_encoder(Tape& tape, const Tensor& verts, const Branch& branch) {
    if (verts.rows() != context_->template_mesh.vertex_count() || verts.cols() != 3) {
        throw TensorError("encode: vertex tensor shape does not match the template");
    }
    Tensor h = verts;
    for (int s = 0; s < config_.num_stages(); ++s) {
        h = spiral_conv(tape, h, context_->spirals[static_cast<std::size_t>(s)],
                        branch.conv_w[static_cast<std::size_t>(s)],
                        branch.conv_b[static_cast<std::size_t>(s)]);
        h = leaky_relu(tape, h, config_.leaky_slope);
        h = sparse_matmul(tape, context_->hierarchy.down_ops[static_cast<std::size_t>(s)], h);
    }
    h = reshape(tape, h, 1, h.rows() * h.cols());
    return add(tape, matmul(tape, h, branch.fc_w), branch.fc_b);
}

Tensor DisentangleModel::encode_shape_t(Tape& tape, const Tensor& verts) {
    return run_encoder(tape, verts, shape_enc_);
}

Tensor DisentangleModel::encode_pose_t(Tape& tape, const Tensor& verts) {
    return run_encoder(tape, verts, pose_enc_);
}

Tensor DisentangleModel::encode_shape(Tape& tape, const Mesh& mesh) {
    if (mesh.topology_id != context_->template_mesh.topology_id) {
        throw TensorError("encode: topology mismatch with the model template");
    }
    return run_encoder(tape, vertices_tensor(mesh), shape_enc_);
}

Tensor DisentangleModel::encode_pose(Tape& tape, const Mesh& mesh) {
    if (mesh.topology_id != context_->template_mesh.topology_id) {
        throw TensorError("encode: topology mismatch with the model template");
    }
    return run_encoder(tape, vertices_tensor(mesh), pose_enc_);
}

Tensor DisentangleModel::decode(Tape& tape, const Tensor& beta, const Tensor& theta) {
    if (beta.rows() != 1 || beta.cols() != config_.latent_shape_dim) {
        throw TensorError("decode: shape code length " + std::to_string(beta.cols()) +
                          " does not match config " + std::to_string(config_.latent_shape_dim));
    }
    if (theta.rows() != 1 || theta.cols() != config_.latent_pose_dim) {
        throw TensorError("decode: pose code length " + std::to_string(theta.cols()) +
                          " does not match config " + std::to_string(config_.latent_pose_dim));
    }
    const int stages = config_.num_stages();
    const int coarse_n =
        context_->hierarchy.levels[static_cast<std::size_t>(stages)].vertex_count();
    Tensor latent = concat(tape, beta, theta, 1);
    Tensor h = add(tape, matmul(tape, latent, decoder_.fc_w), decoder_.fc_b);
    h = leaky_relu(tape, h, config_.leaky_slope);
    h = reshape(tape, h, coarse_n, config_.channels.back());
    for (int s = stages - 1; s >= 0; --s) {
        h = sparse_matmul(tape, context_->hierarchy.up_ops[static_cast<std::size_t>(s)], h);
        h = spiral_conv(tape, h, context_->spirals[static_cast<std::size_t>(s)],
                        decoder_.conv_w[static_cast<std::size_t>(s)],
                        decoder_.conv_b[static_cast<std::size_t>(s)]);
        if (s > 0) h = leaky_relu(tape, h, config_.leaky_slope);
    }
    return h;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> DisentangleModel::encode(const Mesh& mesh) {
    Tape tape;
    Tape::NoGradGuard guard(tape);
    Tensor beta = encode_shape(tape, mesh);
    Tensor theta = encode_pose(tape, mesh);
    return {beta.value().row(0).transpose(), theta.value().row(0).transpose()};
}

Mesh DisentangleModel::decode_mesh(const Eigen::VectorXd& beta, const Eigen::VectorXd& theta) {
    Tape tape;
    Tape::NoGradGuard guard(tape);
    Mat b(1, beta.size()), t(1, theta.size());
    b.row(0) = beta.transpose();
    t.row(0) = theta.transpose();
    Tensor out = decode(tape, Tensor::from_matrix(std::move(b)), Tensor::from_matrix(std::move(t)));
    return mesh_from_tensor(out, context_->template_mesh);
}

std::vector<Tensor> DisentangleModel::param_tensors() const {
    std::vector<Tensor> out;
    out.reserve(params_.size());
    for (const auto& [_, t] : params_) out.push_back(t);
    return out;
}

void DisentangleModel::load_named_tensors(const std::vector<std::pair<std::string, Mat>>& tensors) {
    std::map<std::string, const Mat*> lookup;
    for (const auto& [name, m] : tensors) lookup[name] = &m;
    for (auto& [name, t] : params_) {
        auto it = lookup.find(name);
        if (it == lookup.end()) throw TensorError("checkpoint missing parameter " + name);
        if (it->second->rows() != t.rows() || it->second->cols() != t.cols()) {
            throw TensorError("checkpoint parameter " + name + " has wrong shape");
        }
        t.mutable_value() = *it->second;
    }
}

}  // namespace dismesh
