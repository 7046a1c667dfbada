#include "dismesh/train.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace dismesh {

namespace fs = std::filesystem;
using nlohmann::json;

TrainingTriplet sample_triplet(const DatasetIndex& index, Rng& rng) {
    const std::size_t total = static_cast<std::size_t>(index.size());
    // weight each subject by its count of valid ordered triplets
    std::vector<const std::vector<int>*> subjects;
    std::vector<std::size_t> weights;
    std::size_t weight_sum = 0;
    for (const auto& [id, slots] : index.by_subject) {
        const std::size_t n = slots.size();
        const std::size_t others = total - n;
        const std::size_t w = n * (n - 1) * others;
        subjects.push_back(&slots);
        weights.push_back(w);
        weight_sum += w;
    }
    if (weight_sum == 0) {
        throw MeshError("sample_triplet: dataset needs a second subject for the triplet");
    }
    std::size_t r = rng.uniform_index(weight_sum);
    std::size_t pick = 0;
    while (r >= weights[pick]) {
        r -= weights[pick];
        ++pick;
    }
    const auto& slots = *subjects[pick];

    TrainingTriplet t;
    const std::size_t i1 = rng.uniform_index(slots.size());
    std::size_t i2 = rng.uniform_index(slots.size() - 1);
    if (i2 >= i1) ++i2;
    t.x1 = slots[i1];
    t.x2 = slots[i2];

    const std::string& subject = index.records[static_cast<std::size_t>(t.x1)].subject_id;
    std::size_t j = rng.uniform_index(total - slots.size());
    for (int r_idx = 0; r_idx < index.size(); ++r_idx) {
        if (index.records[static_cast<std::size_t>(r_idx)].subject_id == subject) continue;
        if (j == 0) {
            t.xt = r_idx;
            break;
        }
        --j;
    }
    return t;
}

AblationMode ablation_from_string(const std::string& name) {
    if (name == "full") return AblationMode::Full;
    if (name == "no-arap" || name == "no_arap") return AblationMode::NoArap;
    if (name == "no-self" || name == "no_self_consistency") return AblationMode::NoSelfConsistency;
    throw MeshError("unknown ablation mode '" + name + "' (full | no-arap | no-self)");
}

std::string to_string(AblationMode mode) {
    switch (mode) {
        case AblationMode::Full: return "full";
        case AblationMode::NoArap: return "no-arap";
        case AblationMode::NoSelfConsistency: return "no-self";
    }
    return "full";
}

std::string TrainConfig::to_json() const {
    json doc = {{"model", json::parse(model.to_json())},
                {"adam",
                 {{"lr_max", adam.lr_max},
                  {"lr_min", adam.lr_min},
                  {"beta1", adam.beta1},
                  {"beta2", adam.beta2},
                  {"eps", adam.eps},
                  {"period", adam.period}}},
                {"augment_scale_min", augment_scale_min},
                {"augment_scale_max", augment_scale_max},
                {"augment_noise_fraction", augment_noise_fraction},
                {"batch_size", batch_size},
                {"steps", steps},
                {"seed", seed},
                {"lambda_cross", lambda_cross},
                {"lambda_self", lambda_self},
                {"arap",
                 {{"anchor_fraction", arap.anchor_fraction},
                  {"iterations", arap.iterations},
                  {"cotangent", arap.weighting == EdgeWeighting::Cotangent}}},
                {"ablation", to_string(ablation)},
                {"objective", objective == Objective::Reconstruction ? "reconstruction" : "disentangle"},
                {"checkpoint_every", checkpoint_every}};
    return doc.dump();
}

TrainConfig TrainConfig::from_json(const std::string& text) {
    json doc = json::parse(text);
    TrainConfig cfg;
    cfg.model = ModelConfig::from_json(doc.at("model").dump());
    const auto& a = doc.at("adam");
    cfg.adam.lr_max = a.at("lr_max").get<double>();
    cfg.adam.lr_min = a.at("lr_min").get<double>();
    cfg.adam.beta1 = a.at("beta1").get<double>();
    cfg.adam.beta2 = a.at("beta2").get<double>();
    cfg.adam.eps = a.at("eps").get<double>();
    cfg.adam.period = a.at("period").get<std::int64_t>();
    cfg.augment_scale_min = doc.at("augment_scale_min").get<double>();
    cfg.augment_scale_max = doc.at("augment_scale_max").get<double>();
    cfg.augment_noise_fraction = doc.at("augment_noise_fraction").get<double>();
    cfg.batch_size = doc.at("batch_size").get<int>();
    cfg.steps = doc.at("steps").get<std::int64_t>();
    cfg.seed = doc.at("seed").get<std::uint64_t>();
    cfg.lambda_cross = doc.at("lambda_cross").get<double>();
    cfg.lambda_self = doc.at("lambda_self").get<double>();
    const auto& ar = doc.at("arap");
    cfg.arap.anchor_fraction = ar.at("anchor_fraction").get<double>();
    cfg.arap.iterations = ar.at("iterations").get<int>();
    cfg.arap.weighting =
        ar.at("cotangent").get<bool>() ? EdgeWeighting::Cotangent : EdgeWeighting::Uniform;
    cfg.ablation = ablation_from_string(doc.at("ablation").get<std::string>());
    cfg.objective = doc.at("objective").get<std::string>() == "reconstruction"
                        ? Objective::Reconstruction
                        : Objective::Disentangle;
    cfg.checkpoint_every = doc.at("checkpoint_every").get<std::int64_t>();
    return cfg;
}

std::uint64_t TrainConfig::hash() const {
    const std::string s = to_json();
    return fnv1a(s.data(), s.size());
}

Tensor cross_consistency_loss(Tape& tape, PoseShapeCodec& codec, const Mesh& x1, const Mesh& x2,
                              const AugmentParams& augment_params, std::uint64_t seed) {
    if (x1.topology_id != x2.topology_id) throw MeshError("cross_consistency_loss: topology mismatch");
    const Mesh pose_input = center(augment(x1, seed, augment_params));
    Tensor beta = codec.encode_shape(tape, x2);
    Tensor theta = codec.encode_pose(tape, pose_input);
    Tensor reconstruction = codec.decode(tape, beta, theta);
    return l1_loss(tape, reconstruction, vertices_tensor(x1));
}

Tensor self_consistency_loss(Tape& tape, PoseShapeCodec& codec, const Mesh& x1, const Mesh& x2,
                             const Mesh& xt, const AugmentParams& augment_params,
                             const ArapConfig& arap_config, AblationMode ablation,
                             const ArapSolver* solver, std::uint64_t seed) {
    if (ablation == AblationMode::NoSelfConsistency) return Tensor::scalar(0.0);
    if (x1.topology_id != xt.topology_id) throw MeshError("self_consistency_loss: topology mismatch");

    // proxy with xt's shape and x1's pose, held constant for the gradient
    Mesh proxy;
    {
        Tape::NoGradGuard guard(tape);
        Tensor beta_t = codec.encode_shape(tape, xt);
        Tensor theta_1 = codec.encode_pose(tape, x1);
        Tensor proxy_verts = codec.decode(tape, beta_t, theta_1);
        proxy = mesh_from_tensor(proxy_verts, codec.template_mesh());
    }

    Mesh deformed_proxy = proxy;
    if (ablation == AblationMode::Full) {
        const std::uint64_t anchor_seed = mix_seed(seed, 0xA2C8ULL);
        deformed_proxy = solver ? solver->deform(xt, proxy, arap_config.anchor_fraction,
                                                 arap_config.iterations, anchor_seed)
                                : arap_deform(xt, proxy, arap_config, anchor_seed);
    }

    const Mesh pose_input = center(augment(deformed_proxy, mix_seed(seed, 0x51AEULL), augment_params));
    Tensor beta = codec.encode_shape(tape, x2);
    Tensor theta = codec.encode_pose(tape, pose_input);
    Tensor reconstruction = codec.decode(tape, beta, theta);
    return l1_loss(tape, reconstruction, vertices_tensor(x1));
}

Trainer::Trainer(const LoadedDataset& data, TemplateContext context, TrainConfig config,
                 std::string out_dir)
    : data_(&data), context_(std::move(context)), config_(std::move(config)),
      out_dir_(std::move(out_dir)) {
    fs::create_directories(out_dir_);
    if (config_.adam.period <= 0) config_.adam.period = std::max<std::int64_t>(1, config_.steps);
    augment_params_.scale_min = config_.augment_scale_min;
    augment_params_.scale_max = config_.augment_scale_max;
    augment_params_.noise_amplitude =
        config_.augment_noise_fraction * bounding_box_diagonal(context_.template_mesh);

    model_ = std::make_unique<DisentangleModel>(&context_, config_.model,
                                                mix_seed(config_.seed, 0x1017ULL));
    adam_ = std::make_unique<Adam>(model_->param_tensors(), config_.adam);

    centered_.reserve(data_->meshes.size());
    for (const Mesh& m : data_->meshes) centered_.push_back(center(m));

    // the solver keeps a reference to the adjacency; own both here
    adjacency_storage_ = std::make_unique<Adjacency>(build_adjacency(context_.template_mesh));
    arap_solver_ = std::make_unique<ArapSolver>(context_.template_mesh, *adjacency_storage_,
                                                config_.arap.weighting);

    lambda_self_effective_ =
        config_.ablation == AblationMode::NoSelfConsistency ? 0.0 : config_.lambda_self;
}

LossReport Trainer::step_once(Tape& tape, std::int64_t step) {
    const std::uint64_t step_seed = mix_seed(config_.seed, static_cast<std::uint64_t>(step));
    const int batch = std::max(1, config_.batch_size);
    const double inv_batch = 1.0 / static_cast<double>(batch);

    Tensor cross_sum = Tensor::scalar(0.0);
    Tensor self_sum = Tensor::scalar(0.0);
    for (int b = 0; b < batch; ++b) {
        const std::uint64_t item_seed = mix_seed(step_seed, static_cast<std::uint64_t>(b));
        Rng rng(item_seed);
        if (config_.objective == Objective::Reconstruction) {
            const int idx = static_cast<int>(rng.uniform_index(centered_.size()));
            const Mesh& x = centered_[static_cast<std::size_t>(idx)];
            Tensor beta = model_->encode_shape(tape, x);
            Tensor theta = model_->encode_pose(tape, x);
            Tensor rec = model_->decode(tape, beta, theta);
            cross_sum = add(tape, cross_sum, l1_loss(tape, rec, vertices_tensor(x)));
            continue;
        }
        TrainingTriplet triplet = sample_triplet(data_->index, rng);
        const Mesh& x1 = centered_[static_cast<std::size_t>(triplet.x1)];
        const Mesh& x2 = centered_[static_cast<std::size_t>(triplet.x2)];
        const Mesh& xt = centered_[static_cast<std::size_t>(triplet.xt)];
        cross_sum = add(tape, cross_sum,
                        cross_consistency_loss(tape, *model_, x1, x2, augment_params_,
                                               mix_seed(item_seed, 0xC405ULL)));
        if (config_.ablation != AblationMode::NoSelfConsistency) {
            try {
                self_sum = add(tape, self_sum,
                               self_consistency_loss(tape, *model_, x1, x2, xt, augment_params_,
                                                     config_.arap, config_.ablation,
                                                     arap_solver_.get(),
                                                     mix_seed(item_seed, 0x5E1FULL)));
            } catch (const ArapError& e) {
                const auto& recs = data_->index.records;
                throw MeshError(std::string("self-consistency deformation failed for triplet (") +
                                recs[static_cast<std::size_t>(triplet.x1)].mesh_id + ", " +
                                recs[static_cast<std::size_t>(triplet.x2)].mesh_id + ", " +
                                recs[static_cast<std::size_t>(triplet.xt)].mesh_id +
                                "): " + e.what());
            }
        }
    }
    Tensor scale = Tensor::scalar(inv_batch);
    Tensor l_cross = matmul(tape, cross_sum, scale);
    Tensor l_self = matmul(tape, self_sum, scale);
    Tensor total = add(tape, matmul(tape, l_cross, Tensor::scalar(config_.lambda_cross)),
                       matmul(tape, l_self, Tensor::scalar(lambda_self_effective_)));

    LossReport report;
    report.step = step;
    report.l_cross = l_cross.scalar_value();
    report.l_self = l_self.scalar_value();
    report.total = total.scalar_value();
    report.lr = cosine_lr(step, config_.adam);
    if (!std::isfinite(report.total)) {
        throw TrainError("non-finite loss at step " + std::to_string(step), last_checkpoint_);
    }

    tape.backward(total);
    adam_->step(report.lr);
    for (Tensor& p : model_->param_tensors()) p.zero_grad();
    return report;
}

std::string Trainer::write_checkpoint(std::int64_t step) const {
    Checkpoint ckpt;
    ckpt.step = static_cast<std::uint64_t>(step);
    ckpt.config_json = config_.to_json();
    ckpt.config_hash = config_.hash();
    for (const auto& [name, t] : model_->named_params()) ckpt.tensors.emplace_back(name, t.value());
    ckpt.has_optimizer = true;
    ckpt.adam_t = adam_->step_count();
    ckpt.adam_m = adam_->first_moments();
    ckpt.adam_v = adam_->second_moments();
    char buf[64];
    std::snprintf(buf, sizeof(buf), "ckpt_%08lld.bin", static_cast<long long>(step));
    const std::string path = (fs::path(out_dir_) / buf).string();
    save_checkpoint(ckpt, path);
    return path;
}

TrainResult Trainer::run(const std::string& resume_from,
                         const std::function<void(const LossReport&)>& on_report) {
    std::int64_t start_step = 0;
    if (!resume_from.empty()) {
        Checkpoint ckpt = load_checkpoint(resume_from);
        if (ckpt.config_hash != config_.hash()) {
            throw TrainError("resume: checkpoint config does not match the run config", "");
        }
        model_->load_named_tensors(ckpt.tensors);
        if (ckpt.has_optimizer) {
            adam_->restore(ckpt.adam_t, ckpt.adam_m, ckpt.adam_v);
        }
        start_step = static_cast<std::int64_t>(ckpt.step);
        last_checkpoint_ = resume_from;
    }

    const std::string metrics_path = (fs::path(out_dir_) / "metrics.csv").string();
    std::ofstream metrics(metrics_path);
    if (!metrics) throw TrainError("cannot open " + metrics_path, last_checkpoint_);
    metrics << "step,l_cross,l_self,total,lr\n";

    TrainResult result;
    result.metrics_path = metrics_path;
    char row[256];
    for (std::int64_t step = start_step; step < config_.steps; ++step) {
        Tape tape;
        LossReport report = step_once(tape, step);
        std::snprintf(row, sizeof(row), "%lld,%.17g,%.17g,%.17g,%.17g\n",
                      static_cast<long long>(report.step), report.l_cross, report.l_self,
                      report.total, report.lr);
        metrics << row;
        if (on_report) on_report(report);
        result.last_report = report;
        if (config_.checkpoint_every > 0 && (step + 1) % config_.checkpoint_every == 0 &&
            step + 1 < config_.steps) {
            last_checkpoint_ = write_checkpoint(step + 1);
        }
    }
    metrics.flush();
    result.final_checkpoint = write_checkpoint(config_.steps);
    last_checkpoint_ = result.final_checkpoint;
    return result;
}

}  // namespace dismesh
