#pragma once

#include "dismesh/arap.hpp"
#include "dismesh/augment.hpp"
#include "dismesh/checkpoint.hpp"
#include "dismesh/dataset.hpp"
#include "dismesh/model.hpp"
#include "dismesh/optim.hpp"
#include "dismesh/rng.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <string>

namespace dismesh {

class TrainError : public std::runtime_error {
public:
    TrainError(const std::string& what, std::string last_checkpoint)
        : std::runtime_error(what), last_good_checkpoint(std::move(last_checkpoint)) {}
    std::string last_good_checkpoint;
};

// Two poses of one subject plus a mesh of a different subject, as record
// indices into the dataset.
struct TrainingTriplet {
    int x1 = -1;
    int x2 = -1;
    int xt = -1;
};

// Uniform over all valid ordered triplets; deterministic per RNG state.
// Throws when the dataset has a single subject.
TrainingTriplet sample_triplet(const DatasetIndex& index, Rng& rng);

enum class AblationMode { Full, NoArap, NoSelfConsistency };
AblationMode ablation_from_string(const std::string& name);
std::string to_string(AblationMode mode);

enum class Objective { Disentangle, Reconstruction };

struct TrainConfig {
    ModelConfig model;
    AdamConfig adam;  // period 0 means "use the total step count"
    double augment_scale_min = 0.9;
    double augment_scale_max = 1.1;
    double augment_noise_fraction = 0.005;  // of template bounding-box diagonal
    int batch_size = 16;
    std::int64_t steps = 1000;
    std::uint64_t seed = 0;
    double lambda_cross = 0.5;
    double lambda_self = 0.5;
    ArapConfig arap;
    AblationMode ablation = AblationMode::Full;
    Objective objective = Objective::Disentangle;
    std::int64_t checkpoint_every = 0;  // 0 writes the final checkpoint only

    std::string to_json() const;
    static TrainConfig from_json(const std::string& text);
    std::uint64_t hash() const;
};

struct LossReport {
    std::int64_t step = 0;
    double l_cross = 0.0;
    double l_self = 0.0;
    double total = 0.0;
    double lr = 0.0;
};

// Swap-reconstruction of x1 from x2's shape code and x1's augmented pose
// code (mean-per-vertex L1 against x1).
Tensor cross_consistency_loss(Tape& tape, PoseShapeCodec& codec, const Mesh& x1, const Mesh& x2,
                              const AugmentParams& augment_params, std::uint64_t seed);

// Proxy-based pose round trip. The proxy (xt's shape, x1's pose) is decoded
// without gradients, deformed toward its anchors from xt, and re-encoded; no
// gradient crosses the proxy construction or the deformation. `solver` is an
// optional cached per-topology solver; pass nullptr to build on the fly.
Tensor self_consistency_loss(Tape& tape, PoseShapeCodec& codec, const Mesh& x1, const Mesh& x2,
                             const Mesh& xt, const AugmentParams& augment_params,
                             const ArapConfig& arap_config, AblationMode ablation,
                             const ArapSolver* solver, std::uint64_t seed);

struct TrainResult {
    std::string final_checkpoint;
    std::string metrics_path;
    LossReport last_report;
};

// Full training loop: triplet sampling, both losses, Adam with cosine
// annealing, CSV metrics and periodic checkpoints. Fully reproducible from
// (config, seed); step k of a resumed run matches step k of a fresh one.
class Trainer {
public:
    Trainer(const LoadedDataset& data, TemplateContext context, TrainConfig config,
            std::string out_dir);

    TrainResult run(const std::string& resume_from = "",
                    const std::function<void(const LossReport&)>& on_report = nullptr);

    DisentangleModel& model() { return *model_; }
    const TrainConfig& config() const { return config_; }

private:
    LossReport step_once(Tape& tape, std::int64_t step);
    std::string write_checkpoint(std::int64_t step) const;

    const LoadedDataset* data_;
    TemplateContext context_;
    TrainConfig config_;
    AugmentParams augment_params_;
    std::string out_dir_;
    std::unique_ptr<DisentangleModel> model_;
    std::unique_ptr<Adjacency> adjacency_storage_;
    std::unique_ptr<ArapSolver> arap_solver_;
    std::unique_ptr<Adam> adam_;
    std::vector<Mesh> centered_;  // preprocessed copies of the dataset meshes
    double lambda_self_effective_ = 0.5;
    std::string last_checkpoint_;
};

}  // namespace dismesh
