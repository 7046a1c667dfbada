#pragma once

#include "dismesh/mesh.hpp"

#include <cstdint>

namespace dismesh {

// Pose-invariant augmentation: v -> s*v + u with s drawn once per mesh from
// [scale_min, scale_max] and u drawn per vertex from [-noise_amplitude,
// noise_amplitude]^3. Connectivity is never touched.
struct AugmentParams {
    double scale_min = 0.9;
    double scale_max = 1.1;
    double noise_amplitude = 0.0;
};

// Default noise amplitude is 0.5% of the reference bounding-box diagonal.
AugmentParams default_augment_params(const Mesh& reference);

Mesh augment(const Mesh& mesh, std::uint64_t seed, const AugmentParams& params);

}  // namespace dismesh
