#include "dismesh/augment.hpp"

#include "dismesh/rng.hpp"

namespace dismesh {

AugmentParams default_augment_params(const Mesh& reference) {
    AugmentParams p;
    p.noise_amplitude = 0.005 * bounding_box_diagonal(reference);
    return p;
}

Mesh augment(const Mesh& mesh, std::uint64_t seed, const AugmentParams& params) {
    if (!(params.scale_min > 0.0) || params.scale_max < params.scale_min) {
        throw MeshError("augment: invalid scale range");
    }
    if (params.noise_amplitude < 0.0) {
        throw MeshError("augment: negative noise amplitude");
    }
    Rng rng(seed);
    const double s = rng.uniform(params.scale_min, params.scale_max);
    Mesh out = mesh;
    out.vertices *= s;
    const double a = params.noise_amplitude;
    if (a > 0.0) {
        for (int v = 0; v < out.vertex_count(); ++v) {
            for (int c = 0; c < 3; ++c) out.vertices(v, c) += rng.uniform(-a, a);
        }
    }
    return out;
}

}  // namespace dismesh
