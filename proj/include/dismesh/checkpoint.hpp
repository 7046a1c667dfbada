#pragma once

#include "dismesh/tensor.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace dismesh {

// Versioned binary container: named parameter tensors, Adam moments and step
// counter, plus the JSON config the run was built from (hash-checked on load).
struct Checkpoint {
    std::uint64_t step = 0;
    std::uint64_t config_hash = 0;
    std::string config_json;
    std::vector<std::pair<std::string, Mat>> tensors;
    bool has_optimizer = false;
    std::int64_t adam_t = 0;
    std::vector<Mat> adam_m, adam_v;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace dismesh
