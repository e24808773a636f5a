// Model checkpoints: a JSON manifest (kind, config hash, named shapes, step)
// followed by the concatenated little-endian f32 parameter blobs in manifest
// order. Optimizer moments ride along as named entries so resumed training is
// bit-exact. Writes are atomic (temp file + rename).
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "choreo/adam.hpp"

namespace choreo {

struct CheckpointData {
    std::string kind;
    std::string config_hash;
    int64_t step = 0;
    std::vector<std::string> names;
    std::vector<std::vector<int64_t>> shapes;
    std::vector<std::vector<float>> blobs;

    void add(const std::string& name, std::vector<int64_t> shape, std::vector<float> blob);
    const std::vector<float>* find(const std::string& name) const;
};

void save_checkpoint(const std::string& path, const CheckpointData& data);
CheckpointData load_checkpoint(const std::string& path);

// Parameters plus optional optimizer moments ("<name>#adam_m" / "#adam_v").
CheckpointData pack_params(const std::string& kind, const std::string& config_hash, int64_t step,
                           const std::vector<NamedParam>& params, const Adam::State* opt = nullptr);
// Restores tensor values by name; every parameter must be present with the
// right shape. Returns the optimizer state if the checkpoint carries one.
Adam::State unpack_params(const CheckpointData& data, const std::vector<NamedParam>& params);

}  // namespace choreo
