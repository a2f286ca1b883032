#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "drft/nn.hpp"
#include "drft/optim.hpp"

namespace drft {

// Versioned binary container: magic "DRFTCKPT", a format-version byte, run
// metadata, then parameter name -> shape -> little-endian f32 payload.
// Optimizer moments ride along under reserved "adam.m:" / "adam.v:" names
// so training can resume.

struct CheckpointMeta {
    uint32_t epoch = 0;
    uint64_t adam_step = 0;
};

void save_checkpoint(const std::string& path, const ParamStore& store,
                     const CheckpointMeta& meta, const AdamOptimizer* optimizer = nullptr);

// Restores values into an existing store (shapes must match the file) and
// returns run metadata. When `optimizer` is given and the file carries
// moments, optimizer state is restored too.
CheckpointMeta load_checkpoint(const std::string& path, ParamStore& store,
                               AdamOptimizer* optimizer = nullptr);

}  // namespace drft
