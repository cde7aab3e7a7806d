#pragma once

#include <optional>
#include <string>

#include "fmim/data.hpp"
#include "fmim/optim.hpp"
#include "fmim/tagger.hpp"

namespace fmim {

// Versioned binary checkpoint: tagger config, tag scheme, vocabulary, all
// parameter matrices, and optionally the optimizer state for exact training
// resumption. f64 values round-trip bit-exactly.
struct Checkpoint {
    TaggerConfig config;
    TagScheme scheme;
    Vocabulary vocab;
    ModelParams params;
    std::optional<OptimState> optim;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);

// Throws std::runtime_error when the file is missing or is not a checkpoint
// (magic/version mismatch, truncated payload).
Checkpoint load_checkpoint(const std::string& path);

}  // namespace fmim
