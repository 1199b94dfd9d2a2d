#pragma once

#include <string>
#include <vector>

#include "tcjepa/common.hpp"
#include "tcjepa/rng.hpp"

namespace tcjepa {

struct GridShape {
    int rows = 8;
    int cols = 8;
    int num_patches() const { return rows * cols; }
};

/// Context indices plus target blocks over a patch grid. Target blocks may
/// overlap each other; the context never overlaps any target.
struct MaskSpec {
    GridShape grid;
    std::vector<int> context_indices;               // sorted
    std::vector<std::vector<int>> target_blocks;    // each sorted, rectangular
    std::vector<int> target_union() const;          // sorted, deduplicated
};

struct MaskingConfig {
    int num_targets = 4;
    double target_scale_min = 0.15, target_scale_max = 0.2;
    double target_aspect_min = 0.75, target_aspect_max = 1.5;
    double context_scale_min = 0.85, context_scale_max = 1.0;
    int retry_budget = 100;
};

/// Multi-block sampler: `num_targets` rectangles with configured area/aspect,
/// plus a unit-aspect context rectangle with all target indices removed.
/// Throws SamplingError when the retry budget is exhausted.
MaskSpec sample_mask(const MaskingConfig& cfg, GridShape grid, Rng& rng);

/// Checks all MaskSpec invariants; returns human-readable violations.
std::vector<std::string> validate_mask(const MaskSpec& spec);

}  // namespace tcjepa
