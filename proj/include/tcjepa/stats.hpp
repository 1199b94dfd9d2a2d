#pragma once

#include <string>

#include "tcjepa/predictor.hpp"
#include "tcjepa/trainer.hpp"

namespace tcjepa {

/// Closed-form parameter and forward-FLOP counts from layer dimension
/// formulas (multiply-accumulate counted as 2 FLOPs). FLOPs use the mean
/// configured masking scales, so they are per-image estimates, not traces.
struct ModelStats {
    long encoder_params = 0;
    long predictor_params = 0;
    long conditioner_params = 0;
    long total_params = 0;

    double encoder_flops = 0;         // full-image target-encoder forward
    double predictor_flops_base = 0;  // all target-block forwards, unconditioned
    double conditioner_flops = 0;     // added by the selected conditioner
    double overhead_ratio = 1.0;      // (base + conditioner) / base

    std::string describe() const;
};

ModelStats compute_stats(const TrainConfig& cfg);

}  // namespace tcjepa
