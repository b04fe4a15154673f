#pragma once

#include <cstdint>
#include <vector>

#include "heightlab/toytrain.hpp"

namespace heightlab_test {

/// Discrete state of every non-smooth operation in a forward pass: footprint
/// clamp, splat cell, L1 residual signs. Equal signatures at two parameter
/// points mean both lie on the same smooth piece of the loss.
std::vector<std::int32_t> kink_signature(const heightlab::TrainBatch& batch, const heightlab::ForwardCache& cache);

struct CoordinateCheck {
  bool bias = false;
  int channel = 0;  // ignored for biases
  int anchor = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
  double step = 0.0;   // step actually used
  bool smooth = true;  // final stencil stays on one smooth piece
};

/// Steps are halved at most this many times when a stencil crosses a kink.
inline constexpr int kMaxStepHalvings = 6;

inline constexpr double kGradRelFloor = 1e-6;

/// Central differences over every weight and bias. A coordinate whose
/// stencil crosses a kink is retried with halved steps.
std::vector<CoordinateCheck> gradient_check(const heightlab::PredictorParams& params,
                                            const heightlab::TrainBatch& batch,
                                            const heightlab::LossWeights& weights, double step);

}  // namespace heightlab_test
