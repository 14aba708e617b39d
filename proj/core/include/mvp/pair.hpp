#pragma once

#include "mvp/matrix.hpp"

namespace mvp {

// One supervised example: input image x (model space), target image y_hat at
// the target view, and the view target (one-hot M x 1 for the discrete head,
// 1 x 1 scaled yaw for the continuous head; empty when unsupervised).
struct TrainingPair {
  Matrix x;
  Matrix y_hat;
  Matrix view_target;
  Index identity = 0;
  Index input_view = 0;
  Index output_view = 0;
};

}  // namespace mvp
