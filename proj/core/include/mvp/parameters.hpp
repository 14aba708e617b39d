#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mvp/architecture.hpp"
#include "mvp/matrix.hpp"

namespace mvp {

struct LayerParams {
  Matrix U;  // width x prev_width
  Matrix V;  // width x prev_rand_width; empty unless the previous layer is hybrid
  Matrix b;  // width x 1
};

// Full parameter set.  Tensor traversal order is fixed (layers ascending,
// U/V/b per layer, then output layer, then view head) and shared by
// initialization, checkpointing, and gradient bookkeeping.
struct Parameters {
  Architecture arch;
  std::vector<LayerParams> layers;
  Matrix U_out, V_out, b_out;
  Matrix W_y, W_v, b_view;
  double sigma_y = 1.0;
  double sigma_v = 0.1;

  static Parameters zeros(const Architecture& arch);
  Parameters zero_clone() const;

  Index parameter_count() const;
  bool all_finite() const;

  template <typename F>
  void for_each_tensor(F&& f) {
    for (Index l = 0; l < layers.size(); ++l) {
      const std::string suffix = std::to_string(l + 1);
      f("U" + suffix, layers[l].U);
      if (!layers[l].V.empty()) f("V" + suffix, layers[l].V);
      f("b" + suffix, layers[l].b);
    }
    f(std::string("U_out"), U_out);
    if (!V_out.empty()) f(std::string("V_out"), V_out);
    f(std::string("b_out"), b_out);
    f(std::string("W_y"), W_y);
    if (!W_v.empty()) f(std::string("W_v"), W_v);
    f(std::string("b_view"), b_view);
  }

  template <typename F>
  void for_each_tensor(F&& f) const {
    const_cast<Parameters*>(this)->for_each_tensor(
        [&](const std::string& name, Matrix& m) { f(name, static_cast<const Matrix&>(m)); });
  }
};

Parameters init_parameters(const Architecture& arch, std::uint64_t seed);

}  // namespace mvp
