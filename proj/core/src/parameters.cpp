#include "mvp/parameters.hpp"

#include <cmath>

#include "mvp/rng.hpp"

namespace mvp {

Parameters Parameters::zeros(const Architecture& arch) {
  arch.validate();
  Parameters p;
  p.arch = arch;
  p.layers.resize(arch.hidden.size());
  Index prev_width = arch.input_dim;
  Index prev_rand = 0;  // the input has no random units
  for (Index l = 0; l < arch.hidden.size(); ++l) {
    const LayerSpec& spec = arch.hidden[l];
    p.layers[l].U = Matrix(spec.width, prev_width);
    if (prev_rand > 0) p.layers[l].V = Matrix(spec.width, prev_rand);
    p.layers[l].b = Matrix(spec.width, 1);
    prev_width = spec.width;
    prev_rand = spec.rand_width;
  }
  p.U_out = Matrix(arch.output_dim, prev_width);
  if (prev_rand > 0) p.V_out = Matrix(arch.output_dim, prev_rand);
  p.b_out = Matrix(arch.output_dim, 1);

  const Index vdim = arch.view_out_dim();
  p.W_y = Matrix(vdim, arch.output_dim);
  const Index code_dim = arch.view_code_dim();
  if (code_dim > 0) p.W_v = Matrix(vdim, code_dim);
  p.b_view = Matrix(vdim, 1);
  return p;
}

Parameters Parameters::zero_clone() const {
  Parameters p = Parameters::zeros(arch);
  p.sigma_y = sigma_y;
  p.sigma_v = sigma_v;
  return p;
}

Index Parameters::parameter_count() const {
  Index total = 0;
  for_each_tensor([&](const std::string&, const Matrix& m) { total += m.size(); });
  return total;
}

bool Parameters::all_finite() const {
  bool ok = true;
  for_each_tensor([&](const std::string&, const Matrix& m) { ok = ok && m.all_finite(); });
  return ok && std::isfinite(sigma_y) && std::isfinite(sigma_v);
}

Parameters init_parameters(const Architecture& arch, std::uint64_t seed) {
  Parameters p = Parameters::zeros(arch);
  Rng rng(seed);
  p.for_each_tensor([&](const std::string& name, Matrix& m) {
    if (name[0] == 'b') return;  // biases stay zero
    rng.fill_gaussian(m, 0.0, 1.0 / std::sqrt(static_cast<double>(m.cols())));
  });
  return p;
}

}  // namespace mvp
