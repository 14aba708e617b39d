#pragma once

#include <string>
#include <vector>

#include "mvp/matrix.hpp"

namespace mvp {

enum class ViewHeadKind { Discrete, Continuous };

// One hidden layer: `width` deterministic units, plus `rand_width` random
// units sampled fresh on every stochastic pass (0 = deterministic-only
// layer).  A layer's random units feed the *next* layer's V weight.
struct LayerSpec {
  Index width = 0;
  Index rand_width = 0;

  bool hybrid() const { return rand_width > 0; }
  bool operator==(const LayerSpec&) const = default;
};

struct Architecture {
  Index input_dim = 0;
  std::vector<LayerSpec> hidden;
  Index output_dim = 0;
  ViewHeadKind view_head = ViewHeadKind::Discrete;
  Index num_views = 0;  // M, discrete head only

  // Throws ContractError when any structural invariant is violated.
  void validate() const;

  Index view_code_dim() const;                 // sum of random widths
  std::vector<Index> hybrid_layer_indices() const;
  Index view_out_dim() const { return view_head == ViewHeadKind::Discrete ? num_views : 1; }

  bool operator==(const Architecture&) const = default;
};

// Hidden-layer spec strings look like "512,512(10),512(10),1024,1024":
// comma-separated deterministic widths, each optionally annotated with a
// parenthesized random width.
std::vector<LayerSpec> parse_hidden_spec(const std::string& spec);

Architecture make_architecture(Index image_dim, const std::string& hidden_spec,
                               ViewHeadKind view_head, Index num_views);

inline constexpr const char* kDefaultHiddenSpec = "512,512(10),512(10),1024,1024";

}  // namespace mvp
