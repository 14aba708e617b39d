#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "mvp/matrix.hpp"

namespace mvp {

// A synthetic "head": jittered landmarks on the front cap of the unit
// sphere, each with its own intensity.  Deterministic in (dataset seed, id).
struct IdentitySpec {
  Index id = 0;
  std::vector<std::array<double, 3>> landmarks;  // within the unit ball
  std::vector<double> intensities;               // in [0.5, 1.0]
};

struct RenderParams {
  double yaw_degrees = 0.0;  // in [-90, 90]
  double gain = 1.0;         // illumination, > 0
  Index size = 32;           // >= 8
  double blob_std = 1.6;     // Gaussian splat std, pixels

  void validate() const;
};

IdentitySpec generate_identity(std::uint64_t dataset_seed, Index id);

// Yaw-rotate about the vertical axis, project orthographically, splat
// Gaussian blobs (intensity x gain, with landmarks behind the image plane
// attenuated by 0.3), clamp to [0,1].
Matrix render_view(const IdentitySpec& spec, const RenderParams& rp);

// Mean horizontal landmark coordinate after yaw rotation (monotonicity probe).
double horizontal_landmark_centroid(const IdentitySpec& spec, double yaw_degrees);

}  // namespace mvp
