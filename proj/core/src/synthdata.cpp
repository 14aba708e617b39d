#include "mvp/synthdata.hpp"

#include <cmath>

#include "mvp/errors.hpp"
#include "mvp/rng.hpp"

namespace mvp {

namespace {

constexpr double kJitterStd = 0.12;
constexpr double kBackAttenuation = 0.3;
constexpr double kProjectionScale = 0.4;  // unit ball -> 0.4 * size pixels

// Face-like template on the front cap of the unit sphere (unit-normalized).
const std::array<std::array<double, 3>, 8> kTemplate = {{
    {-0.35, 0.30, 0.80},   // left eye
    {0.35, 0.30, 0.80},    // right eye
    {0.00, 0.05, 0.95},    // nose
    {-0.25, -0.35, 0.75},  // left mouth corner
    {0.25, -0.35, 0.75},   // right mouth corner
    {0.00, -0.60, 0.65},   // chin
    {-0.55, -0.05, 0.60},  // left cheek
    {0.55, -0.05, 0.60},   // right cheek
}};

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  return a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
}

}  // namespace

void RenderParams::validate() const {
  if (size < 8) throw ContractError("render params: size must be >= 8");
  if (gain <= 0.0) throw ContractError("render params: gain must be positive");
  if (yaw_degrees < -90.0 || yaw_degrees > 90.0) {
    throw ContractError("render params: yaw must lie in [-90, 90]");
  }
  if (blob_std <= 0.0) throw ContractError("render params: blob std must be positive");
}

IdentitySpec generate_identity(std::uint64_t dataset_seed, Index id) {
  Rng rng(mix_seed(dataset_seed, static_cast<std::uint64_t>(id)));
  IdentitySpec spec;
  spec.id = id;
  spec.landmarks.reserve(kTemplate.size());
  spec.intensities.reserve(kTemplate.size());
  for (const auto& base : kTemplate) {
    std::array<double, 3> p;
    double norm2 = 0.0;
    for (int i = 0; i < 3; ++i) norm2 += base[i] * base[i];
    const double inv = 1.0 / std::sqrt(norm2);
    for (int i = 0; i < 3; ++i) p[i] = base[i] * inv + rng.gaussian(0.0, kJitterStd);
    double len = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
    if (len > 1.0) {
      for (int i = 0; i < 3; ++i) p[i] /= len;
    }
    spec.landmarks.push_back(p);
    spec.intensities.push_back(rng.uniform(0.5, 1.0));
  }
  return spec;
}

Matrix render_view(const IdentitySpec& spec, const RenderParams& rp) {
  rp.validate();
  if (spec.landmarks.size() != spec.intensities.size()) {
    throw DimensionError("render_view: landmark/intensity count mismatch");
  }
  const double theta = rp.yaw_degrees * M_PI / 180.0;
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  const double scale = kProjectionScale * static_cast<double>(rp.size);
  const double half = static_cast<double>(rp.size) / 2.0;
  const double inv_two_var = 1.0 / (2.0 * rp.blob_std * rp.blob_std);

  Matrix image(rp.size, rp.size);
  for (Index k = 0; k < spec.landmarks.size(); ++k) {
    const auto& p = spec.landmarks[k];
    const double xr = p[0] * c + p[2] * s;   // rotated horizontal coordinate
    const double zr = -p[0] * s + p[2] * c;  // depth toward the viewer
    const double sx = xr * scale;
    const double sy = p[1] * scale;
    const double amp =
        spec.intensities[k] * rp.gain * (zr < 0.0 ? kBackAttenuation : 1.0);
    for (Index row = 0; row < rp.size; ++row) {
      // Pixel centers sit at index + 0.5; offsets from the image center keep
      // mirrored pixels at exactly negated coordinates.
      const double dy = (static_cast<double>(row) + 0.5 - half) + sy;
      for (Index col = 0; col < rp.size; ++col) {
        const double dx = (static_cast<double>(col) + 0.5 - half) - sx;
        image(row, col) += amp * std::exp(-(dx * dx + dy * dy) * inv_two_var);
      }
    }
  }
  for (Index i = 0; i < image.size(); ++i) {
    image[i] = std::min(1.0, std::max(0.0, image[i]));
  }
  return image;
}

double horizontal_landmark_centroid(const IdentitySpec& spec, double yaw_degrees) {
  const double theta = yaw_degrees * M_PI / 180.0;
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  double sum = 0.0;
  for (const auto& p : spec.landmarks) sum += p[0] * c + p[2] * s;
  return sum / static_cast<double>(spec.landmarks.size());
}

}  // namespace mvp
