#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mvp/architecture.hpp"
#include "mvp/pair.hpp"

namespace mvp {

struct ManifestRecord {
  Index identity = 0;
  Index view_index = 0;
  double yaw = 0.0;
  Index illum_index = 0;
  std::string path;  // relative to the dataset root
};

struct DatasetManifest {
  std::uint64_t seed = 0;
  Index image_size = 32;
  double blob_std = 1.6;
  Index identity_count = 0;
  std::vector<double> views;   // yaw degrees
  std::vector<double> illums;  // gains
  std::vector<ManifestRecord> records;
};

void write_manifest(const DatasetManifest& manifest, const std::string& path);
DatasetManifest read_manifest(const std::string& path);

struct GenerateConfig {
  std::uint64_t seed = 1234;
  Index identities = 50;
  std::vector<double> views = {-45, -30, -15, 0, 15, 30, 45};
  std::vector<double> illums = {0.7, 1.0, 1.3};
  Index size = 32;
  double blob_std = 1.6;
};

// Renders every (identity, view, illumination) image under root
// (id<i>/v<k>_l<l>.pgm), writes root/manifest.txt, returns the manifest.
DatasetManifest generate_dataset(const GenerateConfig& config, const std::string& root);

// N evenly spaced illumination gains centered on 1.0 (N=1 -> {1.0}).
std::vector<double> default_illums(Index n);

enum class Pairing { AllViews, FrontalOnly };

// Loads images and assembles supervised pairs in model space (pixels - 0.5).
// Pairs combine views within the same illumination; FrontalOnly restricts
// targets to the 0-degree view.
std::vector<TrainingPair> build_pairs(const DatasetManifest& manifest, const std::string& root,
                                      Pairing pairing, ViewHeadKind head);

DatasetManifest filter_identities(const DatasetManifest& manifest, Index begin, Index end);
DatasetManifest filter_views(const DatasetManifest& manifest, const std::vector<double>& keep);

// Image (rows x cols) <-> model-space column vector.
Matrix image_to_model(const Matrix& image);
Matrix model_to_image(const Matrix& column, Index size);

}  // namespace mvp
