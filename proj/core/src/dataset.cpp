#include "mvp/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "mvp/errors.hpp"
#include "mvp/pgm.hpp"
#include "mvp/synthdata.hpp"

namespace mvp {

namespace {

std::string join_doubles(const std::vector<double>& xs) {
  std::string out;
  char buf[64];
  for (Index i = 0; i < xs.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", xs[i]);
    if (i) out += ",";
    out += buf;
  }
  return out;
}

std::vector<double> split_doubles(const std::string& text, Index line_no) {
  std::vector<double> out;
  if (text.empty()) return out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const double v = std::stod(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ParseError("manifest: bad number '" + item + "' at line " + std::to_string(line_no));
    }
  }
  return out;
}

std::string expect_keyed_line(std::ifstream& f, const std::string& key, Index& line_no) {
  std::string line;
  if (!std::getline(f, line)) {
    throw ParseError("manifest: missing '" + key + "' line at line " + std::to_string(line_no + 1));
  }
  ++line_no;
  if (line.rfind(key + " ", 0) != 0) {
    throw ParseError("manifest: expected '" + key + "' at line " + std::to_string(line_no));
  }
  return line.substr(key.size() + 1);
}

}  // namespace

void write_manifest(const DatasetManifest& manifest, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot open manifest for writing: " + path);
  char buf[128];
  f << "mvp-manifest v1\n";
  f << "seed " << manifest.seed << "\n";
  f << "size " << manifest.image_size << "\n";
  std::snprintf(buf, sizeof(buf), "%.17g", manifest.blob_std);
  f << "blob_std " << buf << "\n";
  f << "identities " << manifest.identity_count << "\n";
  f << "views " << join_doubles(manifest.views) << "\n";
  f << "illums " << join_doubles(manifest.illums) << "\n";
  f << "records " << manifest.records.size() << "\n";
  for (const ManifestRecord& r : manifest.records) {
    std::snprintf(buf, sizeof(buf), "%.17g", r.yaw);
    f << r.identity << " " << r.view_index << " " << buf << " " << r.illum_index << " " << r.path
      << "\n";
  }
  if (!f) throw IoError("short manifest write: " + path);
}

DatasetManifest read_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open manifest: " + path);
  DatasetManifest m;
  Index line_no = 0;

  std::string line;
  if (!std::getline(f, line) || line != "mvp-manifest v1") {
    throw ParseError("manifest: bad magic at line 1");
  }
  ++line_no;

  auto parse_u64 = [&](const std::string& text, const char* what) {
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(text, &used);
      if (used != text.size()) throw std::invalid_argument(text);
      return static_cast<std::uint64_t>(v);
    } catch (const std::exception&) {
      throw ParseError("manifest: bad " + std::string(what) + " at line " +
                       std::to_string(line_no));
    }
  };

  m.seed = parse_u64(expect_keyed_line(f, "seed", line_no), "seed");
  m.image_size = static_cast<Index>(parse_u64(expect_keyed_line(f, "size", line_no), "size"));
  {
    const std::string text = expect_keyed_line(f, "blob_std", line_no);
    const std::vector<double> v = split_doubles(text, line_no);
    if (v.size() != 1) throw ParseError("manifest: bad blob_std at line " + std::to_string(line_no));
    m.blob_std = v[0];
  }
  m.identity_count =
      static_cast<Index>(parse_u64(expect_keyed_line(f, "identities", line_no), "identities"));
  m.views = split_doubles(expect_keyed_line(f, "views", line_no), line_no);
  m.illums = split_doubles(expect_keyed_line(f, "illums", line_no), line_no);
  const Index record_count =
      static_cast<Index>(parse_u64(expect_keyed_line(f, "records", line_no), "records"));

  m.records.reserve(record_count);
  for (Index i = 0; i < record_count; ++i) {
    if (!std::getline(f, line)) {
      throw ParseError("manifest: missing record at line " + std::to_string(line_no + 1));
    }
    ++line_no;
    std::istringstream ss(line);
    ManifestRecord r;
    std::size_t identity = 0, view_index = 0, illum_index = 0;
    if (!(ss >> identity >> view_index >> r.yaw >> illum_index >> r.path)) {
      throw ParseError("manifest: malformed record at line " + std::to_string(line_no));
    }
    std::string extra;
    if (ss >> extra) {
      throw ParseError("manifest: trailing field at line " + std::to_string(line_no));
    }
    r.identity = identity;
    r.view_index = view_index;
    r.illum_index = illum_index;
    if (r.view_index >= m.views.size()) {
      throw ParseError("manifest: view index out of range at line " + std::to_string(line_no));
    }
    if (r.illum_index >= m.illums.size()) {
      throw ParseError("manifest: illumination index out of range at line " +
                       std::to_string(line_no));
    }
    m.records.push_back(std::move(r));
  }
  if (std::getline(f, line) && !line.empty()) {
    throw ParseError("manifest: trailing content at line " + std::to_string(line_no + 1));
  }
  return m;
}

std::vector<double> default_illums(Index n) {
  if (n == 0) throw ContractError("default_illums: need at least one illumination");
  if (n == 1) return {1.0};
  std::vector<double> out(n);
  for (Index i = 0; i < n; ++i) {
    out[i] = 0.7 + 0.6 * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  return out;
}

DatasetManifest generate_dataset(const GenerateConfig& config, const std::string& root) {
  if (config.identities == 0) throw ContractError("generate_dataset: need at least one identity");
  if (config.views.empty()) throw ContractError("generate_dataset: need at least one view");
  if (config.illums.empty()) {
    throw ContractError("generate_dataset: need at least one illumination");
  }

  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw IoError("cannot create dataset root: " + root);

  DatasetManifest m;
  m.seed = config.seed;
  m.image_size = config.size;
  m.blob_std = config.blob_std;
  m.identity_count = config.identities;
  m.views = config.views;
  m.illums = config.illums;

  for (Index id = 0; id < config.identities; ++id) {
    const IdentitySpec spec = generate_identity(config.seed, id);
    const std::string dir = "id" + std::to_string(id);
    fs::create_directories(fs::path(root) / dir, ec);
    if (ec) throw IoError("cannot create identity dir under: " + root);
    for (Index k = 0; k < config.views.size(); ++k) {
      for (Index l = 0; l < config.illums.size(); ++l) {
        RenderParams rp;
        rp.yaw_degrees = config.views[k];
        rp.gain = config.illums[l];
        rp.size = config.size;
        rp.blob_std = config.blob_std;
        const Matrix image = render_view(spec, rp);
        ManifestRecord r;
        r.identity = id;
        r.view_index = k;
        r.yaw = config.views[k];
        r.illum_index = l;
        r.path = dir + "/v" + std::to_string(k) + "_l" + std::to_string(l) + ".pgm";
        write_pgm(image, (fs::path(root) / r.path).string());
        m.records.push_back(std::move(r));
      }
    }
  }
  write_manifest(m, (fs::path(root) / "manifest.txt").string());
  return m;
}

Matrix image_to_model(const Matrix& image) {
  Matrix col(image.size(), 1);
  for (Index i = 0; i < image.size(); ++i) col[i] = image[i] - 0.5;
  return col;
}

Matrix model_to_image(const Matrix& column, Index size) {
  if (column.size() != size * size) {
    throw DimensionError("model_to_image: length does not match size^2");
  }
  Matrix image(size, size);
  for (Index i = 0; i < image.size(); ++i) {
    image[i] = std::min(1.0, std::max(0.0, column[i] + 0.5));
  }
  return image;
}

std::vector<TrainingPair> build_pairs(const DatasetManifest& manifest, const std::string& root,
                                      Pairing pairing, ViewHeadKind head) {
  namespace fs = std::filesystem;
  const Index m_views = manifest.views.size();

  Index frontal_index = m_views;
  if (pairing == Pairing::FrontalOnly) {
    for (Index k = 0; k < m_views; ++k) {
      if (manifest.views[k] == 0.0) frontal_index = k;
    }
    if (frontal_index == m_views) {
      throw ContractError("build_pairs: FrontalOnly pairing requires a 0-degree view");
    }
  }

  // (identity, illum) -> view index -> model-space image.
  std::map<std::pair<Index, Index>, std::map<Index, Matrix>> groups;
  for (const ManifestRecord& r : manifest.records) {
    const Matrix image = read_pgm((fs::path(root) / r.path).string());
    if (image.rows() != manifest.image_size || image.cols() != manifest.image_size) {
      throw ContractError("build_pairs: image size mismatch for " + r.path);
    }
    groups[{r.identity, r.illum_index}][r.view_index] = image_to_model(image);
  }

  std::vector<TrainingPair> pairs;
  for (const auto& [key, by_view] : groups) {
    for (const auto& [j, x] : by_view) {
      for (const auto& [k, y] : by_view) {
        if (pairing == Pairing::FrontalOnly && k != frontal_index) continue;
        TrainingPair pair;
        pair.x = x;
        pair.y_hat = y;
        pair.identity = key.first;
        pair.input_view = j;
        pair.output_view = k;
        if (head == ViewHeadKind::Discrete) {
          pair.view_target = Matrix(m_views, 1);
          pair.view_target[k] = 1.0;
        } else {
          pair.view_target = Matrix(1, 1);
          pair.view_target[0] = manifest.views[k] / 90.0;
        }
        pairs.push_back(std::move(pair));
      }
    }
  }
  return pairs;
}

DatasetManifest filter_identities(const DatasetManifest& manifest, Index begin, Index end) {
  DatasetManifest out = manifest;
  out.records.clear();
  for (const ManifestRecord& r : manifest.records) {
    if (r.identity >= begin && r.identity < end) out.records.push_back(r);
  }
  return out;
}

DatasetManifest filter_views(const DatasetManifest& manifest, const std::vector<double>& keep) {
  DatasetManifest out = manifest;
  out.records.clear();
  for (const ManifestRecord& r : manifest.records) {
    if (std::find(keep.begin(), keep.end(), r.yaw) != keep.end()) out.records.push_back(r);
  }
  return out;
}

}  // namespace mvp
