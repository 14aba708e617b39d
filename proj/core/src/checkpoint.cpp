#include "mvp/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "mvp/errors.hpp"

namespace mvp {

namespace {

constexpr std::uint32_t kVersion = 1;

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void put_u64(std::vector<unsigned char>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void put_f64(std::vector<unsigned char>& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  put_u64(out, bits);
}

class Reader {
 public:
  Reader(const unsigned char* data, std::size_t len) : data_(data), len_(len) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[at_ + i]) << (8 * i);
    at_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[at_ + i]) << (8 * i);
    at_ += 8;
    return v;
  }
  double f64() {
    const std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
  }
  std::size_t remaining() const { return len_ - at_; }

 private:
  void need(std::size_t n) {
    if (len_ - at_ < n) throw ParseError("checkpoint: truncated payload");
  }
  const unsigned char* data_;
  std::size_t len_;
  std::size_t at_ = 0;
};

}  // namespace

std::uint64_t fnv1a64(const unsigned char* data, std::size_t len) {
  std::uint64_t hash = 14695981039346656037ULL;
  for (std::size_t i = 0; i < len; ++i) {
    hash ^= data[i];
    hash *= 1099511628211ULL;
  }
  return hash;
}

void save_checkpoint(const Parameters& params, const std::string& path) {
  const Architecture& arch = params.arch;
  arch.validate();

  std::vector<unsigned char> bytes;
  bytes.reserve(64 + params.parameter_count() * 8);
  bytes.push_back('M');
  bytes.push_back('V');
  bytes.push_back('P');
  bytes.push_back('C');
  put_u32(bytes, kVersion);
  put_u32(bytes, static_cast<std::uint32_t>(arch.input_dim));
  put_u32(bytes, static_cast<std::uint32_t>(arch.output_dim));
  put_u32(bytes, static_cast<std::uint32_t>(arch.hidden.size()));
  for (const LayerSpec& l : arch.hidden) {
    put_u32(bytes, static_cast<std::uint32_t>(l.width));
    put_u32(bytes, static_cast<std::uint32_t>(l.rand_width));
  }
  put_u32(bytes, arch.view_head == ViewHeadKind::Discrete ? 0u : 1u);
  put_u32(bytes, static_cast<std::uint32_t>(arch.num_views));
  put_f64(bytes, params.sigma_y);
  put_f64(bytes, params.sigma_v);

  params.for_each_tensor([&](const std::string&, const Matrix& m) {
    for (Index i = 0; i < m.size(); ++i) put_f64(bytes, m[i]);
  });

  put_u64(bytes, fnv1a64(bytes.data(), bytes.size()));

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open checkpoint for writing: " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("short checkpoint write: " + path);
}

Parameters load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint: " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());

  if (bytes.size() < 12) throw ParseError("checkpoint: file too small");
  const std::size_t payload_len = bytes.size() - 8;
  Reader trailer(bytes.data() + payload_len, 8);
  if (trailer.u64() != fnv1a64(bytes.data(), payload_len)) {
    throw VerificationError("checkpoint: checksum mismatch (corrupted file): " + path);
  }
  if (std::memcmp(bytes.data(), "MVPC", 4) != 0) {
    throw ParseError("checkpoint: bad magic");
  }

  Reader r(bytes.data() + 4, payload_len - 4);
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    throw ParseError("checkpoint: unsupported version " + std::to_string(version));
  }
  Architecture arch;
  arch.input_dim = r.u32();
  arch.output_dim = r.u32();
  const std::uint32_t n_hidden = r.u32();
  arch.hidden.resize(n_hidden);
  for (std::uint32_t l = 0; l < n_hidden; ++l) {
    arch.hidden[l].width = r.u32();
    arch.hidden[l].rand_width = r.u32();
  }
  arch.view_head = r.u32() == 0 ? ViewHeadKind::Discrete : ViewHeadKind::Continuous;
  arch.num_views = r.u32();
  arch.validate();

  Parameters params = Parameters::zeros(arch);
  params.sigma_y = r.f64();
  params.sigma_v = r.f64();
  params.for_each_tensor([&](const std::string&, Matrix& m) {
    for (Index i = 0; i < m.size(); ++i) m[i] = r.f64();
  });
  if (r.remaining() != 0) {
    throw ParseError("checkpoint: payload size does not match the descriptor");
  }
  return params;
}

}  // namespace mvp
