#include "mvp/pgm.hpp"

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <vector>

#include "mvp/errors.hpp"

namespace mvp {

namespace {

[[noreturn]] void malformed(const std::string& path, std::size_t offset, const std::string& what) {
  throw ParseError("pgm '" + path + "': " + what + " at byte " + std::to_string(offset));
}

// Reads one whitespace/comment-delimited header token, advancing `at`.
std::string next_token(const std::string& bytes, std::size_t& at, const std::string& path) {
  while (at < bytes.size()) {
    const char c = bytes[at];
    if (c == '#') {
      while (at < bytes.size() && bytes[at] != '\n') ++at;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      ++at;
    } else {
      break;
    }
  }
  if (at >= bytes.size()) malformed(path, at, "unexpected end of header");
  const std::size_t start = at;
  while (at < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[at])) &&
         bytes[at] != '#') {
    ++at;
  }
  return bytes.substr(start, at - start);
}

std::size_t parse_number(const std::string& token, std::size_t offset, const std::string& path) {
  if (token.empty()) malformed(path, offset, "empty number");
  std::size_t value = 0;
  for (char c : token) {
    if (!std::isdigit(static_cast<unsigned char>(c))) malformed(path, offset, "invalid number");
    value = value * 10 + static_cast<std::size_t>(c - '0');
  }
  return value;
}

}  // namespace

void write_pgm(const Matrix& image, const std::string& path) {
  if (image.empty()) throw ContractError("write_pgm: empty image");
  for (Index i = 0; i < image.size(); ++i) {
    if (!(image[i] >= 0.0 && image[i] <= 1.0)) {
      throw ContractError("write_pgm: pixel values must lie in [0,1]");
    }
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path);
  f << "P5\n" << image.cols() << " " << image.rows() << "\n255\n";
  std::vector<unsigned char> bytes(image.size());
  for (Index i = 0; i < image.size(); ++i) {
    bytes[i] = static_cast<unsigned char>(std::lround(image[i] * 255.0));
  }
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("short write: " + path);
}

Matrix read_pgm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  const std::string bytes = buf.str();

  std::size_t at = 0;
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
    malformed(path, 0, "missing P5 magic");
  }
  at = 2;
  std::size_t tok_at = at;
  auto token = [&]() {
    tok_at = at;
    std::string t = next_token(bytes, at, path);
    tok_at = at - t.size();
    return t;
  };
  const std::size_t width = parse_number(token(), tok_at, path);
  const std::size_t height = parse_number(token(), tok_at, path);
  const std::size_t maxval = parse_number(token(), tok_at, path);
  if (width == 0 || height == 0) malformed(path, tok_at, "zero dimension");
  if (maxval != 255) malformed(path, tok_at, "unsupported maxval (expected 255)");
  if (at >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[at]))) {
    malformed(path, at, "missing whitespace before pixel data");
  }
  ++at;  // exactly one whitespace byte separates header and raster
  const std::size_t need = width * height;
  if (bytes.size() - at < need) {
    malformed(path, bytes.size(), "truncated pixel data");
  }
  if (bytes.size() - at > need) {
    malformed(path, at + need, "trailing bytes after pixel data");
  }
  Matrix image(height, width);
  for (std::size_t i = 0; i < need; ++i) {
    image[i] = static_cast<double>(static_cast<unsigned char>(bytes[at + i])) / 255.0;
  }
  return image;
}

}  // namespace mvp
