#include "mvp/architecture.hpp"

#include <cctype>
#include <cstdlib>
#include <string>

#include "mvp/errors.hpp"

namespace mvp {

namespace {

Index parse_count(const std::string& text, const std::string& where) {
  if (text.empty()) throw ParseError("hidden spec: missing number in " + where);
  for (char ch : text) {
    if (!std::isdigit(static_cast<unsigned char>(ch))) {
      throw ParseError("hidden spec: invalid number '" + text + "' in " + where);
    }
  }
  const unsigned long long v = std::strtoull(text.c_str(), nullptr, 10);
  if (v == 0) throw ParseError("hidden spec: width must be positive in " + where);
  return static_cast<Index>(v);
}

std::string strip(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

}  // namespace

void Architecture::validate() const {
  if (input_dim == 0) throw ContractError("architecture: input dim must be positive");
  if (output_dim == 0) throw ContractError("architecture: output dim must be positive");
  if (hidden.empty()) throw ContractError("architecture: at least one hidden layer required");
  for (const LayerSpec& l : hidden) {
    if (l.width == 0) throw ContractError("architecture: hidden width must be positive");
  }
  if (view_head == ViewHeadKind::Discrete && num_views < 2) {
    throw ContractError("architecture: discrete view head requires at least 2 views");
  }
}

Index Architecture::view_code_dim() const {
  Index total = 0;
  for (const LayerSpec& l : hidden) total += l.rand_width;
  return total;
}

std::vector<Index> Architecture::hybrid_layer_indices() const {
  std::vector<Index> out;
  for (Index i = 0; i < hidden.size(); ++i) {
    if (hidden[i].hybrid()) out.push_back(i);
  }
  return out;
}

std::vector<LayerSpec> parse_hidden_spec(const std::string& spec) {
  std::vector<LayerSpec> layers;
  std::size_t pos = 0;
  int token_index = 0;
  while (pos <= spec.size()) {
    const std::size_t comma = spec.find(',', pos);
    const std::string raw =
        strip(spec.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos));
    ++token_index;
    const std::string where = "token " + std::to_string(token_index);
    if (raw.empty()) throw ParseError("hidden spec: empty " + where);

    LayerSpec layer;
    const std::size_t open = raw.find('(');
    if (open == std::string::npos) {
      layer.width = parse_count(raw, where);
    } else {
      if (raw.back() != ')') throw ParseError("hidden spec: unterminated '(' in " + where);
      layer.width = parse_count(strip(raw.substr(0, open)), where);
      layer.rand_width = parse_count(strip(raw.substr(open + 1, raw.size() - open - 2)), where);
    }
    layers.push_back(layer);

    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (layers.empty()) throw ParseError("hidden spec: no layers");
  return layers;
}

Architecture make_architecture(Index image_dim, const std::string& hidden_spec,
                               ViewHeadKind view_head, Index num_views) {
  Architecture arch;
  arch.input_dim = image_dim;
  arch.hidden = parse_hidden_spec(hidden_spec);
  arch.output_dim = image_dim;
  arch.view_head = view_head;
  arch.num_views = view_head == ViewHeadKind::Discrete ? num_views : 0;
  arch.validate();
  return arch;
}

}  // namespace mvp
