// SPDX-License-Identifier: Apache-2.0

#include "awe/checkpoint.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace awe::train {

namespace {

constexpr char kMagic[] = "AWECKPT1";

std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

double parse_double(const std::string& s, const std::string& what) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw std::runtime_error("checkpoint: malformed double in " + what + ": '" + s + "'");
  return v;
}

std::size_t parse_size(const std::string& s, const std::string& what) {
  std::size_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw std::runtime_error("checkpoint: malformed integer in " + what + ": '" + s + "'");
  return v;
}

void append_f64_le(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i)
    out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

double read_f64_le(const unsigned char* b) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

struct NamedParam {
  std::string name;
  const Array* array;
};

std::vector<NamedParam> named_params(const Checkpoint& c) {
  std::vector<NamedParam> out;
  auto& model = const_cast<Checkpoint&>(c).model;
  visit_params(model, [&](const std::string& name, Array& a) { out.push_back({name, &a}); });
  if (!c.opt.empty()) {
    std::size_t i = 0;
    auto& model2 = const_cast<Checkpoint&>(c).model;
    visit_params(model2, [&](const std::string& name, Array&) {
      out.push_back({"adam.m." + name, &c.opt.m[i]});
      out.push_back({"adam.v." + name, &c.opt.v[i]});
      ++i;
    });
  }
  return out;
}

}  // namespace

Model make_model(std::size_t feat_dim, std::size_t hidden_dim, std::size_t latent_dim,
                 std::size_t num_layers, bool decoder_bidirectional) {
  Model m;
  m.encoder = rnn::make_encoder(feat_dim, hidden_dim, latent_dim, num_layers);
  m.decoder = rnn::make_decoder(latent_dim, hidden_dim, feat_dim, num_layers,
                                decoder_bidirectional);
  return m;
}

void init_model(Model& model, Rng& rng) {
  rnn::init_params(model.encoder, rng);
  rnn::init_params(model.decoder, rng);
}

void visit_params(Model& model, const rnn::ParamVisitor& fn) {
  rnn::visit_params(model.encoder, fn);
  rnn::visit_params(model.decoder, fn);
}

std::string Checkpoint::config_value(const std::string& key) const {
  for (const auto& [k, v] : config)
    if (k == key) return v;
  return "";
}

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
  if (!checkpoint.opt.empty()) {
    std::size_t model_count = 0;
    auto& model = const_cast<Checkpoint&>(checkpoint).model;
    visit_params(model, [&](const std::string&, Array&) { ++model_count; });
    if (checkpoint.opt.m.size() != model_count || checkpoint.opt.v.size() != model_count)
      throw std::logic_error("save_checkpoint: optimizer state misaligned with parameters");
  }

  const auto params = named_params(checkpoint);

  std::ostringstream header;
  for (const auto& [k, v] : checkpoint.config) header << "config " << k << ' ' << v << '\n';
  header << "meta step " << checkpoint.step << '\n';
  header << "meta epoch " << checkpoint.epoch << '\n';
  header << "meta best_val_ap "
         << (checkpoint.best_val_ap < 0.0 ? "NA" : format_double(checkpoint.best_val_ap))
         << '\n';
  if (!checkpoint.opt.empty()) header << "meta adam_step " << checkpoint.opt.t << '\n';
  if (!checkpoint.rng_state.empty()) header << "rng " << checkpoint.rng_state << '\n';

  std::size_t offset = 0;
  for (const auto& p : params) {
    header << "param " << p.name << ' ' << p.array->rank();
    for (std::size_t d : p.array->shape) header << ' ' << d;
    header << ' ' << offset << '\n';
    offset += p.array->size() * 8;
  }
  const std::string header_text = header.str();

  std::string payload;
  payload.reserve(offset);
  for (const auto& p : params)
    for (double v : p.array->data) append_f64_le(payload, v);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("save_checkpoint: cannot write " + path);
  out.write(kMagic, 8);
  const std::string len = std::to_string(header_text.size()) + "\n";
  out.write(len.data(), static_cast<std::streamsize>(len.size()));
  out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw std::runtime_error("save_checkpoint: short write to " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot read " + path);
  char magic[8];
  in.read(magic, 8);
  if (in.gcount() != 8 || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("load_checkpoint: " + path + " is not a checkpoint file");
  std::string len_line;
  if (!std::getline(in, len_line))
    throw std::runtime_error("load_checkpoint: truncated header length in " + path);
  const std::size_t header_len = parse_size(len_line, "header length");
  std::string header_text(header_len, '\0');
  in.read(header_text.data(), static_cast<std::streamsize>(header_len));
  if (static_cast<std::size_t>(in.gcount()) != header_len)
    throw std::runtime_error("load_checkpoint: truncated header in " + path);
  std::vector<unsigned char> payload((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());

  Checkpoint c;
  struct ParamLine {
    std::string name;
    Shape shape;
    std::size_t offset;
  };
  std::vector<ParamLine> param_lines;
  std::int64_t adam_step = -1;

  std::istringstream hs(header_text);
  std::string line;
  while (std::getline(hs, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "config") {
      std::string key;
      ls >> key;
      std::string value;
      std::getline(ls, value);
      if (!value.empty() && value.front() == ' ') value.erase(0, 1);
      c.config.emplace_back(key, value);
    } else if (tag == "meta") {
      std::string key, value;
      ls >> key >> value;
      if (key == "step") c.step = static_cast<std::int64_t>(parse_size(value, "meta step"));
      else if (key == "epoch") c.epoch = static_cast<std::int64_t>(parse_size(value, "meta epoch"));
      else if (key == "best_val_ap") c.best_val_ap = value == "NA" ? -1.0 : parse_double(value, "best_val_ap");
      else if (key == "adam_step") adam_step = static_cast<std::int64_t>(parse_size(value, "adam_step"));
      else throw std::runtime_error("load_checkpoint: unknown meta key '" + key + "'");
    } else if (tag == "rng") {
      std::string rest;
      std::getline(ls, rest);
      if (!rest.empty() && rest.front() == ' ') rest.erase(0, 1);
      c.rng_state = rest;
    } else if (tag == "param") {
      ParamLine p;
      std::size_t rank = 0;
      ls >> p.name >> rank;
      p.shape.resize(rank);
      for (std::size_t i = 0; i < rank; ++i) ls >> p.shape[i];
      ls >> p.offset;
      if (ls.fail())
        throw std::runtime_error("load_checkpoint: malformed param line '" + line + "'");
      param_lines.push_back(std::move(p));
    } else {
      throw std::runtime_error("load_checkpoint: unknown header record '" + tag + "'");
    }
  }

  // Rebuild the architecture from the config snapshot.
  auto need = [&](const char* key) {
    const std::string v = c.config_value(key);
    if (v.empty())
      throw std::runtime_error("load_checkpoint: config key '" + std::string(key) +
                               "' missing from " + path);
    return v;
  };
  const std::size_t feat = parse_size(need("feat_dim"), "feat_dim");
  const std::size_t hidden = parse_size(need("hidden_dim"), "hidden_dim");
  const std::size_t latent = parse_size(need("latent_dim"), "latent_dim");
  const std::size_t layers = parse_size(need("num_layers"), "num_layers");
  const std::string bidi = need("decoder_bidirectional");
  if (bidi != "true" && bidi != "false")
    throw std::runtime_error("load_checkpoint: decoder_bidirectional must be true/false");
  c.model = make_model(feat, hidden, latent, layers, bidi == "true");

  std::map<std::string, Array*> slots;
  visit_params(c.model, [&](const std::string& name, Array& a) { slots[name] = &a; });
  bool has_adam = false;
  for (const auto& p : param_lines)
    if (p.name.rfind("adam.", 0) == 0) has_adam = true;
  if (has_adam) {
    std::size_t count = slots.size();
    c.opt.m.resize(count);
    c.opt.v.resize(count);
    std::size_t i = 0;
    visit_params(c.model, [&](const std::string& name, Array& a) {
      c.opt.m[i] = Array::zeros(a.shape);
      c.opt.v[i] = Array::zeros(a.shape);
      slots["adam.m." + name] = &c.opt.m[i];
      slots["adam.v." + name] = &c.opt.v[i];
      ++i;
    });
    if (adam_step < 0)
      throw std::runtime_error("load_checkpoint: optimizer arrays without meta adam_step");
    c.opt.t = adam_step;
  }

  std::size_t filled = 0;
  for (const auto& p : param_lines) {
    auto it = slots.find(p.name);
    if (it == slots.end())
      throw std::runtime_error("load_checkpoint: unexpected parameter '" + p.name + "'");
    Array& dst = *it->second;
    if (dst.shape != p.shape)
      throw std::runtime_error("load_checkpoint: shape mismatch for '" + p.name + "': file " +
                               shape_str(p.shape) + " vs model " + shape_str(dst.shape));
    const std::size_t bytes = dst.size() * 8;
    if (p.offset + bytes > payload.size())
      throw std::runtime_error("load_checkpoint: payload too short for '" + p.name + "'");
    for (std::size_t i = 0; i < dst.size(); ++i)
      dst.data[i] = read_f64_le(payload.data() + p.offset + i * 8);
    ++filled;
  }
  if (filled != slots.size())
    throw std::runtime_error("load_checkpoint: " + std::to_string(slots.size() - filled) +
                             " parameters missing from " + path);
  return c;
}

}  // namespace awe::train
