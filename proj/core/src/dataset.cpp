// SPDX-License-Identifier: Apache-2.0

#include "awe/dataset.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace awe {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void fail(const std::string& what) { throw std::runtime_error(what); }

void write_f32_le(std::ofstream& out, float v) {
  std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
  unsigned char b[4] = {static_cast<unsigned char>(bits & 0xff),
                        static_cast<unsigned char>((bits >> 8) & 0xff),
                        static_cast<unsigned char>((bits >> 16) & 0xff),
                        static_cast<unsigned char>((bits >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

float read_f32_le(const unsigned char* b) {
  std::uint32_t bits = static_cast<std::uint32_t>(b[0]) |
                       (static_cast<std::uint32_t>(b[1]) << 8) |
                       (static_cast<std::uint32_t>(b[2]) << 16) |
                       (static_cast<std::uint32_t>(b[3]) << 24);
  return std::bit_cast<float>(bits);
}

}  // namespace

std::size_t Dataset::index_of(const std::string& id) const {
  auto it = id_to_index_.find(id);
  if (it == id_to_index_.end()) fail("dataset: unknown segment id '" + id + "'");
  return it->second;
}

std::unordered_map<std::string, std::vector<std::size_t>> Dataset::by_label() const {
  std::unordered_map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (segments[i].label == kUnknownLabel) continue;
    groups[segments[i].label].push_back(i);
  }
  return groups;
}

void Dataset::add(Segment s) {
  if (s.frames.rank() != 2 || s.frames.rows() < 1)
    fail("dataset: segment '" + s.id + "' must carry a non-empty {T,D} frame matrix");
  if (feat_dim == 0) feat_dim = s.frames.cols();
  if (s.frames.cols() != feat_dim)
    fail("dataset: segment '" + s.id + "' has feature dim " +
         std::to_string(s.frames.cols()) + ", dataset uses " + std::to_string(feat_dim));
  if (!id_to_index_.emplace(s.id, segments.size()).second)
    fail("dataset: duplicate segment id '" + s.id + "'");
  segments.push_back(std::move(s));
}

void save_dataset(const std::string& directory, const Dataset& dataset) {
  fs::create_directories(directory);
  const fs::path dir(directory);
  std::ofstream index(dir / "index.tsv", std::ios::trunc);
  if (!index) fail("save_dataset: cannot write " + (dir / "index.tsv").string());
  for (const Segment& s : dataset.segments) {
    const std::string rel = s.id + ".bin";
    index << s.id << '\t' << s.label << '\t' << s.num_frames() << '\t' << s.feat_dim()
          << '\t' << rel << '\n';
    std::ofstream bin(dir / rel, std::ios::binary | std::ios::trunc);
    if (!bin) fail("save_dataset: cannot write " + (dir / rel).string());
    for (double v : s.frames.data) write_f32_le(bin, static_cast<float>(v));
  }
}

Dataset load_dataset(const std::string& directory) {
  const fs::path dir(directory);
  std::ifstream index(dir / "index.tsv");
  if (!index) fail("load_dataset: missing " + (dir / "index.tsv").string());
  Dataset out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(index, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string id, label, t_str, d_str, rel;
    if (!std::getline(row, id, '\t') || !std::getline(row, label, '\t') ||
        !std::getline(row, t_str, '\t') || !std::getline(row, d_str, '\t') ||
        !std::getline(row, rel, '\t'))
      fail("load_dataset: malformed index line " + std::to_string(line_no) + " in " +
           (dir / "index.tsv").string());
    std::size_t frames = 0, dim = 0;
    try {
      frames = std::stoul(t_str);
      dim = std::stoul(d_str);
    } catch (const std::exception&) {
      fail("load_dataset: bad T/D on index line " + std::to_string(line_no));
    }
    if (frames == 0 || dim == 0)
      fail("load_dataset: zero T or D on index line " + std::to_string(line_no));
    if (out.feat_dim != 0 && dim != out.feat_dim)
      fail("load_dataset: feature dim " + std::to_string(dim) + " of '" + id +
           "' conflicts with dataset dim " + std::to_string(out.feat_dim));

    const fs::path bin_path = dir / rel;
    std::ifstream bin(bin_path, std::ios::binary);
    if (!bin) fail("load_dataset: missing segment file " + bin_path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(bin)),
                                     std::istreambuf_iterator<char>());
    const std::size_t expected = frames * dim * 4;
    if (bytes.size() != expected)
      fail("load_dataset: " + bin_path.string() + " holds " +
           std::to_string(bytes.size()) + " bytes, expected " + std::to_string(expected) +
           " for " + std::to_string(frames) + "x" + std::to_string(dim));

    Segment s;
    s.id = id;
    s.label = label;
    std::vector<double> values(frames * dim);
    for (std::size_t i = 0; i < values.size(); ++i)
      values[i] = static_cast<double>(read_f32_le(bytes.data() + i * 4));
    s.frames = Array(Shape{frames, dim}, std::move(values));
    out.add(std::move(s));
  }
  if (out.segments.empty()) fail("load_dataset: empty index in " + directory);
  return out;
}

}  // namespace awe
