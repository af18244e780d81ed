// SPDX-License-Identifier: Apache-2.0

#include "awe/pairs.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "awe/rng.hpp"

namespace awe {

namespace {

struct LabelGroup {
  std::string label;
  std::vector<std::size_t> members;  // dataset indices, ascending
  std::size_t num_pairs() const {
    return members.size() * (members.size() - 1) / 2;
  }
};

// Labels with at least two instances, lexicographically sorted so sampling is
// independent of hash-map iteration order.
std::vector<LabelGroup> eligible_groups(const Dataset& data) {
  auto by_label = data.by_label();
  std::vector<LabelGroup> groups;
  for (auto& [label, members] : by_label) {
    if (members.size() < 2) continue;
    groups.push_back({label, std::move(members)});
  }
  std::sort(groups.begin(), groups.end(),
            [](const LabelGroup& a, const LabelGroup& b) { return a.label < b.label; });
  if (groups.empty())
    throw std::invalid_argument("pairs: no label with at least two instances");
  return groups;
}

// Decodes the k-th unordered pair (i < j) of a group.
std::pair<std::size_t, std::size_t> nth_pair(const LabelGroup& g, std::size_t k) {
  const std::size_t m = g.members.size();
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t row = m - 1 - i;
    if (k < row) return {g.members[i], g.members[i + 1 + k]};
    k -= row;
  }
  throw std::logic_error("pairs: pair index out of range");
}

std::pair<std::size_t, std::size_t> draw_pair(const std::vector<LabelGroup>& groups,
                                              const std::vector<std::size_t>& cum,
                                              Rng& rng, std::size_t* group_out) {
  const std::size_t total = cum.back();
  const std::size_t r = static_cast<std::size_t>(rng.below(total));
  const std::size_t g =
      static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), r) - cum.begin());
  if (group_out != nullptr) *group_out = g;
  const std::size_t before = g == 0 ? 0 : cum[g - 1];
  return nth_pair(groups[g], r - before);
}

std::vector<std::size_t> cumulative_pairs(const std::vector<LabelGroup>& groups) {
  std::vector<std::size_t> cum;
  cum.reserve(groups.size());
  std::size_t run = 0;
  for (const auto& g : groups) {
    run += g.num_pairs();
    cum.push_back(run);
  }
  return cum;
}

}  // namespace

PairList make_random_pairs(const Dataset& data, std::size_t n, std::uint64_t seed) {
  auto groups = eligible_groups(data);
  auto cum = cumulative_pairs(groups);
  Rng rng(seed);
  PairList out;
  out.provenance = PairList::Provenance::ground_truth;
  out.items.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.items.push_back(draw_pair(groups, cum, rng, nullptr));
  return out;
}

PairList make_balanced_pairs(const Dataset& data, std::size_t n, std::uint64_t seed) {
  auto groups = eligible_groups(data);
  const std::size_t cap = n == 0 ? 0 : (n + groups.size() - 1) / groups.size();
  Rng rng(seed);
  PairList out;
  out.provenance = PairList::Provenance::ground_truth;
  for (const auto& g : groups) {
    const std::size_t available = g.num_pairs();
    const std::size_t take = std::min(cap, available);
    // Partial Fisher-Yates over the pair indices: first `take` slots are a
    // uniform sample without replacement.
    std::vector<std::size_t> idx(available);
    for (std::size_t i = 0; i < available; ++i) idx[i] = i;
    for (std::size_t i = 0; i < take; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(available - i));
      std::swap(idx[i], idx[j]);
    }
    for (std::size_t i = 0; i < take; ++i) out.items.push_back(nth_pair(g, idx[i]));
  }
  rng.shuffle(out.items);
  if (out.items.size() > n) {
    out.items.resize(n);
  } else if (out.items.size() < n) {
    std::cerr << "warning: balanced pairs: only " << out.items.size()
              << " pairs available under the per-type cap, requested " << n << "\n";
  }
  return out;
}

PairList simulate_utd_pairs(const Dataset& data, std::size_t n, double label_noise_rate,
                            std::uint64_t seed) {
  if (label_noise_rate < 0.0 || label_noise_rate >= 1.0)
    throw std::invalid_argument("simulate_utd_pairs: label_noise_rate must be in [0,1)");
  auto groups = eligible_groups(data);
  auto cum = cumulative_pairs(groups);
  Rng rng(seed);

  // Different-type candidates per group, built on demand.
  std::vector<std::vector<std::size_t>> others(groups.size());
  auto candidates = [&](std::size_t g) -> const std::vector<std::size_t>& {
    if (others[g].empty()) {
      for (std::size_t i = 0; i < data.size(); ++i) {
        const std::string& label = data[i].label;
        if (label != kUnknownLabel && label != groups[g].label) others[g].push_back(i);
      }
      if (others[g].empty())
        throw std::invalid_argument("simulate_utd_pairs: no different-type segment exists");
    }
    return others[g];
  };

  PairList out;
  out.provenance = PairList::Provenance::simulated_utd;
  out.items.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t g = 0;
    auto pair = draw_pair(groups, cum, rng, &g);
    if (rng.uniform() < label_noise_rate) {
      const auto& cand = candidates(g);
      pair.second = cand[static_cast<std::size_t>(rng.below(cand.size()))];
    }
    out.items.push_back(pair);
  }
  return out;
}

void save_pairs(const std::string& path, const Dataset& data, const PairList& pairs) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("save_pairs: cannot write " + path);
  for (const auto& [a, b] : pairs.items) out << data[a].id << '\t' << data[b].id << '\n';
}

PairList load_pairs(const std::string& path, const Dataset& data) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_pairs: cannot read " + path);
  PairList out;
  out.provenance = PairList::Provenance::external;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string id1, id2;
    if (!std::getline(row, id1, '\t') || !std::getline(row, id2, '\t'))
      throw std::runtime_error("load_pairs: malformed line " + std::to_string(line_no) +
                               " in " + path);
    if (id1 == id2)
      throw std::runtime_error("load_pairs: self-pair '" + id1 + "' on line " +
                               std::to_string(line_no));
    out.items.emplace_back(data.index_of(id1), data.index_of(id2));
  }
  return out;
}

}  // namespace awe
