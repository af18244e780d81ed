// SPDX-License-Identifier: Apache-2.0

#include "awe/rng.hpp"

#include <charconv>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace awe {

double Rng::normal() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_;
  }
  // u1 in (0,1] so the log is finite.
  double u1 = 1.0 - uniform();
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double a = 2.0 * std::numbers::pi * u2;
  cached_ = r * std::sin(a);
  has_cached_ = true;
  return r * std::cos(a);
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("Rng::below: n must be positive");
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = gen_();
  } while (x >= limit);
  return x % n;
}

std::string Rng::serialize() const {
  std::ostringstream os;
  os << gen_ << ' ' << (has_cached_ ? 1 : 0);
  if (has_cached_) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), cached_);
    os << ' ' << std::string(buf, p);
  }
  return os.str();
}

void Rng::restore(const std::string& text) {
  std::istringstream is(text);
  is >> gen_;
  int flag = 0;
  is >> flag;
  if (is.fail()) throw std::runtime_error("Rng::restore: malformed state string");
  has_cached_ = flag != 0;
  cached_ = 0.0;
  if (has_cached_) {
    std::string tok;
    is >> tok;
    double v = 0.0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || p != tok.data() + tok.size())
      throw std::runtime_error("Rng::restore: malformed cached value");
    cached_ = v;
  }
}

}  // namespace awe
