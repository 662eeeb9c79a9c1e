#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mhng {

/// Raised when an input violates a documented precondition.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised for out-of-turn or malformed protocol traffic.
class ProtocolError : public std::runtime_error {
 public:
  explicit ProtocolError(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

using Rng = std::mt19937_64;
using SignIndex = int;
using CategoryIndex = int;

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ValidationError(msg);
}

/// splitmix64 finalizer; used to derive independent child seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for child stream `index` of `parent`. Stable across platforms.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) noexcept {
  return mix_seed(mix_seed(parent) ^ mix_seed(index + 0x632be59bd9b4e019ULL));
}

inline Rng make_rng(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  return Rng(seq);
}

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline bool bernoulli(Rng& rng, double p) {
  return uniform01(rng) < p;
}

/// Labels used on the wire and in logs: 0 -> "A", 1 -> "B", ...
inline std::string index_to_label(int index) {
  require(index >= 0 && index < 26, "label index out of range");
  return std::string(1, static_cast<char>('A' + index));
}

inline int label_to_index(std::string_view label, int count) {
  if (label.size() != 1 || label[0] < 'A' || label[0] >= 'A' + count)
    throw ValidationError("invalid label '" + std::string(label) + "'");
  return label[0] - 'A';
}

/// 64-bit FNV-1a; used for state hashes that must be stable across runs.
constexpr std::uint64_t fnv1a(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace mhng
