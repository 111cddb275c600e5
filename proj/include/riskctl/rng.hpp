#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace riskctl {

// Deterministic random stream identified by (seed, stream_id). Single consumer;
// parallel work must derive its own stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream_id = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  // Independent child stream. Same (parent, id) always yields the same child.
  Rng derive(std::uint64_t id) const;

  std::uint64_t next_u64() { return engine_(); }
  // Uniform on [0, 1) with 53 bits of resolution.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  // Index drawn from an (already normalized) probability vector.
  int categorical(std::span<const double> probs);
  // Uniform index in [0, n).
  std::size_t index(std::size_t n);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

inline Rng seeded_rng(std::uint64_t seed, std::uint64_t stream_id = 0) { return Rng(seed, stream_id); }

}  // namespace riskctl
