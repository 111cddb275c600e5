#include "riskctl/rng.hpp"

#include <array>

namespace riskctl {

namespace {

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream_id) {
  std::array<std::uint32_t, 4> words = {
      static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
      static_cast<std::uint32_t>(stream_id), static_cast<std::uint32_t>(stream_id >> 32)};
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

}  // namespace

Rng::Rng(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id), engine_(make_engine(seed, stream_id)) {}

Rng Rng::derive(std::uint64_t id) const {
  // Child stream ids are a mix of the parent stream and the child index so that
  // nested derivations do not collide with siblings of the parent.
  std::array<std::uint32_t, 4> words = {
      static_cast<std::uint32_t>(stream_id_), static_cast<std::uint32_t>(stream_id_ >> 32),
      static_cast<std::uint32_t>(id), static_cast<std::uint32_t>(id >> 32)};
  std::seed_seq seq(words.begin(), words.end());
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  const std::uint64_t child = (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
  return Rng(seed_, child);
}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal() { return normal_(engine_); }

int Rng::categorical(std::span<const double> probs) {
  const double r = uniform();
  double acc = 0.0;
  int last_positive = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    acc += probs[i];
    last_positive = static_cast<int>(i);
    if (r < acc) return static_cast<int>(i);
  }
  // Rounding left r just above the accumulated mass.
  return last_positive;
}

std::size_t Rng::index(std::size_t n) {
  std::uniform_int_distribution<std::size_t> dist(0, n - 1);
  return dist(engine_);
}

}  // namespace riskctl
