#pragma once

#include <cstdint>
#include <limits>

namespace fedams {

enum class StreamPurpose : std::uint64_t {
  data = 1,
  sampling = 2,
  local_sgd = 3,
  diagnostics = 4,
};

struct StreamKey {
  StreamPurpose purpose = StreamPurpose::data;
  std::uint64_t client = 0;
  std::uint64_t round = 0;
};

// Random stream keyed by (master seed, purpose, client, round). The state is
// a pure function of the key, so streams can be created in any order on any
// thread and still reproduce the same draws. Generator is xoshiro256**,
// seeded through SplitMix64 from a mix of the key words.
class RandomStream {
 public:
  using result_type = std::uint64_t;

  RandomStream(std::uint64_t master_seed, StreamKey key);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() { return next(); }

  std::uint64_t next();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer on [0, bound). bound must be > 0.
  std::uint64_t uniform_below(std::uint64_t bound);
  /// Standard normal (Marsaglia polar method). Implemented here rather than
  /// via <random> so draws are identical across standard libraries.
  double normal();

 private:
  std::uint64_t s_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace fedams
