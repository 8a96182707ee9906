#pragma once

#include <cstdint>

namespace lab {

// Counter-based splittable generator: output i of a stream is a strong 64-bit
// hash of (seed, stream_id, i), with a per-stream odd increment in the
// SplittableRandom style. Copying the struct copies the position, so any
// function taking an RngStream by value is pure.
class RngStream {
  public:
    RngStream() : RngStream(0, 0) {}
    RngStream(std::uint64_t seed, std::uint64_t stream_id);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_id_; }

    std::uint64_t next_u64();
    double uniform();                          // [0, 1)
    double uniform_open();                     // (0, 1)
    double uniform_range(double a, double b);  // [a, b)
    double normal();                           // polar Box-Muller, unit variance

    // Independent stream derived from (seed, stream_id, k); position resets.
    RngStream substream(std::uint64_t k) const;

  private:
    std::uint64_t seed_ = 0;
    std::uint64_t stream_id_ = 0;
    std::uint64_t base_ = 0;
    std::uint64_t gamma_ = 0;
    std::uint64_t counter_ = 0;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace lab
