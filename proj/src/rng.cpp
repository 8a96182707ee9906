#include "lab/rng.hpp"

#include <cmath>

namespace lab {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id) : seed_(seed), stream_id_(stream_id) {
    base_ = mix64(seed + kGolden * mix64(stream_id + kGolden));
    gamma_ = mix64(stream_id ^ mix64(seed + 0x6A09E667F3BCC909ull)) | 1ull;
}

std::uint64_t RngStream::next_u64() {
    const std::uint64_t z = base_ + counter_ * gamma_;
    ++counter_;
    return mix64(z);
}

double RngStream::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform_open() {
    double u;
    do {
        u = uniform();
    } while (u == 0.0);
    return u;
}

double RngStream::uniform_range(double a, double b) {
    return a + (b - a) * uniform();
}

double RngStream::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u, v, s;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
}

RngStream RngStream::substream(std::uint64_t k) const {
    return RngStream(seed_, mix64(stream_id_ * kGolden + k + 1ull));
}

}  // namespace lab
