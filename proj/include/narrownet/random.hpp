#pragma once

#include <cstdint>
#include <random>

namespace narrow {

/// Seedable generator with a fully specified output sequence.
///
/// The engine is std::mt19937_64, whose sequence is fixed by the C++
/// standard. Standard distributions are implementation defined, so doubles
/// are formed directly from the top 53 bits of each draw.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on [0, 1).
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform on [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    std::uint64_t next() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

}  // namespace narrow
