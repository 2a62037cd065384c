#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "jga/common.hpp"

namespace jga {

// Deterministic random source. All randomness in the project flows through
// this class so that seeds reproduce bit-identical runs; distributions are
// hand-rolled because libstdc++'s are not pinned across versions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed), seed_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0,1) with 53-bit resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Inclusive bounds.
    int uniform_int(int lo, int hi) {
        check(hi >= lo, "uniform_int empty range");
        auto span = static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo) + 1;
        return lo + static_cast<int>(engine_() % span);
    }

    // Standard normal via Box-Muller; pairs are cached.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 1.0 - uniform(); // (0,1]
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Independent stream for a named purpose, derived from this generator's
    // seed; insensitive to how much this generator has already produced.
    Rng fork(const std::string& purpose) const { return Rng(derive_seed(seed_, purpose)); }

private:
    std::mt19937_64 engine_;
    std::uint64_t seed_;
    bool have_spare_ = false;
    double spare_ = 0;
};

} // namespace jga
