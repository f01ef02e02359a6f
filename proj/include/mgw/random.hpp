#pragma once

// Seeded variate generation on top of std::mt19937_64, whose output sequence
// is fixed by the standard. The transforms below are written out so that a
// given seed yields the same draws with any standard library.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace mgw {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Uniform on the open interval (0, 1).
    double uniform() {
        return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
    }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double r = std::sqrt(-2.0 * std::log(uniform()));
        const double theta = 2.0 * std::numbers::pi * uniform();
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    double exponential(double scale) { return -scale * std::log(uniform()); }

    // Marsaglia-Tsang squeeze; shapes below one use the U^(1/a) boost.
    double gamma(double shape, double scale) {
        if (shape < 1.0) {
            const double boost = std::pow(uniform(), 1.0 / shape);
            return gamma(shape + 1.0, scale) * boost;
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double z;
            double v;
            do {
                z = normal();
                v = 1.0 + c * z;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform();
            if (u < 1.0 - 0.0331 * z * z * z * z) return d * v * scale;
            if (std::log(u) < 0.5 * z * z + d * (1.0 - v + std::log(v))) return d * v * scale;
        }
    }

    double weibull(double shape, double scale) {
        return scale * std::pow(-std::log(uniform()), 1.0 / shape);
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace mgw
