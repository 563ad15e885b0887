#pragma once

// Shared scalar utilities: angles, 2D vectors, deterministic RNG.
//
// Coordinate convention used throughout:
//   x is lateral (cm), y is fore-aft (cm) and increases uphill.
//   Headings phi are radians measured from +y, positive counter-clockwise,
//   normalized to (-pi, pi].  phi = 0 faces uphill.

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace grain {

inline constexpr double kPi = 3.14159265358979323846;

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
};

inline double norm(const Vec2& v) { return std::hypot(v.x, v.y); }
inline double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }

// Wraps an angle into (-pi, pi].  Throws on non-finite input.
inline double normalize_angle(double phi) {
    if (!std::isfinite(phi)) {
        throw std::domain_error("normalize_angle: non-finite angle");
    }
    double r = std::remainder(phi, 2.0 * kPi);  // (-pi, pi], except -pi
    if (r <= -kPi) r += 2.0 * kPi;
    return r;
}

// Heading unit vector for phi measured from +y, CCW positive.
inline Vec2 heading_vec(double phi) { return {-std::sin(phi), std::cos(phi)}; }

// Left-pointing unit vector of a robot with heading phi.
inline Vec2 left_vec(double phi) { return {-std::cos(phi), -std::sin(phi)}; }

// Bearing of (to - from) in the same convention as headings.
inline double bearing(const Vec2& from, const Vec2& to) {
    const Vec2 d = to - from;
    return normalize_angle(std::atan2(-d.x, d.y));
}

// Midpoint of two headings along the shorter arc.
inline double circle_midpoint(double a, double b) {
    a = normalize_angle(a);
    const double diff = normalize_angle(b - a);
    return normalize_angle(a + 0.5 * diff);
}

// Deterministic RNG with explicit distributions so that sequences are
// reproducible across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed), seed_mix_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    int uniform_int(int lo, int hi) {  // inclusive bounds
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<int>(engine_() % span);
    }

    // Standard normal via Box-Muller.
    double gauss() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * kPi * u2);
        have_spare_ = true;
        return r * std::cos(2.0 * kPi * u2);
    }

    double gauss(double mean, double std) { return mean + std * gauss(); }

    // Independent child stream, e.g. one per trial.
    Rng split(std::uint64_t salt) const {
        std::uint64_t z = seed_mix_ ^ (salt + 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return Rng(z ^ (z >> 31));
    }

private:
    std::mt19937_64 engine_;
    std::uint64_t seed_mix_ = 0;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace grain
