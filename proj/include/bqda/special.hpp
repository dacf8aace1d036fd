#pragma once

#include <array>
#include <cmath>
#include <numbers>

namespace bqda {

// ln Gamma(x) for x > 0, Lanczos approximation (g = 7, nine terms).
// Reentrant: unlike std::lgamma it touches no global sign state.
inline double log_gamma(double x) {
    static constexpr std::array<double, 9> kCoefficients = {
        0.99999999999980993,     676.5203681218851,     -1259.1392167224028,
        771.32342877765313,      -176.61502916214059,   12.507343278686905,
        -0.13857109526572012,    9.9843695780195716e-6, 1.5056327351493116e-7};
    static constexpr double kG = 7.0;
    if (x < 0.5) {
        // Reflection: Gamma(x) Gamma(1-x) = pi / sin(pi x)
        return std::log(std::numbers::pi / std::abs(std::sin(std::numbers::pi * x))) -
               log_gamma(1.0 - x);
    }
    const double z = x - 1.0;
    double series = kCoefficients[0];
    for (std::size_t i = 1; i < kCoefficients.size(); ++i) {
        series += kCoefficients[i] / (z + static_cast<double>(i));
    }
    const double t = z + kG + 0.5;
    return 0.5 * std::log(2.0 * std::numbers::pi) + (z + 0.5) * std::log(t) - t + std::log(series);
}

}  // namespace bqda
