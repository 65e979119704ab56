#pragma once

#include <cstddef>
#include <span>

namespace fwaccel {

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double residual_rms = 0.0;
    std::size_t count = 0;
};

// Ordinary least squares y = slope*x + intercept. Throws
// identification_failure for fewer than 2 points or zero x spread.
LineFit fit_line(std::span<const double> x, std::span<const double> y);

}  // namespace fwaccel
