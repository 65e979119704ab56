#include "fwaccel/linefit.hpp"

#include <cmath>

#include "fwaccel/error.hpp"

namespace fwaccel {

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size())
        throw Error(Errc::invalid_input, "x/y length mismatch");
    const std::size_t n = x.size();
    if (n < 2)
        throw Error(Errc::identification_failure, "need at least 2 points for a line fit");

    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);

    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx;
        sxx += dx * dx;
        sxy += dx * (y[i] - my);
    }
    if (sxx <= 0.0)
        throw Error(Errc::identification_failure, "degenerate x spread in line fit");

    LineFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.count = n;

    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - (fit.slope * x[i] + fit.intercept);
        ss += r * r;
    }
    fit.residual_rms = std::sqrt(ss / static_cast<double>(n));
    return fit;
}

}  // namespace fwaccel
