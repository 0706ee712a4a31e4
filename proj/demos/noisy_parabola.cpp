// AdaHessian on f(x) = x^2 + 0.1 x sin(20 pi x) from x = 1 with and without
// Hessian momentum. The curvature sign flips with the ripple; the moving
// average smooths it out, the raw estimate does not.

#include "adahessian/harness/experiments.hpp"

#include <cstdio>
#include <cstdlib>

using namespace adahessian;

int main(int argc, char** argv) {
    const double lr = argc > 1 ? std::atof(argv[1]) : harness::noisy_parabola_lr;
    const auto on = harness::noisy_parabola_run(lr, true, 1000);
    const auto off = harness::noisy_parabola_run(lr, false, 1000);

    std::printf("eta = %g, x0 = 1\n%6s  %14s  %14s\n", lr, "t", "momentum on", "momentum off");
    for (int t : {0, 1, 2, 5, 10, 20, 50, 100, 200, 500, 1000}) {
        std::printf("%6d  %14.6e  %14.6e\n", t, on.x[static_cast<std::size_t>(t)], off.x[static_cast<std::size_t>(t)]);
    }
    const auto settled = on.settled_below(1e-2);
    if (settled) {
        std::printf("momentum on stays below |x| = 1e-2 from t = %lld\n", static_cast<long long>(*settled));
    } else {
        std::printf("momentum on does not settle below |x| = 1e-2\n");
    }
    std::printf("momentum off: |x_1000| = %.4g\n", off.final_abs());
}
