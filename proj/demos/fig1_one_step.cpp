// f(x, y) = 10x^2 + y^2 from (1, 1): AdaHessian with k = 1 lands on the
// optimum in one step, while gradient descent and Adam take many.

#include "adahessian/harness/experiments.hpp"
#include "adahessian/optim/baselines.hpp"

#include <cstdio>

using namespace adahessian;

int main() {
    const auto q = make_fig1_quadratic();
    const ParamVector ada = harness::fig1_one_step();
    std::printf("AdaHessian (lr 1, k 1): theta_1 = (%.3g, %.3g), loss %.3g\n\n", ada(0), ada(1), q.value(ada));

    BaselineOptions sgd_opts;
    sgd_opts.lr = 0.09;
    sgd_opts.beta1 = 0.0;
    BaselineOptions adam_opts;
    adam_opts.lr = 0.1;
    BaselineOptimizer sgd(BaselineKind::sgd, q.dim(), sgd_opts);
    BaselineOptimizer adam(BaselineKind::adam, q.dim(), adam_opts);
    ParamVector a = q.initial_point(0);
    ParamVector b = a;
    std::printf("%4s  %-24s  %-24s\n", "t", "SGD (lr 0.09)", "Adam (lr 0.1)");
    for (int t = 1; t <= 20; ++t) {
        a = sgd.step(a, q.gradient(a), nullptr);
        b = adam.step(b, q.gradient(b), nullptr);
        if (t <= 5 || t % 5 == 0) {
            std::printf("%4d  (%9.2e, %9.2e)  (%9.2e, %9.2e)\n", t, a(0), a(1), b(0), b(1));
        }
    }
    std::printf("\nloss after 20 steps: SGD %.3e, Adam %.3e\n", q.value(a), q.value(b));
}
