// Selects 20 inputs on a 2-d lattice with constrained DR variance reduction and prints the
// worst-case expected variance after each step.

#include <cstdio>

#include "dral/acquisition.hpp"
#include "dral/dataset.hpp"

int main() {
    using namespace dral;
    const Points grid = make_lattice({.dim = 2, .min = -1.0, .max = 1.0, .levels = 11});
    const GpState prior(grid, make_kernel(KernelKind::SquaredExponential, 0.5), 1e-4);
    const AmbiguitySet set(gaussian_reference(grid, 0.2), 0.01);

    GpState state = prior;
    for (int t = 1; t <= 20; ++t) {
        const Index next = select_cdr_variance_reduction(state, set);
        state = state.extend(next);
        std::printf("t=%2d  x=(% .1f, % .1f)  worst-case variance %.3e\n", t, grid(next, 0), grid(next, 1),
                    worst_case_variance(state, set).value);
    }
    return 0;
}
