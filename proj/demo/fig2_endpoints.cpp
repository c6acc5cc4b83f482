// Prints the final squeezing of each fig2 trace for the default
// ensemble (10^6 spin-1 atoms, S0 = 5e7, kappa = 2 per segment).

#include <cstdio>

#include "singlet/ensemble.hpp"
#include "singlet/qnd_gaussian.hpp"

int main()
{
    using namespace singlet;
    const EnsembleParams atoms = EnsembleParams::from_spin(1'000'000, 1.0);
    const PulseParams pulse(5e7, 1.0, kInfinity, 8.0 / 9.0);
    const MeasurementSchedule schedule = MeasurementSchedule::sequential(2.0, 64);

    std::printf("%-16s %s\n", "trace", "final xi^2");
    std::printf("%-16s %.6f\n", "thermal", xi_squared(run_sequence(make_completely_mixed(atoms, pulse), schedule).final_state).xi_squared);
    std::printf("%-16s %.6f\n", "up/down", xi_squared(run_sequence(make_product_updown(atoms, pulse), schedule).final_state).xi_squared);
    for (double alpha : {50.0, 75.0, 100.0}) {
        MeasurementSchedule lossy = schedule;
        lossy.optical_depth = alpha;
        const GaussianState start = make_completely_mixed(atoms, pulse.with_optical_depth(alpha));
        std::printf("thermal a=%-6.0f %.6f\n", alpha, xi_squared(run_sequence(start, lossy).final_state).xi_squared);
    }
    return 0;
}
