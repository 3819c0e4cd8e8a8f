// Builds the two-bump ansatz for configs/two_wells.ini, relaxes it at two
// values of eps and prints where the maxima end up.

#include <cstdio>

#include "choquard/choquard.hpp"

using namespace choquard;

int main(int argc, char** argv) {
  const std::string path = argc > 1 ? argv[1] : CHOQUARD_CONFIGS "/two_wells.ini";
  const MultibumpConfig mc = load_multibump(read_config(path));
  const Grid3 g = make_grid(mc.n, mc.L);
  const Kernel k = build_kernel(mc.kernel, g);
  const GroundState U = solve_free(mc.potential.well_minimum(0), k, mc.solver);
  std::printf("profile: a = %.6f  rho = %.4f  E = %.4f\n", U.a, U.rho, U.gamma);

  for (double eps : {0.5, 0.25}) {
    PotentialSpec p = mc.potential;
    p.epsilon = eps;
    BumpSet bumps;
    for (std::size_t i = 0; i < p.wells.size(); ++i) bumps.push_back({static_cast<int>(i), p.wells[i].center, U, mc.phases[i]});
    const ScaledPotential sp(p, g);
    const ComplexField u = build_ansatz(bumps, p, g);
    const RelaxResult r = relax(u, bumps, sp, k, mc.relax);
    std::printf("\neps = %g  Gamma %.4f -> %.4f  (%zu steps, %d rejected)\n", eps, r.gamma.front(), r.gamma.back(),
                r.gamma.size() - 1, r.rejected);
    for (const LocalMax& m : local_maxima(r.u, p))
      std::printf("  max |u| = %.4f at eps*y = (%.3f, %.3f, %.3f), well %d, dist to minimizer %.3g\n", m.value,
                  eps * m.y[0], eps * m.y[1], eps * m.y[2], m.well, m.dist_to_minimizer);
  }
}
