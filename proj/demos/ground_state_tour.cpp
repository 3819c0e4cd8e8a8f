// Solves the limiting profile (a = 1 unless given) and prints its identities, the
// scale-path energy and the fitted decay rate.

#include <cstdio>

#include "choquard/choquard.hpp"

using namespace choquard;

int main(int argc, char** argv) {
  const double a = argc > 1 ? std::atof(argv[1]) : 1.0;
  const Grid3 g = make_grid(64, 16.0);
  const Kernel k = build_kernel(CoulombSpec{}, g);
  SolverParams p;
  p.dt = 10.0;
  const GroundState gs = solve_free(a, k, p);
  std::printf("a = %g  rho = %.6f  Gamma = %.6f  Lambda = %.6f  iterations = %d\n", gs.a, gs.rho, gs.gamma, gs.lambda_cap,
              gs.iterations);

  const VirialReport v = virial_report(gs, k);
  std::printf("pohozaev %.2e  gradient %.2e  mass %.2e  DD balance %.2e\n", v.pohozaev, v.gradient, v.mass, v.dd_balance);

  std::printf("\n   t   J(U(./t))   Gamma(t/2 + 3t^3/2 - t^5)\n");
  for (double t = 0.5; t <= 1.5001; t += 0.125) {
    try {
      const ScalePoint s = scale_path_energy(gs, k, t);
      std::printf("%5.3f  %10.6f  %10.6f\n", t, s.measured, s.closed_form);
    } catch (const ConfigError&) {
      std::printf("%5.3f  (U(./t) does not fit the box)\n", t);
    }
  }

  const DecayFit f = decay_fit(gs);
  std::printf("\ndecay: U ~ %.3g exp(-%.3f r), envelope ratio %.2f, elasticity %.2f\n", f.C, f.sigma, f.envelope_ratio,
              f.elasticity);
}
