#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <boost/version.hpp>
#include <openssl/evp.h>

#include "choquard/choquard.hpp"

#ifndef CHOQUARD_VERSION
#define CHOQUARD_VERSION "dev"
#endif

namespace fs = std::filesystem;
using namespace choquard;

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  char b[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(b, sizeof b, "%02x", md[i]);
    hex += b;
  }
  return hex;
}

/// Run metadata written next to the outputs.
class Manifest {
 public:
  Manifest(int argc, char** argv) : start_(std::chrono::steady_clock::now()) {
    for (int i = 0; i < argc; ++i) args_ += (i ? " " : "") + std::string(argv[i]);
  }
  void echo_file(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    configs_.emplace_back(path, ss.str());
  }
  void timing(const std::string& what, double seconds) { timings_.emplace_back(what, seconds); }
  void output(const std::string& path) { outputs_.push_back(path); }

  void write(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot write " + path);
    os << "command = " << args_ << "\n";
    os << "choquard_version = " << CHOQUARD_VERSION << "\n";
    os << "fftw_version = " << fftw_version << "\n";
    os << "boost_version = " << BOOST_LIB_VERSION << "\n";
    os << "compiler = " << __VERSION__ << "\n";
    os << "threads = " << fft::thread_count() << "\n";
    for (const auto& [what, s] : timings_) os << "time." << what << " = " << num(s) << "\n";
    const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    os << "time.total = " << num(total) << "\n";
    for (const auto& f : outputs_) os << "sha256." << fs::path(f).filename().string() << " = " << sha256_file(f) << "\n";
    for (const auto& [p, text] : configs_) os << "\n[config " << p << "]\n" << text;
  }

 private:
  std::string args_;
  std::chrono::steady_clock::time_point start_;
  std::vector<std::pair<std::string, std::string>> configs_;
  std::vector<std::pair<std::string, double>> timings_;
  std::vector<std::string> outputs_;
};

class Stopwatch {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

 private:
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create directory " + dir + ": " + ec.message());
}

void ensure_parent(const std::string& file) {
  const fs::path p = fs::path(file).parent_path();
  if (!p.empty()) ensure_dir(p.string());
}

Kernel make_kernel(const std::string& spec, const Grid3& g, const std::string& cache) {
  if (!cache.empty() && fs::exists(cache)) {
    Kernel k = read_kernel(cache);
    require(k.grid() == g, "cached kernel " + cache + " was built for a different grid");
    return k;
  }
  Kernel k = build_kernel(parse_kernel_spec(spec), g);
  if (!cache.empty()) write_kernel(cache, k);
  return k;
}

// Ground-state directories hold ground_state.chqf and report.txt.

std::map<std::string, std::string> read_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path);
  std::map<std::string, std::string> kv;
  for (std::string line; std::getline(in, line);) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      s.erase(0, s.find_first_not_of(" \t"));
      s.erase(s.find_last_not_of(" \t\r") + 1);
      return s;
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

struct LoadedGround {
  GroundState gs;
  std::string kernel;
};

LoadedGround load_ground(const std::string& dir, const std::string& kernel_cache) {
  const auto kv = read_report(dir + "/report.txt");
  auto field = [&](const std::string& k) {
    auto it = kv.find(k);
    if (it == kv.end()) throw ConfigError("report in " + dir + " lacks " + k);
    return it->second;
  };
  AnyField f = read_field(dir + "/ground_state.chqf");
  auto* U = std::get_if<RealField>(&f);
  if (!U) throw ConfigError("ground state field in " + dir + " must be real");
  LoadedGround out;
  out.kernel = field("kernel");
  const Kernel k = make_kernel(out.kernel, U->grid(), kernel_cache);
  out.gs = make_ground_state(std::move(*U), std::stod(field("a")), k);
  return out;
}

// ---------------------------------------------------------------------------

struct GroundArgs {
  double rho = 0.0, a = 0.0;
  std::string kernel = "coulomb", out, cache;
  int n = 64;
  double L = 16.0;
  double dt = 10.0, tol = 1e-12, seed_width = 2.0;
  int max_iter = 5000;
};

int run_ground(const GroundArgs& g, Manifest& man) {
  require((g.rho > 0.0) != (g.a > 0.0), "give exactly one of --rho or --a");
  ensure_dir(g.out);
  Stopwatch sw;
  const Grid3 grid = make_grid(g.n, g.L);
  const Kernel k = make_kernel(g.kernel, grid, g.cache);
  man.timing("kernel", sw.seconds());
  SolverParams p;
  p.dt = g.dt;
  p.tol = g.tol;
  p.max_iter = g.max_iter;
  p.seed.width = g.seed_width;
  Stopwatch solve;
  GroundState gs = g.a > 0.0 ? solve_free(g.a, k, p) : solve_constrained(g.rho, k, p);
  man.timing("solve", solve.seconds());
  const VirialReport v = virial_report(gs, k);
  const Residual r = limiting_residual(to_complex(gs.U), gs.a, k);
  std::optional<DecayFit> fit;
  std::string decay_note;
  try {
    fit = decay_fit(gs);
  } catch (const NumericalError& e) {
    decay_note = e.what();
  }
  const std::string field = g.out + "/ground_state.chqf";
  write_field(field, gs.U);
  const std::string report = g.out + "/report.txt";
  std::ofstream os(report);
  os << "kernel = " << g.kernel << "\n";
  os << "n = " << g.n << "\nL = " << num(g.L) << "\n";
  os << "a = " << num(gs.a) << "\nrho = " << num(gs.rho) << "\n";
  os << "Gamma = " << num(gs.gamma) << "\nLambda = " << num(gs.lambda_cap) << "\n";
  os << "E_a = " << num(gs.energy_Ea) << "\n";
  os << "kinetic = " << num(gs.kinetic) << "\nDD = " << num(gs.dd) << "\n";
  os << "iterations = " << gs.iterations << "\n";
  os << "residual_relative = " << num(r.relative) << "\n";
  os << "virial.gradient = " << num(v.gradient) << "\nvirial.mass = " << num(v.mass) << "\n";
  os << "virial.pohozaev = " << num(v.pohozaev) << "\nvirial.dd_balance = " << num(v.dd_balance) << "\n";
  os << "virial.least_energy = " << num(v.least_energy) << "\n";
  if (fit) {
    os << "decay.C = " << num(fit->C) << "\ndecay.sigma = " << num(fit->sigma) << "\n";
    os << "decay.elasticity = " << num(fit->elasticity) << "\ndecay.envelope_ratio = " << num(fit->envelope_ratio) << "\n";
    os << "decay.accepted = " << (fit->accepted() ? 1 : 0) << "\n";
  } else {
    os << "decay.error = " << decay_note << "\n";
  }
  os.close();
  man.output(field);
  man.output(report);
  man.write(g.out + "/manifest.txt");
  std::cout << "a = " << num(gs.a) << "  rho = " << num(gs.rho) << "  Gamma = " << num(gs.gamma)
            << "  residual = " << num(r.relative) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct EvolveArgs {
  std::string init, out, monitor = "charge,energy,orbit", kernel, reference, cache;
  double T = 1.0, dt = 1e-3, scale = 1.0;
  int sample_every = 100;
};

void write_series_csv(const std::string& path, const std::vector<EvolutionSample>& s) {
  ensure_parent(path);
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write " + path);
  os << "t,charge_drift,energy_drift,orbit_distance,best_phase\n";
  for (const auto& e : s)
    os << num(e.t) << "," << num(e.charge_drift) << "," << num(e.energy_drift) << "," << num(e.orbit_distance) << ","
       << num(e.best_phase) << "\n";
}

int run_evolve(const EvolveArgs& a, Manifest& man) {
  std::set<std::string> mon;
  {
    std::stringstream ss(a.monitor);
    for (std::string m; std::getline(ss, m, ',');) {
      if (m != "charge" && m != "energy" && m != "orbit") throw ConfigError("unknown monitor '" + m + "'");
      mon.insert(m);
    }
  }
  ComplexField u0;
  std::optional<ComplexField> ref;
  std::string kernel = a.kernel;
  if (a.init.rfind("ground:", 0) == 0) {
    LoadedGround lg = load_ground(a.init.substr(7), a.cache);
    if (kernel.empty()) kernel = lg.kernel;
    ref = to_complex(lg.gs.U);
    u0 = *ref;
  } else {
    u0 = read_complex_field(a.init);
  }
  if (!a.reference.empty()) ref = read_complex_field(a.reference);
  if (kernel.empty()) kernel = "coulomb";
  u0 *= a.scale;
  std::optional<Kernel> k;
  if (kernel != "none") k = make_kernel(kernel, u0.grid(), a.cache);
  EvolveOptions opt;
  opt.sample_every = a.sample_every;
  opt.energy = mon.count("energy") > 0;
  if (mon.count("orbit")) {
    if (!ref) throw ConfigError("orbit monitor needs a ground:<dir> init or --reference");
    opt.reference = &*ref;
  }
  Stopwatch sw;
  auto series = evolve(u0, a.T, a.dt, k ? &*k : nullptr, opt);
  man.timing("evolve", sw.seconds());
  if (!mon.count("charge"))
    for (auto& s : series) s.charge_drift = std::numeric_limits<double>::quiet_NaN();
  if (!opt.energy)
    for (auto& s : series) s.energy_drift = std::numeric_limits<double>::quiet_NaN();
  write_series_csv(a.out, series);
  man.output(a.out);
  man.write(a.out + ".manifest");
  double qd = 0, ed = 0, od = 0;
  for (const auto& s : series) {
    qd = std::max(qd, s.charge_drift);
    ed = std::max(ed, s.energy_drift);
    if (std::isfinite(s.orbit_distance)) od = std::max(od, s.orbit_distance);
  }
  std::cout << "max charge drift = " << num(qd) << "  max energy drift = " << num(ed) << "  max orbit distance = " << num(od)
            << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct StabilityArgs {
  std::string ground, out, cache;
  double delta = 0.01, T = 10.0, dt = 1e-3;
  int trials = 3, sample_every = 100;
  std::uint64_t seed = 1;
};

int run_stability(const StabilityArgs& a, Manifest& man) {
  ensure_dir(a.out);
  LoadedGround lg = load_ground(a.ground, a.cache);
  const Kernel k = make_kernel(lg.kernel, lg.gs.U.grid(), a.cache);
  Stopwatch sw;
  StabilityResult r = stability_experiment(lg.gs, a.delta, a.T, a.dt, k, a.trials, a.seed, a.sample_every);
  man.timing("trials", sw.seconds());
  const std::string summary = a.out + "/summary.csv";
  std::ofstream os(summary);
  os << "seed,delta,sup_distance\n";
  for (const auto& t : r.trials) {
    os << t.seed << "," << num(a.delta) << "," << num(t.sup_distance) << "\n";
    const std::string path = a.out + "/trial_" + std::to_string(t.seed) + ".csv";
    write_series_csv(path, t.series);
    man.output(path);
  }
  os.close();
  man.output(summary);
  man.write(a.out + "/manifest.txt");
  std::cout << "max orbit distance = " << num(r.max_distance) << " (delta = " << num(a.delta) << ")\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct MultibumpArgs {
  std::string config, eps = "0.5,0.25", out;
};

int run_multibump(const MultibumpArgs& a, Manifest& man) {
  man.echo_file(a.config);
  MultibumpConfig mc = load_multibump(read_config(a.config));
  std::vector<double> eps = cfg::numbers(a.eps, "--eps");
  require(!eps.empty(), "--eps needs at least one value");
  ensure_dir(a.out);
  const Grid3 g = make_grid(mc.n, mc.L);
  const Kernel k = build_kernel(mc.kernel, g);
  // One limiting profile per distinct well minimum.
  std::map<double, GroundState> profiles;
  Stopwatch sw;
  for (std::size_t i = 0; i < mc.potential.wells.size(); ++i) {
    const double mi = mc.potential.well_minimum(i);
    if (!profiles.count(mi)) profiles.emplace(mi, solve_free(mi, k, mc.solver));
  }
  man.timing("profiles", sw.seconds());
  const std::string table = a.out + "/multibump.csv", maxima = a.out + "/maxima.csv";
  std::ofstream ot(table), om(maxima);
  ot << "eps,Gamma,F,Q,residual,maxima,remainder,envelope_C1,envelope_C2,envelope_pass,"
        "relaxed_Gamma,relaxed_Q,relaxed_residual,relaxed_maxima,relaxed_max_dist,relaxed_remainder\n";
  om << "eps,state,y0,y1,y2,value,well,dist_to_minimizer\n";
  for (double e : eps) {
    PotentialSpec p = mc.potential;
    p.epsilon = e;
    validate(p);
    BumpSet bumps;
    for (std::size_t i = 0; i < p.wells.size(); ++i) {
      Bump b;
      b.well = static_cast<int>(i);
      b.center = p.wells[i].center;
      b.profile = profiles.at(p.well_minimum(i));
      b.phase = mc.phases[i];
      bumps.push_back(std::move(b));
    }
    const ScaledPotential sp(p, g);
    Stopwatch se;
    const ComplexField u = build_ansatz(bumps, p, g);
    const GammaReport G = gamma_eps(u, sp, k);
    const Residual res = magnetic_residual(u, sp, k);
    const auto lm = local_maxima(u, p);
    const RemainderReport rem = decomposition_remainder(u, bumps, sp);
    std::vector<Vec3> centers;
    for (const auto& m : lm) centers.push_back(m.y);
    EnvelopeCheck env;
    bool env_ok = true;
    try {
      env = decay_envelope_check(u, centers);
    } catch (const NumericalError&) {
      env_ok = false;
    }
    const RelaxResult rr = relax(u, bumps, sp, k, mc.relax);
    const GammaReport G2 = gamma_eps(rr.u, sp, k);
    const Residual res2 = magnetic_residual(rr.u, sp, k);
    const auto lm2 = local_maxima(rr.u, p);
    double dist = 0.0;
    for (const auto& m : lm2) dist = std::max(dist, m.well >= 0 ? m.dist_to_minimizer : std::numeric_limits<double>::infinity());
    double rem2 = std::numeric_limits<double>::quiet_NaN();
    try {
      rem2 = decomposition_remainder(rr.u, bumps_at_maxima(lm2, bumps, p), sp).norm;
    } catch (const std::exception&) {
    }
    man.timing("eps_" + num(e), se.seconds());
    const double nan = std::numeric_limits<double>::quiet_NaN();
    ot << num(e) << "," << num(G.Gamma) << "," << num(G.F) << "," << num(G.Q) << "," << num(res.relative) << "," << lm.size()
       << "," << num(rem.norm) << "," << num(env_ok ? env.C1 : nan) << "," << num(env_ok ? env.C2 : nan) << ","
       << (env_ok ? (env.pass ? "1" : "0") : "error") << "," << num(G2.Gamma) << "," << num(G2.Q) << ","
       << num(res2.relative) << "," << lm2.size() << "," << num(dist) << "," << num(rem2) << "\n";
    for (const auto& [state, list] : {std::pair{"ansatz", &lm}, std::pair{"relaxed", &lm2}})
      for (const auto& m : *list)
        om << num(e) << "," << state << "," << num(m.y[0]) << "," << num(m.y[1]) << "," << num(m.y[2]) << "," << num(m.value)
           << "," << m.well << "," << num(m.dist_to_minimizer) << "\n";
    std::cout << "eps = " << num(e) << "  Gamma = " << num(G.Gamma) << "  Q = " << num(G.Q) << "  maxima = " << lm.size()
              << "  relaxed remainder = " << num(rem2) << "\n";
  }
  ot.close();
  om.close();
  man.output(table);
  man.output(maxima);
  man.write(a.out + "/manifest.txt");
  return 0;
}

// ---------------------------------------------------------------------------

struct OdeArgs {
  std::string config, out;
  double T = 10.0, dt = 1e-3;
  int stride = 1;
};

int run_ode(const OdeArgs& a, Manifest& man) {
  man.echo_file(a.config);
  const OdeConfig oc = load_ode(read_config(a.config));
  IntegrateOptions opt;
  opt.stride = a.stride;
  Stopwatch sw;
  const Trajectory tr = integrate(oc.state, oc.field, a.T, a.dt, opt);
  man.timing("integrate", sw.seconds());
  ensure_parent(a.out);
  std::ofstream os(a.out);
  if (!os) throw ConfigError("cannot write " + a.out);
  const std::size_t k = oc.state.size();
  os << "t";
  for (std::size_t j = 0; j < k; ++j) os << ",x" << j << "_0,x" << j << "_1,x" << j << "_2";
  for (std::size_t j = 0; j < k; ++j) os << ",xi" << j << "_0,xi" << j << "_1,xi" << j << "_2";
  os << ",H,min_pair_distance\n";
  for (const auto& s : tr.samples) {
    os << num(s.state.t);
    for (const auto& x : s.state.x) os << "," << num(x[0]) << "," << num(x[1]) << "," << num(x[2]);
    for (const auto& v : s.state.xi) os << "," << num(v[0]) << "," << num(v[1]) << "," << num(v[2]);
    os << "," << num(s.H) << "," << num(s.min_pair) << "\n";
  }
  os.close();
  man.output(a.out);
  man.write(a.out + ".manifest");
  std::cout << "max energy drift = " << num(tr.max_energy_drift) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct VerifyArgs {
  std::string suite = "identities", kernel = "coulomb";
  int n = 32;
  double L = 8.0, a = 4.0;
};

struct Check {
  std::string name;
  double value;
  double tol;
  bool pass() const { return std::isfinite(value) && std::abs(value) <= tol; }
};

int print_checks(const std::vector<Check>& checks) {
  bool all = true;
  std::printf("%-40s %-24s %-10s %s\n", "check", "value", "tol", "result");
  for (const auto& c : checks) {
    std::printf("%-40s %-24s %-10.1e %s\n", c.name.c_str(), num(c.value).c_str(), c.tol, c.pass() ? "PASS" : "FAIL");
    all = all && c.pass();
  }
  return all ? 0 : 3;
}

int run_verify(const VerifyArgs& v) {
  std::vector<Check> checks;
  if (v.suite == "identities") {
    const Grid3 g = make_grid(v.n, v.L);
    const Kernel k = build_kernel(parse_kernel_spec(v.kernel), g);
    SolverParams p;
    p.dt = 10.0;
    const GroundState gs = solve_free(v.a, k, p);
    const VirialReport vr = virial_report(gs, k);
    checks.push_back({"pohozaev residual / DD", vr.pohozaev, 1e-3});
    checks.push_back({"|grad U|^2 / Gamma - 1", vr.gradient, 1e-2});
    checks.push_back({"a|U|^2 / (3 Gamma) - 1", vr.mass, 1e-2});
    checks.push_back({"DD / (|grad U|^2 + a|U|^2) - 1", vr.dd_balance, 1e-2});
    checks.push_back({"Lambda / (-Gamma/2) - 1", gs.lambda_cap / (-0.5 * gs.gamma) - 1.0, 2e-2});
    const double rho3 = 3.0 * gs.gamma / gs.a;
    checks.push_back({"Psi(Gamma) / Lambda - 1 (rho = 3G/a)", psi_map(gs.gamma, gs.a, rho3) / gs.lambda_cap - 1.0, 2e-2});
    checks.push_back({"Psi^-1(Psi(2.7)) / 2.7 - 1", psi_inverse(psi_map(2.7, gs.a, gs.rho), gs.a, gs.rho) / 2.7 - 1.0, 1e-12});
    // Ground states attain the sharp constant of DD <= C |grad u| |u|^3, so
    // a perturbation can only lower the quotient.
    const ComplexField U = to_complex(gs.U);
    auto quotient = [&](const ComplexField& w) { return dd(w, k) / (std::pow(l2_sq(w), 1.5) * std::sqrt(kinetic(w))); };
    const double q0 = quotient(U);
    const ComplexField w = U + band_limited_perturbation(g, 0.05 * std::sqrt(h1_sq(U)), 7);
    checks.push_back({"sharp-HLS quotient gain of a kick", std::max(0.0, quotient(w) / q0 - 1.0), 1e-6});
    checks.push_back({"hls_ratio finite and positive", hls_ratio(U, k) > 0.0 ? 0.0 : 1.0, 0.0});
  } else if (v.suite == "ode") {
    ForceField f;
    f.eps = 0.0;
    set_uniform_field(f, {0.0, 0.0, 2.0});
    NewtonState s;
    s.x = {Vec3{0.5, 0.0, 0.0}};
    s.xi = {Vec3{0.0, 1.0, 0.0}};
    s.m = {1.0};
    const auto times = upward_crossings(s, f, 10.0, 1e-3, 0, 1);
    const double period = times.size() >= 2 ? times[1] - times[0] : std::numeric_limits<double>::quiet_NaN();
    checks.push_back({"Larmor period / (2 pi / b) - 1", period / pi - 1.0, 1e-6});
    checks.push_back({"magnetic power", magnetic_power(s, f), 0.0});
  } else {
    throw ConfigError("unknown suite '" + v.suite + "' (identities, ode)");
  }
  return print_checks(checks);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Choquard equation toolkit: ground states, dynamics, semiclassical bumps"};
  app.require_subcommand(1);
  app.set_version_flag("--version", CHOQUARD_VERSION);

  GroundArgs ga;
  auto* ground = app.add_subcommand("ground", "Compute a ground state");
  auto* rho_opt = ground->add_option("--rho", ga.rho, "Prescribed mass");
  ground->add_option("--a", ga.a, "Prescribed multiplier")->excludes(rho_opt);
  ground->add_option("--kernel", ga.kernel, "coulomb | inverse_distance | axis_quadratic:<i> | anisotropic:<i>:<c> | table:<file>");
  ground->add_option("--n", ga.n, "Grid points per axis");
  ground->add_option("--L", ga.L, "Half-width of the cube");
  ground->add_option("--dt", ga.dt, "Gradient-flow step");
  ground->add_option("--tol", ga.tol, "Relative energy-decrease tolerance");
  ground->add_option("--max-iter", ga.max_iter, "Iteration cap");
  ground->add_option("--seed-width", ga.seed_width, "Width of the Gaussian seed");
  ground->add_option("--kernel-cache", ga.cache, "Kernel cache file (read if present, else written)");
  ground->add_option("--out", ga.out, "Output directory")->required();

  EvolveArgs ea;
  auto* evolve_cmd = app.add_subcommand("evolve", "Integrate the time-dependent equation");
  evolve_cmd->add_option("--init", ea.init, "Field file or ground:<dir>")->required();
  evolve_cmd->add_option("--T", ea.T, "Final time");
  evolve_cmd->add_option("--dt", ea.dt, "Time step");
  evolve_cmd->add_option("--monitor", ea.monitor, "Comma list of charge, energy, orbit");
  evolve_cmd->add_option("--kernel", ea.kernel, "Kernel (default: the ground state's, or coulomb); none = free equation");
  evolve_cmd->add_option("--reference", ea.reference, "Reference profile for the orbit monitor");
  evolve_cmd->add_option("--scale", ea.scale, "Multiply the initial field by this factor");
  evolve_cmd->add_option("--sample-every", ea.sample_every, "Steps between samples");
  evolve_cmd->add_option("--kernel-cache", ea.cache, "Kernel cache file");
  evolve_cmd->add_option("--out", ea.out, "CSV output")->required();

  StabilityArgs sa;
  auto* stab = app.add_subcommand("stability", "Orbital stability experiment around a ground state");
  stab->add_option("--ground", sa.ground, "Ground-state directory")->required();
  stab->add_option("--delta", sa.delta, "H1 size of the perturbation");
  stab->add_option("--T", sa.T, "Final time");
  stab->add_option("--dt", sa.dt, "Time step");
  stab->add_option("--trials", sa.trials, "Number of seeded trials");
  stab->add_option("--seed", sa.seed, "First seed");
  stab->add_option("--sample-every", sa.sample_every, "Steps between samples");
  stab->add_option("--kernel-cache", sa.cache, "Kernel cache file");
  stab->add_option("--out", sa.out, "Output directory")->required();

  MultibumpArgs ma;
  auto* mb = app.add_subcommand("multibump", "Penalized multi-bump diagnostics over an eps sweep");
  mb->add_option("--config", ma.config, "INI file")->required()->check(CLI::ExistingFile);
  mb->add_option("--eps", ma.eps, "Comma list of eps values");
  mb->add_option("--out", ma.out, "Output directory")->required();

  OdeArgs oa;
  auto* ode = app.add_subcommand("ode", "Integrate the interacting-particle system");
  ode->add_option("--config", oa.config, "INI file")->required()->check(CLI::ExistingFile);
  ode->add_option("--T", oa.T, "Final time");
  ode->add_option("--dt", oa.dt, "Time step");
  ode->add_option("--stride", oa.stride, "Steps between samples");
  ode->add_option("--out", oa.out, "CSV output")->required();

  VerifyArgs va;
  auto* verify = app.add_subcommand("verify", "Run a verification suite and print a pass table");
  verify->add_option("--suite", va.suite, "identities | ode");
  verify->add_option("--kernel", va.kernel, "Kernel for the identities suite");
  verify->add_option("--n", va.n, "Grid points per axis");
  verify->add_option("--L", va.L, "Half-width of the cube");
  verify->add_option("--a", va.a, "Multiplier");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  Manifest man(argc, argv);
  try {
    if (*ground) return run_ground(ga, man);
    if (*evolve_cmd) return run_evolve(ea, man);
    if (*stab) return run_stability(sa, man);
    if (*mb) return run_multibump(ma, man);
    if (*ode) return run_ode(oa, man);
    if (*verify) return run_verify(va);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
