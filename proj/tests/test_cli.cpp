#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "choquard/config.hpp"
#include "choquard/io.hpp"

using namespace choquard;
namespace fs = std::filesystem;

namespace {

fs::path scratch() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / ("choquard_test_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

int run(const std::string& args) {
  const std::string cmd = std::string(CHOQUARD_CLI) + " " + args + " >/dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string two_wells_text() { return slurp(fs::path(CHOQUARD_CONFIGS) / "two_wells.ini"); }

}  // namespace

TEST(FieldFile, RoundTripsRealAndComplex) {
  const Grid3 g = make_grid(12, 2.5);
  const ComplexField c = sample<cplx>(g, [](const Vec3& x) { return cplx{x[0], x[1] * x[2]}; });
  const RealField r = sample(g, [](const Vec3& x) { return std::sin(x[0]) + x[2]; });
  const std::string pc = (scratch() / "c.chqf").string(), pr = (scratch() / "r.chqf").string();
  write_field(pc, c);
  write_field(pr, r);
  const AnyField rc = read_field(pc), rr = read_field(pr);
  ASSERT_TRUE(std::holds_alternative<ComplexField>(rc));
  ASSERT_TRUE(std::holds_alternative<RealField>(rr));
  const auto& c2 = std::get<ComplexField>(rc);
  EXPECT_TRUE(c2.grid() == g);
  for (std::size_t i = 0; i < c.size(); ++i) ASSERT_EQ(c2[i], c[i]);
  const ComplexField promoted = read_complex_field(pr);
  for (std::size_t i = 0; i < r.size(); ++i) ASSERT_EQ(promoted[i], cplx(r[i]));
}

TEST(FieldFile, RejectsForeignAndTruncatedFiles) {
  const std::string bad = (scratch() / "bad.chqf").string();
  std::ofstream(bad) << "nope";
  EXPECT_THROW(read_field(bad), ConfigError);
  const std::string p = (scratch() / "t.chqf").string();
  write_field(p, RealField(make_grid(8, 1.0)));
  fs::resize_file(p, fs::file_size(p) - 8);
  EXPECT_THROW(read_field(p), ConfigError);
  EXPECT_THROW(read_field((scratch() / "missing.chqf").string()), ConfigError);
}

TEST(KernelFile, CacheReproducesConvolution) {
  const Grid3 g = make_grid(16, 4.0);
  const Kernel k = build_kernel(anisotropic_table(1, 0.3), g);
  const std::string p = (scratch() / "k.chqk").string();
  write_kernel(p, k);
  const Kernel k2 = read_kernel(p);
  EXPECT_EQ(k2.name(), k.name());
  EXPECT_EQ(k2.kind(), KernelKind::tabulated);
  EXPECT_EQ(k2.bracket(), k.bracket());
  EXPECT_FALSE(k2.has_pointwise());
  EXPECT_THROW(k2.value({1, 0, 0}), ConfigError);
  const RealField rho = sample(g, [](const Vec3& x) { return std::exp(-dot(x, x)); });
  const RealField a = free_space_convolve(rho, k), b = free_space_convolve(rho, k2);
  for (std::size_t i = 0; i < a.size(); ++i) ASSERT_EQ(a[i], b[i]);
}

TEST(AngularTable, ConstantTableIsInverseDistance) {
  std::istringstream in("# isotropic\n3 4\n1 1 1 1\n1 1 1 1\n1 1 1 1\n");
  const AngularTable t = parse_angular_table(in, "inline");
  EXPECT_NEAR(t({0, 0, 2}), 0.5, 1e-15);
  EXPECT_NEAR(t({-0.3, 1.1, -0.4}), 1.0 / norm(Vec3{-0.3, 1.1, -0.4}), 1e-15);
}

TEST(AngularTable, InterpolatesBetweenNodes) {
  // w = 1 at the south pole row, 3 at the north pole row: w(μ = 0) = 2.
  std::istringstream in("2 1\n1\n3\n");
  const AngularTable t = parse_angular_table(in, "inline");
  EXPECT_NEAR(t({1, 0, 0}), 2.0, 1e-15);
  EXPECT_NEAR(t({0, 0, 1}), 3.0, 1e-15);
}

TEST(AngularTable, RejectsMalformedInput) {
  for (const char* txt : {"", "2", "1 1\n1", "2 2\n1 1 1", "2 1\n1 -1", "2 1\n1 x", "2.5 1\n1 1 1"}) {
    std::istringstream in(txt);
    EXPECT_THROW(parse_angular_table(in, "inline"), ConfigError) << txt;
  }
}

TEST(Config, KernelSpecs) {
  EXPECT_TRUE(std::holds_alternative<CoulombSpec>(parse_kernel_spec("coulomb")));
  EXPECT_EQ(std::get<TabulatedSpec>(parse_kernel_spec("axis_quadratic:2")).name, "axis_quadratic");
  EXPECT_EQ(std::get<TabulatedSpec>(parse_kernel_spec("anisotropic:0:0.5")).bracket->second, 1.5);
  EXPECT_THROW(parse_kernel_spec("yukawa"), ConfigError);
  EXPECT_THROW(parse_kernel_spec("axis_quadratic:3"), ConfigError);
  EXPECT_THROW(parse_kernel_spec("table:/nonexistent"), ConfigError);
}

TEST(Config, LoadsShippedMultibumpConfig) {
  const MultibumpConfig m = load_multibump(parse_config(two_wells_text()));
  ASSERT_EQ(m.potential.wells.size(), 2u);
  EXPECT_EQ(m.phases, (std::vector<double>{0.3, 1.3}));
  EXPECT_EQ(m.n, 64);
  EXPECT_DOUBLE_EQ(m.potential.A.curl()[2], 0.1);
  EXPECT_NEAR(m.potential.delta(), 0.23, 1e-9);
}

TEST(Config, MultibumpConsistencyChecks) {
  const std::string t = two_wells_text();
  const auto replace = [](std::string s, const std::string& a, const std::string& b) {
    s.replace(s.find(a), a.size(), b);
    return s;
  };
  EXPECT_THROW(load_multibump(parse_config(replace(t, "delta = 0.23", "delta = 0.5"))), ConfigError);
  EXPECT_THROW(load_multibump(parse_config(replace(t, "B = 0 0 0.1", "B = 0 0 0.1\nM = 0 0 0 0 0 0 0 0 0"))), ConfigError);
  EXPECT_THROW(load_multibump(parse_config(replace(t, "shape = gaussian", "shape = quartic"))), ConfigError);
  EXPECT_THROW(load_multibump(parse_config(replace(t, "beta = 0.22", "beta = 0.4"))), ConfigError);
  EXPECT_THROW(load_multibump(parse_config(replace(t, "radius = 2.3", "radius = two"))), ConfigError);
  EXPECT_THROW(parse_config("[a\nb"), ConfigError);
}

TEST(Config, LoadsOdeConfigs) {
  const OdeConfig l = load_ode(read_config((fs::path(CHOQUARD_CONFIGS) / "larmor.ini").string()));
  EXPECT_EQ(l.state.size(), 1u);
  EXPECT_EQ(l.field.B({0, 0, 0})[2], 2.0);
  const OdeConfig tb = load_ode(read_config((fs::path(CHOQUARD_CONFIGS) / "two_body.ini").string()));
  EXPECT_EQ(tb.state.size(), 2u);
  EXPECT_DOUBLE_EQ(tb.field.V({1, 0, 0}), 0.1);
  EXPECT_THROW(load_ode(parse_config("[ode]\ninteraction = yukawa\n[particle0]\nx = 0 0 0\n")), ConfigError);
  EXPECT_THROW(load_ode(parse_config("[ode]\neps = 1\n")), ConfigError);
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run("--help"), 0);
  EXPECT_EQ(run("verify --suite ode"), 0);
  EXPECT_EQ(run("ground --bogus"), 2);
  EXPECT_EQ(run("ground --a 1 --n 10 --out " + (scratch() / "g").string()), 2);
  EXPECT_EQ(run("multibump --config /nonexistent.ini --out " + scratch().string()), 2);
  EXPECT_EQ(run("evolve --init /nonexistent.chqf --out " + (scratch() / "e.csv").string()), 2);
  EXPECT_EQ(run("verify --suite nothing"), 2);
}

TEST(Cli, GroundThenEvolveIsReproducible) {
  const std::string g = (scratch() / "ground").string();
  ASSERT_EQ(run("ground --a 4 --n 16 --L 6 --out " + g), 0);
  EXPECT_TRUE(fs::exists(g + "/ground_state.chqf"));
  EXPECT_NE(slurp(g + "/report.txt").find("a = 4"), std::string::npos);
  const std::string e1 = (scratch() / "e1.csv").string(), e2 = (scratch() / "e2.csv").string();
  ASSERT_EQ(run("evolve --init ground:" + g + " --T 0.1 --dt 0.01 --out " + e1), 0);
  ASSERT_EQ(run("evolve --init ground:" + g + " --T 0.1 --dt 0.01 --out " + e2), 0);
  EXPECT_EQ(slurp(e1), slurp(e2));
  EXPECT_NE(slurp(e1 + ".manifest").find("sha256."), std::string::npos);
}
