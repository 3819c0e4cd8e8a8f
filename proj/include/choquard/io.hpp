#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "choquard/kernel.hpp"

namespace choquard {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace detail {

template <class T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is, const std::string& path) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw ConfigError("truncated file: " + path);
  return v;
}

inline void expect_magic(std::istream& is, const char* magic, const std::string& path) {
  char m[4];
  is.read(m, 4);
  if (!is || std::memcmp(m, magic, 4) != 0) throw ConfigError("not a " + std::string(magic, 4) + " file: " + path);
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write " + path);
  return os;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot read " + path);
  return is;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Field files: "CHQF", u32 version, u32 n, f64 L, u8 complex flag, values.

inline constexpr std::uint32_t field_format_version = 1;

using AnyField = std::variant<RealField, ComplexField>;

template <class T>
void write_field(const std::string& path, const Field<T>& u) {
  constexpr bool is_complex = std::is_same_v<T, cplx>;
  auto os = detail::open_out(path);
  os.write("CHQF", 4);
  detail::put(os, field_format_version);
  detail::put(os, static_cast<std::uint32_t>(u.grid().n()));
  detail::put(os, u.grid().half_width());
  detail::put(os, static_cast<std::uint8_t>(is_complex ? 1 : 0));
  os.write(reinterpret_cast<const char*>(u.data()), static_cast<std::streamsize>(u.size() * sizeof(T)));
  if (!os) throw ConfigError("failed writing " + path);
}

inline AnyField read_field(const std::string& path) {
  auto is = detail::open_in(path);
  detail::expect_magic(is, "CHQF", path);
  const auto version = detail::get<std::uint32_t>(is, path);
  if (version != field_format_version) throw ConfigError("unsupported field file version in " + path);
  const auto n = detail::get<std::uint32_t>(is, path);
  const auto L = detail::get<double>(is, path);
  const auto flag = detail::get<std::uint8_t>(is, path);
  if (flag > 1) throw ConfigError("bad real/complex flag in " + path);
  const Grid3 g = make_grid(static_cast<int>(n), L);
  auto fill = [&](auto& f) {
    using T = std::remove_reference_t<decltype(f[0])>;
    is.read(reinterpret_cast<char*>(f.data()), static_cast<std::streamsize>(f.size() * sizeof(T)));
    if (!is) throw ConfigError("truncated field data in " + path);
  };
  if (flag == 0) {
    RealField f(g);
    fill(f);
    return f;
  }
  ComplexField f(g);
  fill(f);
  return f;
}

/// Reads a field file as complex, promoting real data.
inline ComplexField read_complex_field(const std::string& path) {
  AnyField f = read_field(path);
  if (auto* r = std::get_if<RealField>(&f)) return to_complex(*r);
  return std::get<ComplexField>(std::move(f));
}

// ---------------------------------------------------------------------------
// Kernel cache: "CHQK", u32 version, u32 n, f64 L, u8 kind, f64 R, f64 C1,
// f64 C2, u32 name length, name, multiplier.

inline constexpr std::uint32_t kernel_format_version = 1;

inline void write_kernel(const std::string& path, const Kernel& k) {
  auto os = detail::open_out(path);
  os.write("CHQK", 4);
  detail::put(os, kernel_format_version);
  detail::put(os, static_cast<std::uint32_t>(k.grid().n()));
  detail::put(os, k.grid().half_width());
  detail::put(os, static_cast<std::uint8_t>(k.kind()));
  detail::put(os, k.truncation_radius());
  detail::put(os, k.bracket().first);
  detail::put(os, k.bracket().second);
  detail::put(os, static_cast<std::uint32_t>(k.name().size()));
  os.write(k.name().data(), static_cast<std::streamsize>(k.name().size()));
  const auto& m = k.multiplier();
  os.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
  if (!os) throw ConfigError("failed writing " + path);
}

/// Loads a cached multiplier. Tabulated kernels come back without their
/// sample function, which only the build step needs.
inline Kernel read_kernel(const std::string& path) {
  auto is = detail::open_in(path);
  detail::expect_magic(is, "CHQK", path);
  if (detail::get<std::uint32_t>(is, path) != kernel_format_version)
    throw ConfigError("unsupported kernel file version in " + path);
  const auto n = detail::get<std::uint32_t>(is, path);
  const auto L = detail::get<double>(is, path);
  const auto kind = detail::get<std::uint8_t>(is, path);
  if (kind > 1) throw ConfigError("bad kernel kind in " + path);
  const auto R = detail::get<double>(is, path);
  const auto c1 = detail::get<double>(is, path);
  const auto c2 = detail::get<double>(is, path);
  const auto len = detail::get<std::uint32_t>(is, path);
  if (len > 4096) throw ConfigError("bad kernel name length in " + path);
  std::string name(len, '\0');
  is.read(name.data(), len);
  const Grid3 g = make_grid(static_cast<int>(n), L);
  const auto m = static_cast<std::size_t>(2 * n);
  AlignedVector<double> mult(m * m * (m / 2 + 1));
  is.read(reinterpret_cast<char*>(mult.data()), static_cast<std::streamsize>(mult.size() * sizeof(double)));
  if (!is) throw ConfigError("truncated kernel data in " + path);
  return kernel_from_multiplier(g, static_cast<KernelKind>(kind), R, std::move(name), std::move(mult), {c1, c2});
}

// ---------------------------------------------------------------------------
// Angular kernel tables. A degree −1 kernel is W(x) = w(x/|x|)/|x|; the
// table holds w on nodes μ_i = −1 + 2i/(nμ − 1) (μ = cos θ) by
// φ_j = 2πj/nφ, interpolated bilinearly (periodic in φ).
//
// Text format: '#' starts a comment; first the two counts nμ nφ, then nμ·nφ
// values with φ fastest.

struct AngularTable {
  int n_mu = 0;
  int n_phi = 0;
  std::vector<double> w;

  double operator()(const Vec3& x) const {
    const double r = norm(x);
    const double mu = std::clamp(x[2] / r, -1.0, 1.0);
    double phi = std::atan2(x[1], x[0]);
    if (phi < 0.0) phi += 2.0 * pi;
    const double fm = (mu + 1.0) * 0.5 * (n_mu - 1);
    const int i0 = std::min(static_cast<int>(fm), n_mu - 2);
    const double tm = fm - i0;
    const double fp = phi / (2.0 * pi) * n_phi;
    const int j0 = static_cast<int>(fp) % n_phi;
    const int j1 = (j0 + 1) % n_phi;
    const double tp = fp - std::floor(fp);
    auto at = [&](int i, int j) { return w[static_cast<std::size_t>(i * n_phi + j)]; };
    const double lo = (1.0 - tp) * at(i0, j0) + tp * at(i0, j1);
    const double hi = (1.0 - tp) * at(i0 + 1, j0) + tp * at(i0 + 1, j1);
    return ((1.0 - tm) * lo + tm * hi) / r;
  }
};

inline AngularTable parse_angular_table(std::istream& in, const std::string& source) {
  std::vector<double> nums;
  std::string line;
  while (std::getline(in, line)) {
    if (auto c = line.find('#'); c != std::string::npos) line.erase(c);
    std::istringstream ls(line);
    std::string tok;
    while (ls >> tok) {
      try {
        std::size_t used = 0;
        nums.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw ConfigError("bad number '" + tok + "' in kernel table " + source);
      }
    }
  }
  if (nums.size() < 2) throw ConfigError("kernel table " + source + " is missing its counts");
  AngularTable t;
  t.n_mu = static_cast<int>(nums[0]);
  t.n_phi = static_cast<int>(nums[1]);
  if (t.n_mu < 2 || t.n_phi < 1 || nums[0] != t.n_mu || nums[1] != t.n_phi)
    throw ConfigError("kernel table " + source + " needs integer counts n_mu >= 2, n_phi >= 1");
  const auto want = static_cast<std::size_t>(t.n_mu) * static_cast<std::size_t>(t.n_phi);
  if (nums.size() - 2 != want)
    throw ConfigError("kernel table " + source + " has " + std::to_string(nums.size() - 2) + " values, expected " +
                      std::to_string(want));
  t.w.assign(nums.begin() + 2, nums.end());
  for (double v : t.w)
    if (!std::isfinite(v) || v < 0.0) throw ConfigError("kernel table " + source + " has a negative or non-finite value");
  return t;
}

inline TabulatedSpec read_kernel_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path);
  AngularTable t = parse_angular_table(in, path);
  TabulatedSpec spec;
  spec.name = "table:" + path;
  spec.W = [t = std::move(t)](const Vec3& x) { return t(x); };
  return spec;
}

}  // namespace choquard
