#pragma once

#include "confspec/grid.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace confspec {

/// Reference metric before conformal rescaling.
///
/// A circle of length L is parametrized by the angle theta in [0, 2*pi) with
/// g_flat = (L / 2pi)^2 dtheta^2. A torus uses angles (x, y) in [0, 2*pi)^2 with
/// g_flat = dx^2 + c^2 dy^2.
struct FlatBackground {
  enum class Kind { circle, torus };

  Kind kind = Kind::circle;
  double length = two_pi;
  double modulus = 1.0;

  static FlatBackground circle(double length) {
    if (!(length > 0.0) || !std::isfinite(length)) throw std::invalid_argument("circle length must be positive");
    return {Kind::circle, length, 1.0};
  }
  static FlatBackground torus(double modulus) {
    if (!(modulus > 0.0) || !std::isfinite(modulus)) throw std::invalid_argument("torus modulus must be positive");
    return {Kind::torus, two_pi, modulus};
  }

  int dim() const { return kind == Kind::circle ? 1 : 2; }

  /// 2*pi / L, the scale between the angle covector and unit length on S^1.
  double circle_scale() const { return two_pi / length; }

  /// Flat dual-metric pairing of two covectors (angle components).
  double flat_pairing(std::array<double, 2> xi, std::array<double, 2> eta) const {
    if (kind == Kind::circle) return circle_scale() * circle_scale() * xi[0] * eta[0];
    return xi[0] * eta[0] + xi[1] * eta[1] / (modulus * modulus);
  }
  double flat_norm(std::array<double, 2> xi) const { return std::sqrt(flat_pairing(xi, xi)); }

  bool operator==(const FlatBackground&) const = default;
};

/// Band-limited samples of the conformal exponent v.
struct ConformalFactor {
  RealVector samples;
  int band_limit = 0;
};

/// A covector at a grid site, components in angle coordinates.
struct Covector {
  std::size_t site = 0;
  std::array<double, 2> xi{0.0, 0.0};

  bool is_zero() const { return xi[0] == 0.0 && xi[1] == 0.0; }
};

/// g = e^{2v} g_flat on a grid.
class Metric {
 public:
  Metric(Grid grid, FlatBackground background, ConformalFactor factor)
      : grid_(grid), background_(background), factor_(std::move(factor)) {
    if (grid_.dim != background_.dim()) throw std::invalid_argument("metric: grid dimension does not match background");
    if (std::size_t(factor_.samples.size()) != grid_.sites())
      throw std::invalid_argument("metric: conformal factor sample count does not match grid");
    if (!factor_.samples.allFinite()) throw std::invalid_argument("metric: conformal factor samples must be finite");
    if (factor_.band_limit < 0 || factor_.band_limit > grid_.n / 2)
      throw std::invalid_argument("metric: band_limit must lie in [0, N/2]");
    coefficients_ = FourierTransform(grid_).coefficients(factor_.samples);
  }

  const Grid& grid() const { return grid_; }
  const FlatBackground& background() const { return background_; }
  const ConformalFactor& factor() const { return factor_; }
  int dimension() const { return grid_.dim; }
  int band_limit() const { return factor_.band_limit; }

  double v(std::size_t site) const { return factor_.samples(Eigen::Index(site)); }
  const RealVector& v_samples() const { return factor_.samples; }
  const ComplexVector& v_coefficients() const { return coefficients_; }

  /// Band-limited interpolant of v at an arbitrary point (angles).
  double v_at(std::array<double, 2> x) const { return evaluate_series(grid_, coefficients_, x).real(); }

  /// Samples of e^{s v} for a real exponent s.
  RealVector exp_v(double s) const { return (s * factor_.samples.array()).exp().matrix(); }

  bool is_flat() const { return factor_.samples.cwiseAbs().maxCoeff() == 0.0; }

 private:
  Grid grid_;
  FlatBackground background_;
  ConformalFactor factor_;
  ComplexVector coefficients_;
};

/// Zeroes every Fourier mode with max |k_i| > band and returns the real
/// resynthesized samples.
inline RealVector band_limit_samples(const Grid& grid, const RealVector& samples, int band) {
  FourierTransform ft(grid);
  ComplexVector c = ft.coefficients(samples);
  for (std::size_t m = 0; m < grid.sites(); ++m) {
    auto k = grid.wavevector(m);
    if (std::max(std::abs(k[0]), std::abs(k[1])) > band) c(Eigen::Index(m)) = 0.0;
  }
  return ft.samples(c).real();
}

namespace detail {
inline void check_factor_samples(const RealVector& v, int n, int band) {
  if (!v.allFinite()) throw std::invalid_argument("conformal factor samples must be finite");
  if (band < 0 || band > n / 2) throw std::invalid_argument("band_limit must lie in [0, N/2]");
}
}  // namespace detail

/// Circle of length L with conformal exponent samples v (N = v.size()).
inline Metric make_circle_metric(double length, const RealVector& v, int band_limit) {
  const int n = int(v.size());
  if (n <= 0 || n % 2 != 0) throw std::invalid_argument("circle metric: N must be a positive even integer");
  auto background = FlatBackground::circle(length);
  detail::check_factor_samples(v, n, band_limit);
  Grid grid(1, n);
  return Metric(grid, background, {band_limit_samples(grid, v, band_limit), band_limit});
}

/// Torus e^{2v}(dx^2 + c^2 dy^2) with v given on an N x N grid (row-major, x major).
inline Metric make_torus_metric(double modulus, const RealVector& v, int band_limit) {
  auto background = FlatBackground::torus(modulus);
  const int n = int(std::lround(std::sqrt(double(v.size()))));
  if (n <= 0 || std::size_t(n) * std::size_t(n) != std::size_t(v.size()) || n % 2 != 0)
    throw std::invalid_argument("torus metric: sample count must be N^2 with N even");
  detail::check_factor_samples(v, n, band_limit);
  Grid grid(2, n);
  return Metric(grid, background, {band_limit_samples(grid, v, band_limit), band_limit});
}

/// Samples a function of the angle coordinates on a grid.
template <class F>
RealVector sample_on(const Grid& grid, F&& f) {
  RealVector out(static_cast<Eigen::Index>(grid.sites()));
  for (std::size_t s = 0; s < grid.sites(); ++s) out(Eigen::Index(s)) = f(grid.point(s));
  return out;
}

/// Dual metric g_x(xi, eta) = e^{-2v(x)} g_flat^{-1}(xi, eta).
inline double cometric_pair(const Metric& m, std::size_t site, std::array<double, 2> xi, std::array<double, 2> eta) {
  if (site >= m.grid().sites()) throw std::invalid_argument("cometric_pair: site outside grid");
  return std::exp(-2.0 * m.v(site)) * m.background().flat_pairing(xi, eta);
}

inline double cometric_pair(const Metric& m, const Covector& xi, const Covector& eta) {
  if (xi.site != eta.site) throw std::invalid_argument("cometric_pair: covectors at different points");
  return cometric_pair(m, xi.site, xi.xi, eta.xi);
}

inline double cometric_norm(const Metric& m, std::size_t site, std::array<double, 2> xi) {
  return std::sqrt(cometric_pair(m, site, xi, xi));
}

/// Riemannian distance between two angles on a circle metric: the shorter of
/// the two arcs of the length density e^{v} L / 2pi.
///
/// The density is Fourier-interpolated onto an 8x refined grid, its
/// coefficients taken by the trapezoid rule there, and the arc integrals
/// evaluated termwise from the resulting series.
inline double geodesic_distance(const Metric& m, double theta1, double theta2) {
  if (m.dimension() != 1) throw std::invalid_argument("geodesic_distance: metric must be one-dimensional");
  const int fine = 8 * m.grid().n;
  const double scale = m.background().length / two_pi;
  std::vector<double> density(std::size_t(fine), 0.0);
  for (int j = 0; j < fine; ++j) density[std::size_t(j)] = std::exp(m.v_at({two_pi * j / fine, 0.0})) * scale;

  auto wrap = [](double t) {
    double r = std::fmod(t, two_pi);
    return r < 0.0 ? r + two_pi : r;
  };
  double a = wrap(theta1), b = wrap(theta2);
  if (a > b) std::swap(a, b);

  double mean = 0.0;
  for (double d : density) mean += d;
  mean /= fine;
  double arc = mean * (b - a);
  for (int k = 1; k < fine / 2; ++k) {
    cplx coeff = 0.0;
    for (int j = 0; j < fine; ++j) coeff += density[std::size_t(j)] * std::polar(1.0, -two_pi * double((long long)k * j % fine) / fine);
    coeff /= double(fine);
    // Real density: the -k term is the conjugate, so the pair integrates to
    // 2 Re[c_k (e^{ikb} - e^{ika}) / (ik)].
    const cplx delta = (std::polar(1.0, k * b) - std::polar(1.0, k * a)) / cplx(0.0, double(k));
    arc += 2.0 * (coeff * delta).real();
  }
  const double total = mean * two_pi;
  return std::min(arc, total - arc);
}

}  // namespace confspec
