#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace confspec {

using cplx = std::complex<double>;
using RealVector = Eigen::VectorXd;
using ComplexVector = Eigen::VectorXcd;
using ComplexMatrix = Eigen::MatrixXcd;

inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// Raised for unusable numerical results (non-convergence, failed LAPACK calls).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Uniform periodic sampling of S^1 (dim 1) or T^2 (dim 2).
///
/// Sites and Fourier modes share one flattened layout: index = i0 * n + i1
/// (axis 0 major). Mode index i stands for the integer frequency k = i - n/2,
/// so frequencies run over [-n/2, n/2 - 1].
struct Grid {
  int dim = 1;
  int n = 8;
  double period = two_pi;

  Grid() = default;
  Grid(int dim_, int n_, double period_ = two_pi) : dim(dim_), n(n_), period(period_) {
    if (dim != 1 && dim != 2) throw std::invalid_argument("grid: dim must be 1 or 2");
    if (n <= 0 || n % 2 != 0) throw std::invalid_argument("grid: N must be a positive even integer");
    if (!(period > 0.0) || !std::isfinite(period)) throw std::invalid_argument("grid: period must be positive");
  }

  std::size_t sites() const { return dim == 1 ? std::size_t(n) : std::size_t(n) * std::size_t(n); }
  double spacing() const { return period / n; }
  double cell_volume() const { return std::pow(spacing(), dim); }

  /// Angle coordinate (period 2*pi) of sample j along one axis.
  double angle(int j) const { return two_pi * j / n; }

  int frequency(int mode_index) const { return mode_index - n / 2; }
  int mode_index(int k) const {
    int i = k + n / 2;
    return ((i % n) + n) % n;
  }

  std::array<int, 2> unflatten(std::size_t flat) const {
    if (dim == 1) return {int(flat), 0};
    return {int(flat / std::size_t(n)), int(flat % std::size_t(n))};
  }
  std::size_t flatten(int i0, int i1 = 0) const {
    return dim == 1 ? std::size_t(i0) : std::size_t(i0) * std::size_t(n) + std::size_t(i1);
  }

  /// Angle coordinates of a site.
  std::array<double, 2> point(std::size_t site) const {
    auto ij = unflatten(site);
    return {angle(ij[0]), dim == 2 ? angle(ij[1]) : 0.0};
  }

  /// Frequency vector of a flattened mode index.
  std::array<int, 2> wavevector(std::size_t mode) const {
    auto ij = unflatten(mode);
    return {frequency(ij[0]), dim == 2 ? frequency(ij[1]) : 0};
  }

  /// Flattened mode index of a frequency vector (reduced mod n).
  std::size_t mode_of(std::array<int, 2> k) const {
    return flatten(mode_index(k[0]), dim == 2 ? mode_index(k[1]) : 0);
  }

  bool operator==(const Grid& o) const { return dim == o.dim && n == o.n && period == o.period; }
};

inline int spinor_rank(int dim) { return dim == 1 ? 1 : 2; }

/// Separable discrete Fourier transform between site samples and mode
/// coefficients, both in the flattened layout of Grid.
///
/// Coefficients follow f_hat(k) = (1/N^dim) sum_x f(x) e^{-i k.x}, so that
/// f(x) = sum_k f_hat(k) e^{i k.x} exactly on the grid.
class FourierTransform {
 public:
  explicit FourierTransform(const Grid& grid) : grid_(grid), forward_(grid.n, grid.n), inverse_(grid.n, grid.n) {
    const int n = grid.n;
    for (int i = 0; i < n; ++i) {
      const int k = grid.frequency(i);
      for (int j = 0; j < n; ++j) {
        const double phase = two_pi * double((long long)k * j % n) / n;
        const cplx e = std::polar(1.0, phase);
        inverse_(j, i) = e;
        forward_(i, j) = std::conj(e) / double(n);
      }
    }
  }

  const Grid& grid() const { return grid_; }

  ComplexVector coefficients(const ComplexVector& samples) const { return apply(forward_, samples); }
  ComplexVector coefficients(const RealVector& samples) const { return apply(forward_, samples.cast<cplx>()); }
  ComplexVector samples(const ComplexVector& coefficients) const { return apply(inverse_, coefficients); }

  /// Applies the multiplication by `f` (site samples) to each column of `x`,
  /// where `x` holds mode coefficients of spinor fields of the given rank.
  ComplexMatrix multiply(const ComplexVector& f, const ComplexMatrix& x, int rank) const {
    const std::size_t sites = grid_.sites();
    if (std::size_t(x.rows()) != sites * std::size_t(rank)) throw std::invalid_argument("multiply: shape mismatch");
    ComplexMatrix out(x.rows(), x.cols());
    ComplexVector component(sites);
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      for (int s = 0; s < rank; ++s) {
        for (std::size_t a = 0; a < sites; ++a) component(a) = x(a * rank + s, c);
        ComplexVector values = apply(inverse_, component);
        values.array() *= f.array();
        ComplexVector back = apply(forward_, values);
        for (std::size_t a = 0; a < sites; ++a) out(a * rank + s, c) = back(a);
      }
    }
    return out;
  }

  /// Unitary version of the transform (samples -> coefficients), used when the
  /// sample basis itself is needed as an orthonormal basis.
  ComplexMatrix unitary_forward_matrix() const {
    const double scale = std::sqrt(double(grid_.sites()));
    if (grid_.dim == 1) return forward_ * scale;
    return kron(forward_, forward_) * scale;
  }

 private:
  static ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
    ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
  }

  ComplexVector apply(const ComplexMatrix& t, const ComplexVector& v) const {
    if (std::size_t(v.size()) != grid_.sites()) throw std::invalid_argument("fourier: sample count does not match grid");
    if (grid_.dim == 1) return t * v;
    const int n = grid_.n;
    // Row-major flattening (i0 * n + i1) maps onto a column-major n x n view
    // with i1 as the row index.
    Eigen::Map<const ComplexMatrix> view(v.data(), n, n);
    ComplexMatrix out = t * view * t.transpose();
    return Eigen::Map<const ComplexVector>(out.data(), out.size());
  }

  Grid grid_;
  ComplexMatrix forward_;
  ComplexMatrix inverse_;
};

/// Largest |k_i| over all modes carrying coefficient magnitude above `cutoff`.
inline int spectral_band(const Grid& grid, const ComplexVector& coefficients, double cutoff = 1e-12) {
  double scale = coefficients.cwiseAbs().maxCoeff();
  if (scale == 0.0) return 0;
  int band = 0;
  for (std::size_t m = 0; m < grid.sites(); ++m) {
    if (std::abs(coefficients(Eigen::Index(m))) <= cutoff * scale) continue;
    auto k = grid.wavevector(m);
    band = std::max({band, std::abs(k[0]), std::abs(k[1])});
  }
  return band;
}

/// Evaluates the trigonometric interpolant of grid coefficients at an
/// arbitrary point (angle coordinates).
inline cplx evaluate_series(const Grid& grid, const ComplexVector& coefficients, std::array<double, 2> x) {
  cplx sum = 0.0;
  for (std::size_t m = 0; m < grid.sites(); ++m) {
    auto k = grid.wavevector(m);
    // The Nyquist mode is split evenly between +n/2 and -n/2 so real data
    // interpolates to a real function.
    double weight = 1.0;
    cplx phase_sum = 0.0;
    if (k[0] == -grid.n / 2 || (grid.dim == 2 && k[1] == -grid.n / 2)) {
      std::vector<int> k0s{k[0]}, k1s{k[1]};
      if (k[0] == -grid.n / 2) k0s.push_back(grid.n / 2);
      if (grid.dim == 2 && k[1] == -grid.n / 2) k1s.push_back(grid.n / 2);
      for (int a : k0s)
        for (int b : k1s) phase_sum += std::polar(1.0, a * x[0] + b * x[1]);
      weight = 1.0 / double(k0s.size() * k1s.size());
    } else {
      phase_sum = std::polar(1.0, k[0] * x[0] + k[1] * x[1]);
    }
    sum += coefficients(Eigen::Index(m)) * phase_sum * weight;
  }
  return sum;
}

}  // namespace confspec
