#pragma once

#include "confspec/geometry.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace confspec {

enum class Boundary { periodic, antiperiodic };

inline std::string to_string(Boundary b) { return b == Boundary::periodic ? "periodic" : "antiperiodic"; }

inline Boundary boundary_from_string(const std::string& s) {
  if (s == "periodic") return Boundary::periodic;
  if (s == "antiperiodic") return Boundary::antiperiodic;
  throw std::invalid_argument("unknown spin boundary flag '" + s + "'");
}

/// Periodic/antiperiodic choice along each generator of the fundamental group.
struct SpinStructure {
  std::vector<Boundary> flags{Boundary::periodic};

  static SpinStructure circle(Boundary b) { return {{b}}; }
  static SpinStructure torus(Boundary bx, Boundary by) { return {{bx, by}}; }
  static SpinStructure trivial(int dim) { return {std::vector<Boundary>(std::size_t(dim), Boundary::periodic)}; }

  /// Frequency offset along an axis: 0 (periodic) or 1/2 (antiperiodic).
  double shift(int axis) const { return flags.at(std::size_t(axis)) == Boundary::antiperiodic ? 0.5 : 0.0; }

  bool operator==(const SpinStructure&) const = default;
};

/// Dense operator on the flattened spinor space, in the Fourier working basis.
/// Row/column index = mode * rank + spinor component.
struct OperatorMatrix {
  /// Recorded by the Dirac builders: matrix = M_w D_flat M_w for this
  /// background and weight samples w. Anything that derives a new matrix
  /// leaves it unset.
  struct DiracStructure {
    FlatBackground background;
    RealVector weight;
  };

  ComplexMatrix matrix;
  Grid grid;
  int rank = 1;
  bool hermitian = false;
  SpinStructure spin;
  std::optional<DiracStructure> structure;

  Eigen::Index size() const { return matrix.rows(); }

  double hermitian_defect() const { return (matrix - matrix.adjoint()).cwiseAbs().maxCoeff(); }

  bool same_space(const OperatorMatrix& o) const { return grid == o.grid && rank == o.rank && size() == o.size(); }
};

inline ComplexMatrix pauli_x() {
  ComplexMatrix s(2, 2);
  s << 0.0, 1.0, 1.0, 0.0;
  return s;
}

inline ComplexMatrix pauli_y() {
  ComplexMatrix s(2, 2);
  s << 0.0, cplx(0.0, -1.0), cplx(0.0, 1.0), 0.0;
  return s;
}

/// Hermitian symbol of the flat Dirac operator at (real) wave covector k.
inline ComplexMatrix flat_dirac_symbol(const FlatBackground& bg, std::array<double, 2> k) {
  if (bg.kind == FlatBackground::Kind::circle) {
    ComplexMatrix s(1, 1);
    s(0, 0) = bg.circle_scale() * k[0];
    return s;
  }
  return k[0] * pauli_x() + (k[1] / bg.modulus) * pauli_y();
}

namespace detail {
inline void check_spin(const Grid& grid, const SpinStructure& spin) {
  if (int(spin.flags.size()) != grid.dim)
    throw std::invalid_argument("spin structure needs " + std::to_string(grid.dim) + " flag(s), got " +
                                std::to_string(spin.flags.size()));
}

inline void symmetrize(ComplexMatrix& m) {
  ComplexMatrix adj = m.adjoint();
  m = 0.5 * (m + adj);
}
}  // namespace detail

/// Flat Dirac operator: block diagonal in the (spin-shifted) Fourier basis.
inline OperatorMatrix build_flat_dirac(const FlatBackground& bg, const SpinStructure& spin, const Grid& grid) {
  if (grid.dim != bg.dim()) throw std::invalid_argument("build_flat_dirac: grid does not match background");
  detail::check_spin(grid, spin);
  const int r = spinor_rank(grid.dim);
  const Eigen::Index size = Eigen::Index(grid.sites()) * r;
  OperatorMatrix op{ComplexMatrix::Zero(size, size), grid, r, true, spin, std::nullopt};
  for (std::size_t mode = 0; mode < grid.sites(); ++mode) {
    auto k = grid.wavevector(mode);
    std::array<double, 2> shifted{k[0] + spin.shift(0), grid.dim == 2 ? k[1] + spin.shift(1) : 0.0};
    op.matrix.block(Eigen::Index(mode) * r, Eigen::Index(mode) * r, r, r) = flat_dirac_symbol(bg, shifted);
  }
  op.structure = OperatorMatrix::DiracStructure{bg, RealVector::Ones(Eigen::Index(grid.sites()))};
  return op;
}

/// Dense multiplication operator by scalar samples f, acting on rank-r spinors.
/// Entry ((a,s),(b,s)) is the Fourier coefficient of f at k_a - k_b (mod N).
inline OperatorMatrix multiplication_operator(const Grid& grid, const ComplexVector& f, int rank,
                                              const SpinStructure& spin = {}) {
  if (std::size_t(f.size()) != grid.sites()) throw std::invalid_argument("multiplication_operator: sample count does not match grid");
  if (rank < 1) throw std::invalid_argument("multiplication_operator: rank must be positive");
  const ComplexVector c = FourierTransform(grid).coefficients(f);
  const std::size_t sites = grid.sites();
  const Eigen::Index size = Eigen::Index(sites) * rank;
  OperatorMatrix op{ComplexMatrix::Zero(size, size), grid, rank, f.imag().cwiseAbs().maxCoeff() == 0.0,
                    spin.flags.size() == std::size_t(grid.dim) ? spin : SpinStructure::trivial(grid.dim), std::nullopt};
  for (std::size_t a = 0; a < sites; ++a) {
    auto ka = grid.wavevector(a);
    for (std::size_t b = 0; b < sites; ++b) {
      auto kb = grid.wavevector(b);
      const cplx value = c(Eigen::Index(grid.mode_of({ka[0] - kb[0], ka[1] - kb[1]})));
      for (int s = 0; s < rank; ++s) op.matrix(Eigen::Index(a) * rank + s, Eigen::Index(b) * rank + s) = value;
    }
  }
  return op;
}

inline OperatorMatrix multiplication_operator(const Grid& grid, const RealVector& f, int rank, const SpinStructure& spin = {}) {
  return multiplication_operator(grid, ComplexVector(f.cast<cplx>()), rank, spin);
}

/// Multiplication by a matrix-valued function: one rank x rank matrix per site.
inline OperatorMatrix multiplication_operator(const Grid& grid, const std::vector<ComplexMatrix>& f, int rank,
                                              const SpinStructure& spin = {}) {
  if (f.size() != grid.sites()) throw std::invalid_argument("multiplication_operator: sample count does not match grid");
  for (const auto& m : f)
    if (m.rows() != rank || m.cols() != rank) throw std::invalid_argument("multiplication_operator: fiber matrix has wrong shape");
  const std::size_t sites = grid.sites();
  const Eigen::Index size = Eigen::Index(sites) * rank;
  FourierTransform ft(grid);
  OperatorMatrix op{ComplexMatrix::Zero(size, size), grid, rank, false,
                    spin.flags.size() == std::size_t(grid.dim) ? spin : SpinStructure::trivial(grid.dim), std::nullopt};
  bool hermitian = true;
  for (const auto& m : f) hermitian = hermitian && (m - m.adjoint()).cwiseAbs().maxCoeff() == 0.0;
  op.hermitian = hermitian;
  ComplexVector entry(static_cast<Eigen::Index>(sites));
  for (int s = 0; s < rank; ++s) {
    for (int t = 0; t < rank; ++t) {
      for (std::size_t x = 0; x < sites; ++x) entry(Eigen::Index(x)) = f[x](s, t);
      const ComplexVector c = ft.coefficients(entry);
      for (std::size_t a = 0; a < sites; ++a) {
        auto ka = grid.wavevector(a);
        for (std::size_t b = 0; b < sites; ++b) {
          auto kb = grid.wavevector(b);
          op.matrix(Eigen::Index(a) * rank + s, Eigen::Index(b) * rank + t) =
              c(Eigen::Index(grid.mode_of({ka[0] - kb[0], ka[1] - kb[1]})));
        }
      }
    }
  }
  return op;
}

/// Dirac operator of g = e^{2v} g_flat on the fixed flat-measure space:
/// D_g = M_{e^{-v/2}} D_flat M_{e^{-v/2}}.
inline OperatorMatrix build_dirac(const Metric& m, const SpinStructure& spin) {
  const Grid& grid = m.grid();
  OperatorMatrix flat = build_flat_dirac(m.background(), spin, grid);
  FourierTransform ft(grid);
  const ComplexVector w = m.exp_v(-0.5).cast<cplx>();
  // D, W Hermitian: D W = (W D)^*, so D_g = W (W D)^*.
  ComplexMatrix wd = ft.multiply(w, flat.matrix, flat.rank);
  ComplexMatrix dw = wd.adjoint();
  flat.matrix = ft.multiply(w, dw, flat.rank);
  detail::symmetrize(flat.matrix);
  flat.structure->weight = m.exp_v(-0.5);
  return flat;
}

/// The rescaled operator as it acts on L^2 of the rescaled volume:
/// e^{-(n+1)v/2} D_flat e^{(n-1)v/2}. Not Hermitian for the flat inner product.
inline OperatorMatrix build_dirac_volume_form(const Metric& m, const SpinStructure& spin) {
  const Grid& grid = m.grid();
  const double n = m.dimension();
  OperatorMatrix op = build_flat_dirac(m.background(), spin, grid);
  const auto left = multiplication_operator(grid, m.exp_v(-(n + 1.0) / 2.0), op.rank);
  const auto right = multiplication_operator(grid, m.exp_v((n - 1.0) / 2.0), op.rank);
  op.matrix = left.matrix * op.matrix * right.matrix;
  op.hermitian = false;
  op.structure.reset();
  return op;
}

/// Unitary J: L^2(vol_g) -> L^2(vol_flat), phi -> e^{n v / 2} phi.
inline OperatorMatrix volume_identification(const Metric& m, bool inverse = false) {
  const double n = m.dimension();
  return multiplication_operator(m.grid(), m.exp_v((inverse ? -n : n) / 2.0), spinor_rank(m.dimension()));
}

/// Clifford multiplication c_g(xi) at a site: skew-Hermitian with
/// c(xi)^2 = -g(xi, xi) Id. The Dirac symbol is i c_g(xi).
inline ComplexMatrix clifford(const Metric& m, std::size_t site, std::array<double, 2> xi) {
  if (xi[0] == 0.0 && xi[1] == 0.0) throw std::invalid_argument("clifford: covector must be nonzero");
  if (site >= m.grid().sites()) throw std::invalid_argument("clifford: site outside grid");
  return cplx(0.0, -std::exp(-m.v(site))) * flat_dirac_symbol(m.background(), xi);
}

inline ComplexMatrix clifford(const Metric& m, const Covector& xi) { return clifford(m, xi.site, xi.xi); }

/// Spectral gradient (d/dx0, d/dx1) of grid samples, one entry per site.
/// Derivatives use centered frequencies; the Nyquist mode contributes nothing.
inline std::vector<std::array<cplx, 2>> spectral_gradient(const Grid& grid, const ComplexVector& a) {
  FourierTransform ft(grid);
  const ComplexVector c = ft.coefficients(a);
  std::array<ComplexVector, 2> d{ComplexVector::Zero(c.size()), ComplexVector::Zero(c.size())};
  for (std::size_t m = 0; m < grid.sites(); ++m) {
    auto k = grid.wavevector(m);
    for (int axis = 0; axis < grid.dim; ++axis)
      if (k[std::size_t(axis)] != -grid.n / 2) d[std::size_t(axis)](Eigen::Index(m)) = cplx(0.0, k[std::size_t(axis)]) * c(Eigen::Index(m));
  }
  const ComplexVector g0 = ft.samples(d[0]);
  const ComplexVector g1 = grid.dim == 2 ? ft.samples(d[1]) : ComplexVector::Zero(c.size());
  std::vector<std::array<cplx, 2>> out(grid.sites());
  for (std::size_t x = 0; x < grid.sites(); ++x) out[x] = {g0(Eigen::Index(x)), g1(Eigen::Index(x))};
  return out;
}

/// Fiber matrices of [D, M_a] for a Dirac operator with recorded structure:
/// w(x)^2 (-i) sigma_flat(grad a(x)), i.e. Clifford multiplication by da.
inline std::vector<ComplexMatrix> commutator_fibers(const OperatorMatrix& d, const ComplexVector& a) {
  if (!d.structure) throw std::invalid_argument("commutator_fibers: operator carries no Dirac structure");
  if (std::size_t(a.size()) != d.grid.sites()) throw std::invalid_argument("commutator_fibers: sample count does not match grid");
  const auto grad = spectral_gradient(d.grid, a);
  const auto& st = *d.structure;
  std::vector<ComplexMatrix> out;
  out.reserve(grad.size());
  for (std::size_t x = 0; x < grad.size(); ++x) {
    const auto& g = grad[x];
    const ComplexMatrix sym = flat_dirac_symbol(st.background, {g[0].real(), g[1].real()}) +
                              cplx(0.0, 1.0) * flat_dirac_symbol(st.background, {g[0].imag(), g[1].imag()});
    const double w = st.weight(Eigen::Index(x));
    out.push_back(cplx(0.0, -w * w) * sym);
  }
  return out;
}

/// [D, M_a] as a full matrix.
///
/// For Dirac operators built here the weights commute with M_a, so only
/// [D_flat, M_a] needs care: it is formed with wrap-consistent frequency
/// differences, which makes it the multiplication by c_g(da). Plain matrices
/// get the literal product difference.
inline ComplexMatrix commutator(const OperatorMatrix& d, const ComplexVector& a) {
  if (d.structure) return multiplication_operator(d.grid, commutator_fibers(d, a), d.rank).matrix;
  const auto ma = multiplication_operator(d.grid, a, d.rank);
  return d.matrix * ma.matrix - ma.matrix * d.matrix;
}

/// Flattened indices of the modes with max |k_i| <= limit.
inline std::vector<Eigen::Index> resolved_indices(const Grid& grid, int rank, int limit) {
  std::vector<Eigen::Index> idx;
  for (std::size_t mode = 0; mode < grid.sites(); ++mode) {
    auto k = grid.wavevector(mode);
    if (std::max(std::abs(k[0]), std::abs(k[1])) > limit) continue;
    for (int s = 0; s < rank; ++s) idx.push_back(Eigen::Index(mode) * rank + s);
  }
  return idx;
}

/// Mode cutoff below which multiplication by a band-`band` function never
/// wraps around the Fourier truncation.
inline int resolved_limit(const Grid& grid, int band) { return grid.n / 2 - 1 - band; }

/// Spectral norm of [D, M_a] for real a.
///
/// Structured Dirac operators: the largest fiber norm of c_g(da), which is the
/// spectral norm of the block-diagonal commutator. Plain matrices: the
/// commutator compressed to the modes that multiplication by a cannot wrap
/// around the Fourier truncation (on the full space the corners carry
/// entries of size ~N that are artifacts of truncation).
inline double commutator_norm(const OperatorMatrix& d, const RealVector& a) {
  if (std::size_t(a.size()) != d.grid.sites()) throw std::invalid_argument("commutator_norm: sample count does not match grid");
  if (d.structure) {
    double out = 0.0;
    for (const auto& f : commutator_fibers(d, a.cast<cplx>()))
      out = std::max(out, f.rows() == 1 ? std::abs(f(0, 0)) : Eigen::JacobiSVD<ComplexMatrix>(f).singularValues()(0));
    return out;
  }
  FourierTransform ft(d.grid);
  const int band = spectral_band(d.grid, ft.coefficients(a));
  const int limit = resolved_limit(d.grid, band);
  if (limit < 0) throw std::invalid_argument("commutator_norm: function band leaves no resolved modes");
  const auto idx = resolved_indices(d.grid, d.rank, limit);
  const auto ma = multiplication_operator(d.grid, a, d.rank);
  ComplexMatrix d_rows = d.matrix(idx, Eigen::all);
  ComplexMatrix ma_rows = ma.matrix(idx, Eigen::all);
  ComplexMatrix dm = d_rows * ma.matrix(Eigen::all, idx) - ma_rows * d.matrix(Eigen::all, idx);
  if (d.hermitian) {
    ComplexMatrix h = cplx(0.0, 1.0) * dm;
    detail::symmetrize(h);
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(h, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
  }
  return Eigen::BDCSVD<ComplexMatrix>(dm).singularValues()(0);
}

}  // namespace confspec
