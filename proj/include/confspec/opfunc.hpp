#pragma once

#include "confspec/dirac.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace confspec {

/// Eigenvalues ascending, eigenvectors as orthonormal columns.
struct SpectralDecomposition {
  RealVector values;
  ComplexMatrix vectors;

  double operator_norm() const { return values.size() == 0 ? 0.0 : values.cwiseAbs().maxCoeff(); }
};

/// Kernel threshold for the functional calculus: |lambda| <= tau counts as 0.
struct ZeroTolerance {
  double tau = 0.0;

  static constexpr double default_relative = 1e-8;

  explicit ZeroTolerance(double t = 0.0) : tau(t) {
    if (!(t >= 0.0)) throw std::invalid_argument("zero tolerance must be nonnegative");
  }
  static ZeroTolerance relative(const SpectralDecomposition& sd, double rel = default_relative) {
    return ZeroTolerance(rel * sd.operator_norm());
  }
};

namespace detail {
inline void require_hermitian(const OperatorMatrix& a, const char* who) {
  if (!a.hermitian) throw std::invalid_argument(std::string(who) + ": operator is not flagged Hermitian");
  if (a.matrix.rows() != a.matrix.cols()) throw std::invalid_argument(std::string(who) + ": operator is not square");
  if (a.size() > 0 && a.hermitian_defect() > 1e-10)
    throw std::invalid_argument(std::string(who) + ": operator is not Hermitian to 1e-10");
}

// Phase: first component above 1e-8 of the column maximum becomes real positive.
inline Eigen::Index normalize_phase(Eigen::Ref<ComplexVector> col) {
  const double peak = col.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < col.size(); ++i) {
    if (std::abs(col(i)) > 1e-8 * peak) {
      col *= std::conj(col(i)) / std::abs(col(i));
      return i;
    }
  }
  return 0;
}
}  // namespace detail

/// Full Hermitian eigendecomposition (LAPACK divide and conquer).
///
/// Columns are phase-normalized; exactly tied eigenvalues are ordered by the
/// position of their first significant component.
inline SpectralDecomposition eigendecompose(const OperatorMatrix& a) {
  detail::require_hermitian(a, "eigendecompose");
  const lapack_int n = lapack_int(a.size());
  SpectralDecomposition sd{RealVector(n), a.matrix};
  if (n == 0) return sd;
  lapack_int info = LAPACKE_zheevd(LAPACK_COL_MAJOR, 'V', 'U', n,
                                   reinterpret_cast<lapack_complex_double*>(sd.vectors.data()), n, sd.values.data());
  if (info != 0) throw NumericalError("eigendecompose: zheevd failed with info " + std::to_string(info));

  std::vector<Eigen::Index> lead(static_cast<std::size_t>(n));
  for (lapack_int j = 0; j < n; ++j) lead[std::size_t(j)] = detail::normalize_phase(sd.vectors.col(j));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index i, Eigen::Index j) {
    if (sd.values(i) != sd.values(j)) return sd.values(i) < sd.values(j);
    return lead[std::size_t(i)] < lead[std::size_t(j)];
  });
  SpectralDecomposition sorted{RealVector(n), ComplexMatrix(n, n)};
  for (lapack_int j = 0; j < n; ++j) {
    sorted.values(j) = sd.values(order[std::size_t(j)]);
    sorted.vectors.col(j) = sd.vectors.col(order[std::size_t(j)]);
  }
  return sorted;
}

/// sign_tau(lambda): 0 inside the kernel window, else +-1.
inline double sign_value(double lambda, const ZeroTolerance& tol) {
  if (std::abs(lambda) <= tol.tau) return 0.0;
  return lambda > 0.0 ? 1.0 : -1.0;
}

enum class SpectralPart { plus, zero, minus };

namespace detail {
// V_S V_S^* over the eigenvector columns selected by `pick`.
template <class Pick>
ComplexMatrix span_projector(const SpectralDecomposition& sd, Pick pick) {
  std::vector<Eigen::Index> cols;
  for (Eigen::Index j = 0; j < sd.values.size(); ++j)
    if (pick(sd.values(j))) cols.push_back(j);
  const Eigen::Index n = sd.vectors.rows();
  if (cols.empty()) return ComplexMatrix::Zero(n, n);
  ComplexMatrix v = sd.vectors(Eigen::all, cols);
  ComplexMatrix p = v * v.adjoint();
  symmetrize(p);
  return p;
}

inline OperatorMatrix like(const OperatorMatrix& d, ComplexMatrix m) {
  return OperatorMatrix{std::move(m), d.grid, d.rank, true, d.spin, std::nullopt};
}
}  // namespace detail

/// Spectral projector from an existing decomposition.
inline ComplexMatrix spectral_projector(const SpectralDecomposition& sd, SpectralPart part, const ZeroTolerance& tol) {
  switch (part) {
    case SpectralPart::plus:
      return detail::span_projector(sd, [&](double l) { return sign_value(l, tol) > 0.0; });
    case SpectralPart::minus:
      return detail::span_projector(sd, [&](double l) { return sign_value(l, tol) < 0.0; });
    case SpectralPart::zero:
      return detail::span_projector(sd, [&](double l) { return sign_value(l, tol) == 0.0; });
  }
  throw std::invalid_argument("spectral_projector: unknown part");
}

/// sign(D) = P_+ - P_- from an existing decomposition, assembled as
/// 2 P_+ + P_0 - Id so only the positive and kernel columns are multiplied out.
inline ComplexMatrix sign_matrix(const SpectralDecomposition& sd, const ZeroTolerance& tol) {
  const Eigen::Index n = sd.vectors.rows();
  ComplexMatrix s = 2.0 * spectral_projector(sd, SpectralPart::plus, tol) + spectral_projector(sd, SpectralPart::zero, tol);
  s -= ComplexMatrix::Identity(n, n);
  return s;
}

inline OperatorMatrix sign_of(const OperatorMatrix& d, std::optional<ZeroTolerance> tol = std::nullopt) {
  const auto sd = eigendecompose(d);
  return detail::like(d, sign_matrix(sd, tol.value_or(ZeroTolerance::relative(sd))));
}

inline OperatorMatrix spectral_projector(const OperatorMatrix& d, SpectralPart part,
                                         std::optional<ZeroTolerance> tol = std::nullopt) {
  const auto sd = eigendecompose(d);
  return detail::like(d, spectral_projector(sd, part, tol.value_or(ZeroTolerance::relative(sd))));
}

/// Numerical rank of a projector (rounded trace).
inline long projector_rank(const ComplexMatrix& p) { return std::lround(p.trace().real()); }

}  // namespace confspec
