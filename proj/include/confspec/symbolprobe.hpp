#pragma once

#include "confspec/dirac.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace confspec {

/// One oscillatory probe: a bump concentrated at `site`, pushed along the
/// lattice ray `direction` with plane-wave frequencies k = m * direction for
/// each m in `schedule`.
struct ProbeSpec {
  std::size_t site = 0;
  int bump_band = 1;
  std::array<int, 2> direction{1, 0};
  std::vector<int> schedule;
  ComplexVector bump;  // scalar mode coefficients, unit norm

  int top_frequency() const { return schedule.empty() ? 0 : schedule.back(); }
};

/// Hann-windowed bump with modes |k_i| <= band, centered at `site`, unit norm.
inline ComplexVector make_bump(const Grid& grid, std::size_t site, int band) {
  if (band < 0 || band > grid.n / 8) throw std::invalid_argument("make_bump: band must lie in [0, N/8]");
  if (site >= grid.sites()) throw std::invalid_argument("make_bump: site outside grid");
  const auto x0 = grid.point(site);
  ComplexVector c = ComplexVector::Zero(Eigen::Index(grid.sites()));
  for (std::size_t mode = 0; mode < grid.sites(); ++mode) {
    auto k = grid.wavevector(mode);
    if (std::abs(k[0]) > band || std::abs(k[1]) > band) continue;
    double w = 1.0;
    for (int axis = 0; axis < grid.dim; ++axis) {
      const double c_axis = std::cos(std::numbers::pi * k[std::size_t(axis)] / (2.0 * (band + 1)));
      w *= c_axis * c_axis;
    }
    c(Eigen::Index(mode)) = std::polar(w, -(k[0] * x0[0] + k[1] * x0[1]));
  }
  return c / c.norm();
}

inline void validate_probe(const Grid& grid, const ProbeSpec& p) {
  if (p.site >= grid.sites()) throw std::invalid_argument("probe: site outside grid");
  if (p.bump_band < 0 || p.bump_band > grid.n / 8) throw std::invalid_argument("probe: bump band must lie in [0, N/8]");
  if (p.direction[0] == 0 && p.direction[1] == 0) throw std::invalid_argument("probe: direction must be nonzero");
  if (grid.dim == 1 && p.direction[1] != 0) throw std::invalid_argument("probe: 1D direction has a second component");
  if (p.schedule.empty()) throw std::invalid_argument("probe: empty frequency schedule");
  int prev = 0;
  for (int m : p.schedule) {
    if (m <= prev) throw std::invalid_argument("probe: schedule must be strictly increasing positive integers");
    prev = m;
  }
  const int reach = p.schedule.back() * std::max(std::abs(p.direction[0]), std::abs(p.direction[1]));
  if (reach > grid.n / 4) throw std::invalid_argument("probe: schedule exceeds N/4 along the direction");
  if (std::size_t(p.bump.size()) != grid.sites() || std::abs(p.bump.norm() - 1.0) > 1e-12)
    throw std::invalid_argument("probe: bump must be a unit-norm field on the grid");
}

inline ProbeSpec make_probe(const Grid& grid, std::size_t site, int band, std::array<int, 2> direction, std::vector<int> schedule) {
  ProbeSpec p{site, band, direction, std::move(schedule), make_bump(grid, site, band)};
  validate_probe(grid, p);
  return p;
}

struct ProbeOptions {
  int points = 8;
  int rays = 8;
  int bump_band = -1;  // -1: N/8
  int steps = 4;
};

/// Lattice rays used for torus probes, in order of preference.
inline std::vector<std::array<int, 2>> lattice_rays(int dim, int count) {
  if (dim == 1) return {{1, 0}, {-1, 0}};
  static const std::array<std::array<int, 2>, 16> all{{{1, 0}, {0, 1}, {1, 1}, {1, -1}, {-1, 0}, {0, -1}, {-1, -1}, {-1, 1},
                                                        {2, 1}, {1, 2}, {-1, 2}, {-2, 1}, {-2, -1}, {-1, -2}, {1, -2}, {2, -1}}};
  count = std::clamp(count, 1, int(all.size()));
  return {all.begin(), all.begin() + count};
}

/// Evenly spread schedule ending at the largest frequency allowed along `direction`.
inline std::vector<int> default_schedule(const Grid& grid, std::array<int, 2> direction, int steps) {
  const int top = (grid.n / 4) / std::max(std::abs(direction[0]), std::abs(direction[1]));
  std::vector<int> out;
  for (int j = 1; j <= steps; ++j) {
    const int m = (top * j) / steps;
    if (m > 0 && (out.empty() || m > out.back())) out.push_back(m);
  }
  return out;
}

/// Base points spread over the grid.
inline std::vector<std::size_t> default_points(const Grid& grid, int count) {
  std::vector<std::size_t> out;
  for (int j = 0; j < count; ++j) {
    const int i0 = (j * grid.n) / count;
    const int i1 = (((3 * j) % count) * grid.n) / count;
    out.push_back(grid.flatten(i0, grid.dim == 2 ? i1 : 0));
  }
  return out;
}

inline std::vector<ProbeSpec> default_probes(const Grid& grid, const ProbeOptions& opt = {}) {
  const int band = opt.bump_band < 0 ? grid.n / 8 : opt.bump_band;
  std::vector<ProbeSpec> out;
  for (std::size_t site : default_points(grid, opt.points))
    for (auto dir : lattice_rays(grid.dim, opt.rays)) out.push_back(make_probe(grid, site, band, dir, default_schedule(grid, dir, opt.steps)));
  return out;
}

namespace detail {
// Sparse spinor probe: bump shifted by k, placed in spinor component s.
struct SparseField {
  std::vector<Eigen::Index> index;
  ComplexVector value;
  double leak = 0.0;  // mass of modes that wrapped around the truncation
};

inline SparseField shifted_bump(const Grid& grid, const ComplexVector& bump, std::array<int, 2> k, int rank, int s) {
  SparseField f;
  std::vector<cplx> vals;
  for (std::size_t mode = 0; mode < grid.sites(); ++mode) {
    const cplx c = bump(Eigen::Index(mode));
    if (c == 0.0) continue;
    auto q = grid.wavevector(mode);
    std::array<int, 2> shifted{q[0] + k[0], q[1] + k[1]};
    for (int axis = 0; axis < grid.dim; ++axis)
      if (shifted[std::size_t(axis)] < -grid.n / 2 || shifted[std::size_t(axis)] >= grid.n / 2) {
        f.leak += std::norm(c);
        break;
      }
    f.index.push_back(Eigen::Index(grid.mode_of(shifted)) * rank + s);
    vals.push_back(c);
  }
  f.value = Eigen::Map<ComplexVector>(vals.data(), Eigen::Index(vals.size()));
  f.leak = std::sqrt(f.leak);
  return f;
}

inline ComplexVector apply_sparse(const ComplexMatrix& p, const SparseField& f) {
  return p(Eigen::all, f.index) * f.value;
}

inline std::array<int, 2> scaled(std::array<int, 2> d, int m) { return {d[0] * m, d[1] * m}; }
}  // namespace detail

/// Principal-symbol estimate at one (point, direction).
struct SymbolEstimate {
  ComplexMatrix sigma;                 // fit at the top schedule frequency
  std::vector<int> frequencies;        // schedule multipliers m
  std::vector<ComplexMatrix> fits;     // per-frequency least-squares fits
  std::vector<double> residuals;       // per-frequency fit residuals
  bool converged = false;
  double truncation_leak = 0.0;

  double top_residual() const { return residuals.empty() ? 0.0 : residuals.back(); }
};

inline constexpr double default_probe_tolerance = 0.05;

/// Least-squares fit of e^{-ik.x} P e^{ik.x} acting on the bump against a
/// constant fiber matrix, along the schedule.
inline SymbolEstimate probe_symbol(const OperatorMatrix& p, const ProbeSpec& spec, double tolerance = default_probe_tolerance) {
  validate_probe(p.grid, spec);
  const int r = p.rank;
  SymbolEstimate est;
  for (int m : spec.schedule) {
    const auto k = detail::scaled(spec.direction, m);
    std::vector<detail::SparseField> fields;
    for (int s = 0; s < r; ++s) fields.push_back(detail::shifted_bump(p.grid, spec.bump, k, r, s));
    ComplexMatrix sigma(r, r);
    double residual = 0.0;
    for (int s = 0; s < r; ++s) {
      ComplexVector h = detail::apply_sparse(p.matrix, fields[std::size_t(s)]);
      ComplexVector model = ComplexVector::Zero(h.size());
      for (int t = 0; t < r; ++t) {
        const auto& g = fields[std::size_t(t)];
        cplx dot = 0.0;
        for (Eigen::Index i = 0; i < Eigen::Index(g.index.size()); ++i) dot += std::conj(g.value(i)) * h(g.index[std::size_t(i)]);
        sigma(t, s) = dot;
        for (Eigen::Index i = 0; i < Eigen::Index(g.index.size()); ++i) model(g.index[std::size_t(i)]) += dot * g.value(i);
      }
      residual = std::max(residual, (h - model).norm());
    }
    est.truncation_leak = std::max(est.truncation_leak, fields.front().leak);
    est.frequencies.push_back(m);
    est.fits.push_back(sigma);
    est.residuals.push_back(residual);
  }
  est.sigma = est.fits.back();
  const std::size_t n = est.residuals.size();
  est.converged = est.residuals[n - 1] < tolerance && (n < 2 || est.residuals[n - 2] < tolerance);
  return est;
}

/// Exact conjugation M_{e^{-ik.x}} P M_{e^{ik.x}}: a cyclic index shift in
/// the Fourier basis.
inline OperatorMatrix plane_wave_conjugate(const OperatorMatrix& p, std::array<int, 2> k) {
  const Grid& g = p.grid;
  for (int axis = 0; axis < g.dim; ++axis)
    if (std::abs(k[std::size_t(axis)]) > g.n / 2) throw std::invalid_argument("plane_wave_conjugate: shift exceeds the Fourier band");
  if (g.dim == 1 && k[1] != 0) throw std::invalid_argument("plane_wave_conjugate: 1D shift has a second component");
  const int r = p.rank;
  std::vector<Eigen::Index> perm(std::size_t(p.size()));
  for (std::size_t mode = 0; mode < g.sites(); ++mode) {
    auto q = g.wavevector(mode);
    const auto target = Eigen::Index(g.mode_of({q[0] + k[0], q[1] + k[1]}));
    for (int s = 0; s < r; ++s) perm[mode * std::size_t(r) + std::size_t(s)] = target * r + s;
  }
  return OperatorMatrix{p.matrix(perm, perm), p.grid, p.rank, p.hermitian, p.spin, std::nullopt};
}

/// sigma_sign(D)(xi) = i c_g(xi) / |xi|_g.
inline ComplexMatrix analytic_sign_symbol(const Metric& m, std::size_t site, std::array<double, 2> xi) {
  const ComplexMatrix c = clifford(m, site, xi);
  return cplx(0.0, 1.0) * c / cometric_norm(m, site, xi);
}

enum class SymbolDecision { vanishing, non_vanishing, inconclusive };

inline std::string to_string(SymbolDecision d) {
  switch (d) {
    case SymbolDecision::vanishing: return "vanishing";
    case SymbolDecision::non_vanishing: return "non_vanishing";
    case SymbolDecision::inconclusive: return "inconclusive";
  }
  return "?";
}

struct ProbeRow {
  std::size_t point_index = 0;
  int dir_x = 0;
  int dir_y = 0;
  int frequency = 0;
  double residual = 0.0;
};

struct TestReport {
  std::vector<ProbeRow> rows;
  std::vector<double> top_residuals;  // one per probe, in probe order
  double max_top_residual = 0.0;
  double max_truncation_leak = 0.0;
  SymbolDecision decision = SymbolDecision::inconclusive;
  double vanish_threshold = 0.05;
  double present_threshold = 0.25;
};

inline constexpr double default_vanish_threshold = 0.05;
inline constexpr double default_present_threshold = 0.25;

/// Compactness surrogate: the conjugated operator applied to high-frequency
/// bumps must go to zero.
inline TestReport vanishing_symbol_test(const OperatorMatrix& k, const std::vector<ProbeSpec>& probes,
                                        double vanish = default_vanish_threshold, double present = default_present_threshold) {
  if (!(vanish < present)) throw std::invalid_argument("vanishing_symbol_test: requires vanish threshold < present threshold");
  std::set<std::size_t> points;
  std::set<std::array<int, 2>> dirs;
  for (const auto& p : probes) {
    validate_probe(k.grid, p);
    points.insert(p.site);
    dirs.insert(p.direction);
  }
  const std::size_t need_dirs = k.grid.dim == 1 ? 2 : 4;
  if (points.size() < 8 || dirs.size() < need_dirs)
    throw std::invalid_argument("vanishing_symbol_test: probes must cover >= 8 points and >= " + std::to_string(need_dirs) + " directions");

  TestReport rep;
  rep.vanish_threshold = vanish;
  rep.present_threshold = present;
  for (const auto& p : probes) {
    double top = 0.0;
    for (int m : p.schedule) {
      double residual = 0.0;
      for (int s = 0; s < k.rank; ++s) {
        const auto f = detail::shifted_bump(k.grid, p.bump, detail::scaled(p.direction, m), k.rank, s);
        rep.max_truncation_leak = std::max(rep.max_truncation_leak, f.leak);
        residual = std::max(residual, detail::apply_sparse(k.matrix, f).norm());
      }
      rep.rows.push_back({p.site, p.direction[0], p.direction[1], m, residual});
      top = residual;
    }
    rep.top_residuals.push_back(top);
    rep.max_top_residual = std::max(rep.max_top_residual, top);
  }
  if (rep.max_top_residual < vanish)
    rep.decision = SymbolDecision::vanishing;
  else if (rep.max_top_residual > present)
    rep.decision = SymbolDecision::non_vanishing;
  else
    rep.decision = SymbolDecision::inconclusive;
  return rep;
}

}  // namespace confspec
