#pragma once

#include "confspec/opfunc.hpp"
#include "confspec/symbolprobe.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace confspec {

enum class Decision { conformal, not_conformal, inconclusive };

inline std::string to_string(Decision d) {
  switch (d) {
    case Decision::conformal: return "conformal";
    case Decision::not_conformal: return "not_conformal";
    case Decision::inconclusive: return "inconclusive";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Normalized cometric from symbol anticommutators
// ---------------------------------------------------------------------------

/// Normalized pairings G(xi, eta) = g(xi, eta) / (|xi| |eta|) read off the
/// symbols of a sign operator at one point.
struct CometricEstimate {
  std::size_t site = 0;
  std::vector<std::array<int, 2>> directions;
  Eigen::MatrixXd pairing;         // G, unit diagonal
  double offscalar_residual = 0.0; // non-scalar part of the anticommutators
  std::vector<ComplexMatrix> symbols;
  double max_probe_residual = 0.0;
};

struct CometricOptions {
  int bump_band = -1;  // -1: max(1, N/32)
  int steps = 4;
  double probe_tolerance = 0.2;
};

/// Odd part (sigma(xi) - sigma(-xi)) / 2 of the probed symbol of a sign
/// operator. Symbols of sign(D) are odd in xi; averaging the two rays also
/// cancels the half-integer lattice offset of antiperiodic spin structures.
inline ComplexMatrix probe_odd_symbol(const OperatorMatrix& s, std::size_t site, std::array<int, 2> dir,
                                      const CometricOptions& opt, double* max_residual = nullptr) {
  const Grid& g = s.grid;
  const int band = opt.bump_band < 0 ? std::max(1, g.n / 32) : opt.bump_band;
  const std::array<int, 2> neg{-dir[0], -dir[1]};
  const auto plus = probe_symbol(s, make_probe(g, site, band, dir, default_schedule(g, dir, opt.steps)), opt.probe_tolerance);
  const auto minus = probe_symbol(s, make_probe(g, site, band, neg, default_schedule(g, neg, opt.steps)), opt.probe_tolerance);
  if (!plus.converged || !minus.converged) {
    std::ostringstream msg;
    msg << "recover_normalized_cometric: probes did not converge at site " << site << " direction (" << dir[0] << ","
        << dir[1] << "); top residuals " << plus.top_residual() << " / " << minus.top_residual() << " vs tolerance "
        << opt.probe_tolerance;
    throw NumericalError(msg.str());
  }
  if (max_residual) *max_residual = std::max({*max_residual, plus.top_residual(), minus.top_residual()});
  return 0.5 * (plus.sigma - minus.sigma);
}

inline CometricEstimate recover_normalized_cometric(const OperatorMatrix& s, std::size_t site,
                                                    const std::vector<std::array<int, 2>>& directions,
                                                    const CometricOptions& opt = {}) {
  if (directions.empty()) throw std::invalid_argument("recover_normalized_cometric: no directions");
  CometricEstimate est;
  est.site = site;
  est.directions = directions;
  for (auto d : directions) est.symbols.push_back(probe_odd_symbol(s, site, d, opt, &est.max_probe_residual));

  const std::size_t n = directions.size();
  const int r = s.rank;
  const ComplexMatrix id = ComplexMatrix::Identity(r, r);
  Eigen::MatrixXd raw(n, n);
  std::vector<std::vector<ComplexMatrix>> half_anti(n, std::vector<ComplexMatrix>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      half_anti[i][j] = 0.5 * (est.symbols[i] * est.symbols[j] + est.symbols[j] * est.symbols[i]);
      raw(Eigen::Index(i), Eigen::Index(j)) = half_anti[i][j].trace().real() / r;
    }
  est.pairing.resize(Eigen::Index(n), Eigen::Index(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double scale = std::sqrt(raw(Eigen::Index(i), Eigen::Index(i)) * raw(Eigen::Index(j), Eigen::Index(j)));
      if (!(scale > 0.0)) throw NumericalError("recover_normalized_cometric: degenerate probed symbol");
      est.pairing(Eigen::Index(i), Eigen::Index(j)) = raw(Eigen::Index(i), Eigen::Index(j)) / scale;
      const double off = (half_anti[i][j] - raw(Eigen::Index(i), Eigen::Index(j)) * id).norm() / scale;
      est.offscalar_residual = std::max(est.offscalar_residual, off);
    }
  return est;
}

/// Exact normalized pairing of two covectors, for comparison.
inline double normalized_cometric(const Metric& m, std::size_t site, std::array<double, 2> xi, std::array<double, 2> eta) {
  return cometric_pair(m, site, xi, eta) / (cometric_norm(m, site, xi) * cometric_norm(m, site, eta));
}

// ---------------------------------------------------------------------------
// Conformal equivalence detection
// ---------------------------------------------------------------------------

struct DetectConfig {
  ProbeOptions probes;
  double vanish_threshold = default_vanish_threshold;
  double present_threshold = default_present_threshold;
  CometricOptions cometric;
  double cometric_agree = 0.05;
  double cometric_differ = 0.1;
  double zero_tolerance_relative = ZeroTolerance::default_relative;
};

struct PointComparison {
  CometricEstimate a;
  CometricEstimate b;
  double deviation = 0.0;
};

struct Verdict {
  Decision decision = Decision::inconclusive;
  SymbolDecision symbol_channel = SymbolDecision::inconclusive;
  Decision cometric_channel = Decision::inconclusive;
  TestReport report;
  double max_anticommutator_deviation = 0.0;
  std::vector<PointComparison> points;
  std::string note;

  /// Largest |G_A - G_B| over points for one pair of probe directions.
  double pair_deviation(std::size_t i, std::size_t j) const {
    double out = 0.0;
    for (const auto& p : points)
      out = std::max(out, std::abs(p.a.pairing(Eigen::Index(i), Eigen::Index(j)) - p.b.pairing(Eigen::Index(i), Eigen::Index(j))));
    return out;
  }
};

/// Directions whose pairwise normalized pairings are compared.
inline std::vector<std::array<int, 2>> cometric_directions(int dim) {
  if (dim == 1) return {{1, 0}};
  return {{1, 0}, {0, 1}, {1, 1}, {1, -1}};
}

inline bool is_unitary(const ComplexMatrix& u, double tol = 1e-8) {
  if (u.rows() != u.cols()) return false;
  return (u.adjoint() * u - ComplexMatrix::Identity(u.rows(), u.cols())).cwiseAbs().maxCoeff() <= tol;
}

/// Decides whether sign(D_B) and U sign(D_A) U^* differ by a compact operator,
/// using the vanishing-symbol test on their difference and an independent
/// comparison of the normalized cometrics read off each sign operator.
inline Verdict detect_conformal(const OperatorMatrix& da, const OperatorMatrix& db,
                                const std::optional<OperatorMatrix>& u = std::nullopt, const DetectConfig& cfg = {}) {
  if (!da.same_space(db)) throw std::invalid_argument("detect_conformal: operators act on different spaces");
  if (u && !u->same_space(da)) throw std::invalid_argument("detect_conformal: U acts on a different space");
  if (u && !is_unitary(u->matrix)) throw std::invalid_argument("detect_conformal: U is not unitary");

  auto sign_with = [&](const OperatorMatrix& d) {
    const auto sd = eigendecompose(d);
    return detail::like(d, sign_matrix(sd, ZeroTolerance::relative(sd, cfg.zero_tolerance_relative)));
  };
  OperatorMatrix sa = sign_with(da);
  const OperatorMatrix sb = sign_with(db);
  if (u) {
    sa.matrix = u->matrix * sa.matrix * u->matrix.adjoint();
    detail::symmetrize(sa.matrix);
  }
  OperatorMatrix k = sb;
  k.matrix -= sa.matrix;

  Verdict v;
  v.report = vanishing_symbol_test(k, default_probes(da.grid, cfg.probes), cfg.vanish_threshold, cfg.present_threshold);
  v.symbol_channel = v.report.decision;

  const auto dirs = cometric_directions(da.grid.dim);
  try {
    for (std::size_t site : default_points(da.grid, cfg.probes.points)) {
      PointComparison pc{recover_normalized_cometric(sa, site, dirs, cfg.cometric),
                         recover_normalized_cometric(sb, site, dirs, cfg.cometric), 0.0};
      pc.deviation = (pc.a.pairing - pc.b.pairing).cwiseAbs().maxCoeff();
      v.max_anticommutator_deviation = std::max(v.max_anticommutator_deviation, pc.deviation);
      v.points.push_back(std::move(pc));
    }
    if (v.max_anticommutator_deviation <= cfg.cometric_agree)
      v.cometric_channel = Decision::conformal;
    else if (v.max_anticommutator_deviation >= cfg.cometric_differ)
      v.cometric_channel = Decision::not_conformal;
    else
      v.cometric_channel = Decision::inconclusive;
  } catch (const NumericalError& e) {
    v.cometric_channel = Decision::inconclusive;
    v.note = e.what();
  }

  if (v.symbol_channel == SymbolDecision::vanishing && v.cometric_channel == Decision::conformal)
    v.decision = Decision::conformal;
  else if (v.symbol_channel == SymbolDecision::non_vanishing && v.cometric_channel == Decision::not_conformal)
    v.decision = Decision::not_conformal;
  else {
    v.decision = Decision::inconclusive;
    if (v.note.empty())
      v.note = "channels disagree: symbol test " + to_string(v.symbol_channel) + ", cometric " + to_string(v.cometric_channel);
  }
  return v;
}

// ---------------------------------------------------------------------------
// Conformal factor from the order-1 symbol
// ---------------------------------------------------------------------------

struct FactorEstimate {
  double v = 0.0;
  double slope_norm = 0.0;
  double fit_residual = 0.0;
  std::vector<int> frequencies;
  std::vector<ComplexMatrix> fits;
};

/// Recovers v(x) from the linear growth e^{-v(x)} sigma_flat(k) of the
/// conjugated Dirac operator along a lattice ray.
inline FactorEstimate recover_conformal_factor(const OperatorMatrix& d, const FlatBackground& bg, std::size_t site,
                                               std::array<int, 2> direction, std::vector<int> schedule = {},
                                               int bump_band = -1, double fit_tolerance = 1e-6) {
  const Grid& g = d.grid;
  if (bg.dim() != g.dim) throw std::invalid_argument("recover_conformal_factor: background does not match grid");
  if (schedule.empty()) schedule = default_schedule(g, direction, 4);
  if (schedule.size() < 2) throw std::invalid_argument("recover_conformal_factor: need at least two frequencies");
  const int band = bump_band < 0 ? g.n / 8 : bump_band;
  const auto est = probe_symbol(d, make_probe(g, site, band, direction, schedule), std::numeric_limits<double>::infinity());

  // Entrywise least squares sigma_m = A + m S.
  const double count = double(schedule.size());
  double mean_m = 0.0;
  for (int m : schedule) mean_m += m;
  mean_m /= count;
  ComplexMatrix mean_fit = ComplexMatrix::Zero(d.rank, d.rank);
  for (const auto& f : est.fits) mean_fit += f;
  mean_fit /= count;
  double var = 0.0;
  ComplexMatrix cov = ComplexMatrix::Zero(d.rank, d.rank);
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    const double dm = schedule[i] - mean_m;
    var += dm * dm;
    cov += dm * (est.fits[i] - mean_fit);
  }
  const ComplexMatrix slope = cov / var;
  const ComplexMatrix intercept = mean_fit - mean_m * slope;

  FactorEstimate out;
  out.frequencies = schedule;
  out.fits = est.fits;
  out.slope_norm = Eigen::JacobiSVD<ComplexMatrix>(slope).singularValues()(0);
  const double top = schedule.back() * out.slope_norm;
  for (std::size_t i = 0; i < schedule.size(); ++i)
    out.fit_residual = std::max(out.fit_residual, (est.fits[i] - intercept - double(schedule[i]) * slope).norm() / top);
  if (out.fit_residual > fit_tolerance)
    throw NumericalError("recover_conformal_factor: symbol growth is not linear (relative fit residual " +
                         std::to_string(out.fit_residual) + ")");
  const double flat = bg.flat_norm({double(direction[0]), double(direction[1])});
  out.v = -std::log(out.slope_norm / flat);
  return out;
}

// ---------------------------------------------------------------------------
// Connes distance
// ---------------------------------------------------------------------------

struct DistanceConfig {
  int restarts = 8;
  std::uint64_t seed = 1;
  int iterations = 150;                      // per smoothing stage
  double min_step = 1e-7;                    // stage ends once the trial angle drops below this
  std::vector<double> schatten{8.0, 32.0, 128.0, 512.0};
  double agreement = 0.05;                   // restarts within this fraction of the best count as agreeing
};

struct DistanceEstimate {
  double value = 0.0;
  std::vector<std::array<int, 2>> modes;  // frequency of each basis pair
  RealVector coefficients;                // (cos, sin) pairs per mode, scaled to unit constraint
  double constraint = 0.0;                // ||[D, M_a]|| at the returned coefficients
  std::vector<double> restart_values;
  bool flagged = false;
};

namespace detail {
// H(alpha) = sum_i alpha_i H_i, stored as independent Hermitian fibers: one per
// site for structured Dirac operators, a single compressed block otherwise.
struct DistanceProblem {
  std::vector<std::array<int, 2>> modes;
  std::vector<std::vector<ComplexMatrix>> generators;  // [basis function][fiber]
  RealVector gain;                                     // (phi(x) - phi(y)) / scale
  RealVector scale;                                    // ||[D, M_phi]|| of each raw basis function

  std::size_t fibers() const { return generators.front().size(); }

  ComplexMatrix assemble(const RealVector& alpha, std::size_t f) const {
    ComplexMatrix h = ComplexMatrix::Zero(generators.front()[f].rows(), generators.front()[f].cols());
    for (Eigen::Index i = 0; i < alpha.size(); ++i) h += alpha(i) * generators[std::size_t(i)][f];
    return h;
  }
};

inline std::vector<std::array<int, 2>> distance_modes(int dim, int band) {
  std::vector<std::array<int, 2>> modes;
  if (dim == 1) {
    for (int k = 1; k <= band; ++k) modes.push_back({k, 0});
    return modes;
  }
  for (int k0 = 0; k0 <= band; ++k0)
    for (int k1 = -band; k1 <= band; ++k1)
      if (k0 > 0 || k1 > 0) modes.push_back({k0, k1});
  return modes;
}

inline double hermitian_norm(const ComplexMatrix& h) {
  if (h.rows() == 1) return std::abs(h(0, 0).real());
  return Eigen::SelfAdjointEigenSolver<ComplexMatrix>(h, Eigen::EigenvaluesOnly).eigenvalues().cwiseAbs().maxCoeff();
}

inline DistanceProblem distance_problem(const OperatorMatrix& d, std::size_t x, std::size_t y, int band) {
  const Grid& g = d.grid;
  DistanceProblem prob;
  prob.modes = distance_modes(g.dim, band);
  const auto px = g.point(x), py = g.point(y);
  prob.gain.resize(Eigen::Index(2 * prob.modes.size()));
  prob.scale.resize(prob.gain.size());

  std::vector<Eigen::Index> idx;
  ComplexMatrix d_rows, d_cols;
  if (!d.structure) {
    idx = resolved_indices(g, d.rank, resolved_limit(g, band));
    d_rows = d.matrix(idx, Eigen::all);
    d_cols = d.matrix(Eigen::all, idx);
  }
  for (std::size_t i = 0; i < prob.modes.size(); ++i) {
    const auto k = prob.modes[i];
    for (int part = 0; part < 2; ++part) {
      auto phi = [&](std::array<double, 2> p) {
        const double t = k[0] * p[0] + k[1] * p[1];
        return part == 0 ? std::cos(t) : std::sin(t);
      };
      const RealVector samples = sample_on(g, phi);
      std::vector<ComplexMatrix> fibers;
      if (d.structure) {
        for (auto& f : commutator_fibers(d, samples.cast<cplx>())) fibers.push_back(cplx(0.0, 1.0) * f);
      } else {
        const auto m = multiplication_operator(g, samples, d.rank);
        ComplexMatrix h = cplx(0.0, 1.0) * (d_rows * m.matrix(Eigen::all, idx) - m.matrix(idx, Eigen::all) * d_cols);
        fibers.push_back(std::move(h));
      }
      double scale = 0.0;
      for (auto& f : fibers) {
        symmetrize(f);
        scale = std::max(scale, hermitian_norm(f));
      }
      if (!(scale > 0.0)) throw NumericalError("connes_distance: basis function commutes with D");
      // Unit-norm generators keep the ascent well conditioned across frequencies.
      for (auto& f : fibers) f /= scale;
      const Eigen::Index j = Eigen::Index(2 * i + std::size_t(part));
      prob.generators.push_back(std::move(fibers));
      prob.scale(j) = scale;
      prob.gain(j) = (phi(px) - phi(py)) / scale;
    }
  }
  return prob;
}

// Schatten-p norm of H(alpha) and its gradient along the generators.
struct NormEval {
  double norm = 0.0;      // Schatten-p
  double spectral = 0.0;  // exact operator norm
  RealVector grad;
};

// Eigenvalues (and optionally eigenvectors, overwriting h) of a Hermitian matrix.
inline RealVector eigh_inplace(ComplexMatrix& h, bool vectors) {
  const lapack_int n = lapack_int(h.rows());
  RealVector lam(n);
  if (n == 1) {
    lam(0) = h(0, 0).real();
    h(0, 0) = 1.0;
    return lam;
  }
  const lapack_int info = LAPACKE_zheevd(LAPACK_COL_MAJOR, vectors ? 'V' : 'N', 'U', n,
                                         reinterpret_cast<lapack_complex_double*>(h.data()), n, lam.data());
  if (info != 0) throw NumericalError("connes_distance: zheevd failed with info " + std::to_string(info));
  return lam;
}

inline NormEval schatten(const DistanceProblem& prob, const RealVector& alpha, double p, bool with_grad) {
  const std::size_t nf = prob.fibers();
  std::vector<ComplexMatrix> vecs(nf);
  std::vector<RealVector> lams(nf);
  NormEval out;
  out.grad = RealVector::Zero(alpha.size());
  for (std::size_t f = 0; f < nf; ++f) {
    vecs[f] = prob.assemble(alpha, f);
    lams[f] = eigh_inplace(vecs[f], with_grad);
    out.spectral = std::max(out.spectral, lams[f].cwiseAbs().maxCoeff());
  }
  if (out.spectral == 0.0) return out;
  double acc = 0.0;
  for (const auto& lam : lams)
    for (Eigen::Index k = 0; k < lam.size(); ++k) acc += std::pow(std::abs(lam(k)) / out.spectral, p);
  out.norm = out.spectral * std::pow(acc, 1.0 / p);
  if (!with_grad) return out;
  // d||H||_p / d alpha_i = sum_f Re tr(H_i,f W_f), W_f = sum_k w_k u_k u_k^*.
  for (std::size_t f = 0; f < nf; ++f) {
    const RealVector& lam = lams[f];
    RealVector w(lam.size());
    for (Eigen::Index k = 0; k < lam.size(); ++k)
      w(k) = std::pow(std::abs(lam(k)) / out.norm, p - 1.0) * (lam(k) >= 0.0 ? 1.0 : -1.0);
    if (w.cwiseAbs().maxCoeff() < 1e-300) continue;
    const ComplexMatrix wt = (vecs[f] * w.asDiagonal() * vecs[f].adjoint()).transpose();
    for (std::size_t i = 0; i < prob.generators.size(); ++i)
      out.grad(Eigen::Index(i)) += prob.generators[i][f].cwiseProduct(wt).sum().real();
  }
  return out;
}
}  // namespace detail

/// d(x, y) = sup { a(x) - a(y) : ||[D, M_a]|| <= 1 } over real trigonometric
/// polynomials a with max |k_i| <= band.
///
/// The homogeneous ratio (a(x) - a(y)) / ||[D, M_a]|| is maximized by
/// gradient ascent on the unit sphere of coefficients, with the spectral norm
/// replaced by Schatten norms of increasing order. The returned value always
/// uses the exact spectral norm of the compressed commutator.
inline DistanceEstimate connes_distance(const OperatorMatrix& d, std::size_t x, std::size_t y, int band,
                                        const DistanceConfig& cfg = {}) {
  const Grid& g = d.grid;
  if (x >= g.sites() || y >= g.sites() || x == y) throw std::invalid_argument("connes_distance: need two distinct grid points");
  if (band < 1 || band > g.n / 4) throw std::invalid_argument("connes_distance: band must lie in [1, N/4]");
  if (cfg.restarts < 1) throw std::invalid_argument("connes_distance: need at least one restart");
  const auto prob = detail::distance_problem(d, x, y, band);
  const Eigen::Index dim = prob.gain.size();

  DistanceEstimate best;
  best.modes = prob.modes;
  RealVector best_alpha;
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal;
  for (int r = 0; r < cfg.restarts; ++r) {
    RealVector alpha(dim);
    for (Eigen::Index i = 0; i < dim; ++i) alpha(i) = normal(rng);
    if (alpha.dot(prob.gain) < 0.0) alpha = -alpha;
    alpha.normalize();

    double restart_best = -1.0;
    RealVector restart_alpha = alpha;
    auto track = [&](const RealVector& a, double spectral) {
      const double exact = a.dot(prob.gain) / spectral;
      if (exact > restart_best) {
        restart_best = exact;
        restart_alpha = a;
      }
    };
    for (double p : cfg.schatten) {
      auto eval = detail::schatten(prob, alpha, p, true);
      double value = alpha.dot(prob.gain) / eval.norm;
      track(alpha, eval.spectral);
      double step = 0.1;
      for (int it = 0; it < cfg.iterations && step > cfg.min_step; ++it) {
        RealVector grad = prob.gain / eval.norm - (alpha.dot(prob.gain) / (eval.norm * eval.norm)) * eval.grad;
        grad -= grad.dot(alpha) * alpha;
        const double gnorm = grad.norm();
        if (gnorm < 1e-12) break;
        RealVector trial = (alpha + (step / gnorm) * grad).normalized();
        auto trial_eval = detail::schatten(prob, trial, p, true);
        const double trial_value = trial.dot(prob.gain) / trial_eval.norm;
        if (trial_value > value) {
          alpha = trial;
          eval = std::move(trial_eval);
          value = trial_value;
          track(alpha, eval.spectral);
          step *= 1.5;
        } else {
          step *= 0.5;
        }
      }
    }
    best.restart_values.push_back(restart_best);
    if (restart_best > best.value || best_alpha.size() == 0) {
      best.value = restart_best;
      best_alpha = restart_alpha;
    }
  }

  const double spectral = detail::schatten(prob, best_alpha, 2.0, false).spectral;
  const RealVector unit = best_alpha / spectral;
  best.constraint = detail::schatten(prob, unit, 2.0, false).spectral;
  best.value = unit.dot(prob.gain);
  best.coefficients = unit.cwiseQuotient(prob.scale);
  int agreeing = 0;
  for (double v : best.restart_values)
    if (v >= (1.0 - cfg.agreement) * best.value) ++agreeing;
  best.flagged = cfg.restarts > 1 && agreeing < 2;
  return best;
}

/// Evaluates the band-limited function described by a distance estimate.
inline double evaluate_maximizer(const DistanceEstimate& est, std::array<double, 2> p) {
  double out = 0.0;
  for (std::size_t i = 0; i < est.modes.size(); ++i) {
    const double t = est.modes[i][0] * p[0] + est.modes[i][1] * p[1];
    out += est.coefficients(Eigen::Index(2 * i)) * std::cos(t) + est.coefficients(Eigen::Index(2 * i + 1)) * std::sin(t);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Multipliers commuting with the function algebra
// ---------------------------------------------------------------------------

struct MultiplierExtract {
  std::vector<ComplexMatrix> psi;  // one rank x rank matrix per site
  double residual = 0.0;           // max_a ||U M_a - M_a U||
  Grid grid;
  int rank = 1;

  OperatorMatrix reassemble() const { return multiplication_operator(grid, psi, rank); }
};

inline double spectral_norm(const ComplexMatrix& m) {
  if (m.size() == 0) return 0.0;
  return Eigen::BDCSVD<ComplexMatrix>(m).singularValues()(0);
}

/// Low-frequency lattice characters e^{ik.x} used as default commutation tests.
inline std::vector<ComplexVector> default_test_characters(const Grid& grid, int count = 16) {
  std::vector<ComplexVector> out;
  std::vector<std::array<int, 2>> ks;
  if (grid.dim == 1) {
    for (int l = 1; int(ks.size()) < count; ++l) {
      ks.push_back({l, 0});
      if (int(ks.size()) < count) ks.push_back({-l, 0});
    }
  } else {
    ks = lattice_rays(2, count);
  }
  for (auto k : ks) {
    ComplexVector f(static_cast<Eigen::Index>(grid.sites()));
    for (std::size_t s = 0; s < grid.sites(); ++s) {
      const auto p = grid.point(s);
      f(Eigen::Index(s)) = std::polar(1.0, k[0] * p[0] + k[1] * p[1]);
    }
    out.push_back(std::move(f));
  }
  return out;
}

/// Reads the fiberwise matrices of U from its site-basis block diagonal and
/// measures how far U is from commuting with multiplications.
inline MultiplierExtract extract_multiplier(const OperatorMatrix& u, std::vector<ComplexVector> tests = {}) {
  const Grid& g = u.grid;
  const int r = u.rank;
  if (tests.empty()) tests = default_test_characters(g);
  const ComplexMatrix t = FourierTransform(g).unitary_forward_matrix();
  ComplexMatrix tr = ComplexMatrix::Zero(u.size(), u.size());
  for (Eigen::Index i = 0; i < t.rows(); ++i)
    for (Eigen::Index j = 0; j < t.cols(); ++j)
      for (int s = 0; s < r; ++s) tr(i * r + s, j * r + s) = t(i, j);
  const ComplexMatrix site_basis = tr.adjoint() * u.matrix * tr;

  MultiplierExtract out;
  out.grid = g;
  out.rank = r;
  for (std::size_t x = 0; x < g.sites(); ++x) out.psi.push_back(site_basis.block(Eigen::Index(x) * r, Eigen::Index(x) * r, r, r));
  for (const auto& a : tests) {
    if (std::size_t(a.size()) != g.sites()) throw std::invalid_argument("extract_multiplier: test function does not match grid");
    const auto ma = multiplication_operator(g, a, r);
    out.residual = std::max(out.residual, spectral_norm(u.matrix * ma.matrix - ma.matrix * u.matrix));
  }
  return out;
}

}  // namespace confspec
