// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any fail.
#include "confspec/confspec.hpp"
#include "../oracles.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

using namespace confspec;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

const SpinStructure ap1 = SpinStructure::circle(Boundary::antiperiodic);
const SpinStructure ap2 = SpinStructure::torus(Boundary::antiperiodic, Boundary::antiperiodic);

Metric flat_circle(int n) { return make_circle_metric(two_pi, RealVector::Zero(n), 0); }

Metric sine_circle(int n, double amp) {
  Grid g(1, n);
  return make_circle_metric(two_pi, sample_on(g, [&](std::array<double, 2> x) { return amp * std::sin(x[0]); }), 1);
}

OperatorMatrix phase_multiplier(const Grid& g, const std::function<double(double)>& phase) {
  ComplexVector u(Eigen::Index(g.sites()));
  for (std::size_t s = 0; s < g.sites(); ++s) u(Eigen::Index(s)) = std::polar(1.0, phase(g.point(s)[0]));
  return multiplication_operator(g, u, 1);
}

double top_frequency_residual(const TestReport& rep, int m) {
  double out = 0.0;
  for (const auto& row : rep.rows)
    if (row.frequency == m) out = std::max(out, row.residual);
  return out;
}

Outcome criterion1() {
  const auto v = detect_conformal(build_dirac(flat_circle(64), ap1), build_dirac(sine_circle(64, 0.3), ap1));
  const double top = top_frequency_residual(v.report, 16);
  return {v.report.decision == SymbolDecision::vanishing && top < 0.05,
          fmt("max residual at m = 16: %.3e (< 0.05), symbol channel %s", top, to_string(v.report.decision).c_str())};
}

Outcome criterion2() {
  const auto v = detect_conformal(build_dirac(make_torus_metric(1.0, RealVector::Zero(1024), 0), ap2),
                                  build_dirac(make_torus_metric(2.0, RealVector::Zero(1024), 0), ap2));
  // Directions are (1,0), (0,1), (1,1), (1,-1): pair (0, 2) compares dx with dx + dy.
  const double dev = v.points.empty() ? -1.0 : v.pair_deviation(0, 2);
  const double expected = std::abs(2.0 / std::sqrt(5.0) - 1.0 / std::sqrt(2.0));
  return {v.decision == Decision::not_conformal && std::abs(dev - expected) <= 0.04,
          fmt("decision %s, deviation at (1,1) %.4f vs %.4f +- 0.04", to_string(v.decision).c_str(), dev, expected)};
}

Outcome criterion3() {
  const auto m = sine_circle(128, 0.3);
  const auto d = build_dirac(m, ap1);
  double worst = 0.0;
  for (std::size_t site : default_points(m.grid(), 8))
    worst = std::max(worst, std::abs(recover_conformal_factor(d, m.background(), site, {1, 0}).v - m.v(site)));
  const auto v = detect_conformal(build_dirac(flat_circle(64), ap1), build_dirac(sine_circle(64, 0.3), ap1));
  return {worst <= 0.02 * 0.3 && v.decision == Decision::conformal,
          fmt("max |v_hat - v| = %.2e (<= %.3f), detect says %s", worst, 0.02 * 0.3, to_string(v.decision).c_str())};
}

// pi_+ from the library against (S + Id - pi_0) / 2 with S from an oracle.
double projector_identity_defect(const OperatorMatrix& a, const ComplexMatrix& sign_oracle, const ComplexMatrix& kernel_oracle) {
  const ComplexMatrix plus = spectral_projector(a, SpectralPart::plus).matrix;
  const ComplexMatrix id = ComplexMatrix::Identity(plus.rows(), plus.cols());
  return (plus - 0.5 * (sign_oracle + id - kernel_oracle)).cwiseAbs().maxCoeff();
}

Outcome criterion4() {
  // Flat periodic S^1 is diagonal in modes: sign(k) and a single zero mode.
  const auto d = build_dirac(flat_circle(64), SpinStructure::circle(Boundary::periodic));
  ComplexMatrix s = ComplexMatrix::Zero(64, 64), p0 = ComplexMatrix::Zero(64, 64);
  for (int i = 0; i < 64; ++i) {
    const int k = d.grid.frequency(i);
    s(i, i) = k > 0 ? 1.0 : k < 0 ? -1.0 : 0.0;
    p0(i, i) = k == 0 ? 1.0 : 0.0;
  }
  double worst = projector_identity_defect(d, s, p0);
  const long rank = projector_rank(spectral_projector(d, SpectralPart::zero).matrix);
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    OperatorMatrix h{oracle::random_hermitian(48, rng), Grid(1, 48), 1, true, SpinStructure::trivial(1), std::nullopt};
    worst = std::max(worst, projector_identity_defect(h, oracle::newton_sign(h.matrix), ComplexMatrix::Zero(48, 48)));
  }
  return {worst <= 1e-12 && rank == 1, fmt("max deviation %.2e against oracle signs, kernel rank %ld", worst, rank)};
}

Outcome criterion5() {
  const auto s = sign_of(build_dirac(flat_circle(64), ap1));
  const Grid& g = s.grid;
  const int band = g.n / 8;
  double sigma_err = 0.0, residual = 0.0;
  for (std::size_t site : default_points(g, 8))
    for (int sgn : {1, -1}) {
      const auto est = probe_symbol(s, make_probe(g, site, band, {sgn, 0}, {band + 1, 12, 16}));
      for (std::size_t i = 0; i < est.fits.size(); ++i) {
        sigma_err = std::max(sigma_err, std::abs(est.fits[i](0, 0) - double(sgn)));
        residual = std::max(residual, est.residuals[i]);
      }
    }
  const double eps = 1e-14;
  return {sigma_err <= eps && residual <= eps, fmt("max |sigma -+ 1| = %.2e, max residual %.2e (<= %.1e)", sigma_err, residual, eps)};
}

Outcome criterion6() {
  const auto flat = flat_circle(128);
  const double d0 = connes_distance(build_dirac(flat, ap1), 0, 64, 16).value;
  const double dv = connes_distance(build_dirac(make_circle_metric(two_pi, RealVector::Constant(128, 0.5), 0), ap1), 0, 64, 16).value;
  const double pi = oracle::pi;
  const double ratio = dv / d0;
  const bool in_band = d0 >= 0.95 * pi && d0 <= 1.05 * pi;
  const bool scaled = std::abs(ratio / std::exp(0.5) - 1.0) <= 0.05;
  return {in_band && scaled, fmt("d(0, pi) = %.4f pi (band [0.95, 1.05] pi), ratio %.6f vs e^0.5 = %.6f", d0 / pi, ratio, std::exp(0.5))};
}

Outcome criterion7() {
  Grid g(1, 32);
  const auto u = phase_multiplier(g, [](double t) { return t; });
  const auto ex = extract_multiplier(u);
  double psi_err = 0.0;
  for (std::size_t x = 0; x < g.sites(); ++x) psi_err = std::max(psi_err, std::abs(ex.psi[x](0, 0) - std::polar(1.0, g.point(x)[0])));
  OperatorMatrix dft{FourierTransform(g).unitary_forward_matrix(), g, 1, false, SpinStructure::trivial(1), std::nullopt};
  const double dft_residual = extract_multiplier(dft).residual;
  return {ex.residual <= 1e-12 && psi_err <= 1e-12 && dft_residual >= 0.5,
          fmt("e^{i theta}: residual %.2e, |psi - u| %.2e; DFT residual %.3f", ex.residual, psi_err, dft_residual)};
}

Outcome criterion8() {
  Grid gt(2, 32);
  const std::vector<Metric> metrics{
      flat_circle(64), sine_circle(64, 0.3), make_torus_metric(2.0, RealVector::Zero(1024), 0),
      make_torus_metric(1.0, sample_on(gt, [](std::array<double, 2> x) { return 0.3 * std::sin(x[0]) * std::cos(x[1]); }), 1)};
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  double worst = 0.0;
  for (const auto& m : metrics) {
    const int r = spinor_rank(m.dimension());
    for (std::size_t x = 0; x < m.grid().sites(); ++x)
      for (int k = 0; k < 16; ++k) {
        const bool two = m.dimension() == 2;
        const std::array<double, 2> xi{u(rng), two ? u(rng) : 0.0}, eta{u(rng), two ? u(rng) : 0.0};
        const ComplexMatrix a = clifford(m, x, xi), b = clifford(m, x, eta);
        worst = std::max(worst, (a * b + b * a + 2.0 * cometric_pair(m, x, xi, eta) * ComplexMatrix::Identity(r, r)).norm());
      }
  }
  return {worst <= 1e-12, fmt("max defect %.2e over 4 metrics", worst)};
}

Outcome criterion9() {
  const auto da = build_dirac(flat_circle(64), ap1), db = build_dirac(sine_circle(64, 0.3), ap1);
  const auto base = detect_conformal(da, db);
  const auto u = phase_multiplier(da.grid, [](double t) { return std::sin(t); });
  const auto conj = detect_conformal(da, db, u);
  const double ratio = conj.report.max_top_residual / base.report.max_top_residual;
  return {conj.decision == Decision::conformal && ratio <= 2.0,
          fmt("decision %s, max top residual %.3e vs %.3e with U = Id (ratio %.3g, bound 2)", to_string(conj.decision).c_str(),
              conj.report.max_top_residual, base.report.max_top_residual, ratio)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"conformal detection on S^1", criterion1},
      {"torus moduli witness", criterion2},
      {"factor recovery vs conformal class", criterion3},
      {"projector identity", criterion4},
      {"flat sign symbol exactness", criterion5},
      {"spectral distance on S^1", criterion6},
      {"multiplier extraction", criterion7},
      {"Clifford relation", criterion8},
      {"phase-conjugation robustness", criterion9},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s %zu %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  std::printf("%d of %zu criteria passed\n", int(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
