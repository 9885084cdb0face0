#pragma once

#include "confspec/conformal.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace confspec {

using json = nlohmann::ordered_json;

/// Raised for malformed files; the message names the offending field or line.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Hashing
// ---------------------------------------------------------------------------

/// Git blob id: SHA-1 of "blob <len>\0" followed by the content.
inline std::string git_blob_hash(const std::string& content) {
  const std::string blob = "blob " + std::to_string(content.size()) + std::string(1, '\0') + content;
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(blob.data(), blob.size(), digest, &len, EVP_sha1(), nullptr) != 1) throw std::runtime_error("sha1 failed");
  std::ostringstream out;
  out << std::hex << std::setfill('0');
  for (unsigned int i = 0; i < len; ++i) out << std::setw(2) << int(digest[i]);
  return out.str();
}

// ---------------------------------------------------------------------------
// Metric files
// ---------------------------------------------------------------------------

inline json background_to_json(const FlatBackground& bg) {
  if (bg.kind == FlatBackground::Kind::circle) return {{"kind", "circle"}, {"length", bg.length}};
  return {{"kind", "torus"}, {"modulus", bg.modulus}};
}

namespace detail {
inline const json& field(const json& j, const std::string& key, const std::string& where) {
  if (!j.is_object()) throw FormatError(where + ": expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw FormatError(where + "." + key + ": missing");
  return *it;
}

template <class T>
T get_as(const json& j, const std::string& where) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw FormatError(where + ": wrong type");
  }
}

template <class T>
T get_field(const json& j, const std::string& key, const std::string& where) {
  return get_as<T>(field(j, key, where), where + "." + key);
}
}  // namespace detail

inline FlatBackground background_from_json(const json& j, const std::string& where = "background") {
  const auto kind = detail::get_field<std::string>(j, "kind", where);
  try {
    if (kind == "circle") return FlatBackground::circle(detail::get_field<double>(j, "length", where));
    if (kind == "torus") return FlatBackground::torus(detail::get_field<double>(j, "modulus", where));
  } catch (const std::invalid_argument& e) {
    throw FormatError(where + ": " + e.what());
  }
  throw FormatError(where + ".kind: unknown background '" + kind + "'");
}

inline json metric_to_json(const Metric& m) {
  const RealVector& v = m.v_samples();
  return {{"dim", m.grid().dim},
          {"N", m.grid().n},
          {"period", m.grid().period},
          {"background", background_to_json(m.background())},
          {"band_limit", m.band_limit()},
          {"v_samples", std::vector<double>(v.data(), v.data() + v.size())}};
}

/// Rebuilds a metric from its JSON dump. Samples are taken verbatim (no
/// re-truncation) so a dump reloads to bit-identical values.
inline Metric metric_from_json(const json& j, const std::string& where = "metric") {
  const int dim = detail::get_field<int>(j, "dim", where);
  const int n = detail::get_field<int>(j, "N", where);
  const double period = j.contains("period") ? detail::get_field<double>(j, "period", where) : two_pi;
  const auto samples = detail::get_field<std::vector<double>>(j, "v_samples", where);
  try {
    Grid grid(dim, n, period);
    if (samples.size() != grid.sites())
      throw FormatError(where + ".v_samples: expected " + std::to_string(grid.sites()) + " values, got " +
                        std::to_string(samples.size()));
    RealVector v = Eigen::Map<const RealVector>(samples.data(), Eigen::Index(samples.size()));
    return Metric(grid, background_from_json(detail::field(j, "background", where), where + ".background"),
                  {v, detail::get_field<int>(j, "band_limit", where)});
  } catch (const std::invalid_argument& e) {
    throw FormatError(where + ": " + e.what());
  }
}

inline void save_metric(const std::string& path, const Metric& m) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << metric_to_json(m).dump(2) << "\n";
}

inline Metric load_metric(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path + ": cannot open");
  try {
    return metric_from_json(json::parse(in), path);
  } catch (const json::parse_error& e) {
    throw FormatError(path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Operator dumps
// ---------------------------------------------------------------------------

enum class Encoding { binary, text };

/// One header line "# confspec-operator {json}" followed by the column-major
/// entries, as raw little-endian doubles (re, im) or as one "re im" pair per line.
inline void write_operator(std::ostream& out, const OperatorMatrix& op, Encoding enc = Encoding::binary) {
  static_assert(std::endian::native == std::endian::little, "operator dumps assume a little-endian host");
  std::vector<std::string> flags;
  for (auto b : op.spin.flags) flags.push_back(to_string(b));
  json header = {{"N", op.grid.n},
                 {"dim", op.grid.dim},
                 {"period", op.grid.period},
                 {"rank", op.rank},
                 {"basis", "fourier"},
                 {"spin", flags},
                 {"hermitian", op.hermitian},
                 {"encoding", enc == Encoding::binary ? "binary" : "text"}};
  out << "# confspec-operator " << header.dump() << "\n";
  if (enc == Encoding::binary) {
    out.write(reinterpret_cast<const char*>(op.matrix.data()), std::streamsize(op.matrix.size() * sizeof(cplx)));
  } else {
    out << std::setprecision(17);
    for (Eigen::Index i = 0; i < op.matrix.size(); ++i) out << op.matrix.data()[i].real() << " " << op.matrix.data()[i].imag() << "\n";
  }
}

inline OperatorMatrix read_operator(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("operator dump: empty input");
  const std::string tag = "# confspec-operator ";
  if (line.rfind(tag, 0) != 0) throw FormatError("operator dump line 1: missing '# confspec-operator' header");
  json header;
  try {
    header = json::parse(line.substr(tag.size()));
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("operator dump line 1: ") + e.what());
  }
  const std::string where = "operator header";
  OperatorMatrix op;
  try {
    op.grid = Grid(detail::get_field<int>(header, "dim", where), detail::get_field<int>(header, "N", where),
                   detail::get_field<double>(header, "period", where));
  } catch (const std::invalid_argument& e) {
    throw FormatError(where + ": " + e.what());
  }
  op.rank = detail::get_field<int>(header, "rank", where);
  op.hermitian = detail::get_field<bool>(header, "hermitian", where);
  if (detail::get_field<std::string>(header, "basis", where) != "fourier") throw FormatError(where + ".basis: only 'fourier' is supported");
  op.spin.flags.clear();
  for (const auto& f : detail::get_field<std::vector<std::string>>(header, "spin", where)) {
    try {
      op.spin.flags.push_back(boundary_from_string(f));
    } catch (const std::invalid_argument& e) {
      throw FormatError(where + ".spin: " + e.what());
    }
  }
  if (op.rank < 1) throw FormatError(where + ".rank: must be positive");
  const Eigen::Index n = Eigen::Index(op.grid.sites()) * op.rank;
  op.matrix.resize(n, n);
  const auto enc = detail::get_field<std::string>(header, "encoding", where);
  if (enc == "binary") {
    in.read(reinterpret_cast<char*>(op.matrix.data()), std::streamsize(op.matrix.size() * sizeof(cplx)));
    if (in.gcount() != std::streamsize(op.matrix.size() * sizeof(cplx))) throw FormatError("operator dump: truncated binary payload");
  } else if (enc == "text") {
    for (Eigen::Index i = 0; i < op.matrix.size(); ++i) {
      if (!std::getline(in, line)) throw FormatError("operator dump line " + std::to_string(i + 2) + ": missing entry");
      std::istringstream row(line);
      double re = 0.0, im = 0.0;
      if (!(row >> re >> im)) throw FormatError("operator dump line " + std::to_string(i + 2) + ": expected 're im'");
      op.matrix.data()[i] = cplx(re, im);
    }
  } else {
    throw FormatError(where + ".encoding: unknown encoding '" + enc + "'");
  }
  return op;
}

inline void save_operator(const std::string& path, const OperatorMatrix& op, Encoding enc = Encoding::binary) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_operator(out, op, enc);
}

inline OperatorMatrix load_operator(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path + ": cannot open");
  return read_operator(in);
}

// ---------------------------------------------------------------------------
// Results
// ---------------------------------------------------------------------------

inline json complex_matrix_to_json(const ComplexMatrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back({m(i, j).real(), m(i, j).imag()});
    rows.push_back(row);
  }
  return rows;
}

inline json real_matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

inline json symbol_to_json(const SymbolEstimate& est) {
  json fits = json::array();
  for (const auto& f : est.fits) fits.push_back(complex_matrix_to_json(f));
  return {{"sigma", complex_matrix_to_json(est.sigma)},
          {"frequencies", est.frequencies},
          {"residuals", est.residuals},
          {"fits", fits},
          {"converged", est.converged},
          {"truncation_leak", est.truncation_leak}};
}

inline json report_to_json(const TestReport& rep) {
  return {{"decision", to_string(rep.decision)},
          {"max_top_residual", rep.max_top_residual},
          {"top_residuals", rep.top_residuals},
          {"max_truncation_leak", rep.max_truncation_leak},
          {"vanish_threshold", rep.vanish_threshold},
          {"present_threshold", rep.present_threshold}};
}

inline json cometric_to_json(const CometricEstimate& c) {
  json dirs = json::array();
  for (auto d : c.directions) dirs.push_back({d[0], d[1]});
  return {{"site", c.site},
          {"directions", dirs},
          {"pairing", real_matrix_to_json(c.pairing)},
          {"offscalar_residual", c.offscalar_residual},
          {"max_probe_residual", c.max_probe_residual}};
}

inline json verdict_to_json(const Verdict& v) {
  json points = json::array();
  for (const auto& p : v.points)
    points.push_back({{"a", cometric_to_json(p.a)}, {"b", cometric_to_json(p.b)}, {"deviation", p.deviation}});
  return {{"decision", to_string(v.decision)},
          {"symbol_channel", to_string(v.symbol_channel)},
          {"cometric_channel", to_string(v.cometric_channel)},
          {"max_anticommutator_deviation", v.max_anticommutator_deviation},
          {"report", report_to_json(v.report)},
          {"cometric_points", points},
          {"note", v.note}};
}

inline json distance_to_json(const DistanceEstimate& d) {
  json modes = json::array();
  for (auto k : d.modes) modes.push_back({k[0], k[1]});
  return {{"value", d.value},
          {"constraint", d.constraint},
          {"flagged", d.flagged},
          {"restart_values", d.restart_values},
          {"modes", modes},
          {"coefficients", std::vector<double>(d.coefficients.data(), d.coefficients.data() + d.coefficients.size())}};
}

inline json factor_to_json(const FactorEstimate& f) {
  return {{"v", f.v}, {"slope_norm", f.slope_norm}, {"fit_residual", f.fit_residual}, {"frequencies", f.frequencies}};
}

/// Per-probe evidence with the fixed column set.
inline void write_report_csv(std::ostream& out, const std::vector<ProbeRow>& rows) {
  out << "point_index,dir_x,dir_y,frequency,residual\n";
  out << std::setprecision(17);
  for (const auto& r : rows) out << r.point_index << "," << r.dir_x << "," << r.dir_y << "," << r.frequency << "," << r.residual << "\n";
}

inline std::vector<ProbeRow> symbol_rows(const SymbolEstimate& est, std::size_t site, std::array<int, 2> dir) {
  std::vector<ProbeRow> rows;
  for (std::size_t i = 0; i < est.frequencies.size(); ++i) rows.push_back({site, dir[0], dir[1], est.frequencies[i], est.residuals[i]});
  return rows;
}

}  // namespace confspec
