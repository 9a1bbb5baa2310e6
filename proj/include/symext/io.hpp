#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "symext/criteria.hpp"
#include "symext/errors.hpp"
#include "symext/matrix.hpp"
#include "symext/solver.hpp"
#include "symext/states.hpp"

namespace symext {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kCertificateFormat = "symext-certificate";
inline constexpr int kCertificateVersion = 1;

using Json = nlohmann::json;

// Declarative description of a two-qudit state, the on-disk lingua franca.
// "dense" carries a raw d^2 x d^2 matrix and must be twirled before any
// extendibility machinery sees it; "u2_invariant" is the compact twirled form
// for states whose coefficient grid is not recoverable (non-Bell-diagonal).
struct StateSpec {
  std::string kind;  // geniso | isotropic | bell_diagonal | dense | u2_invariant
  int d = 0;
  double a = 0.0;    // geniso
  double b = 0.0;    // geniso
  double a00 = 0.0;  // isotropic
  RealMat grid;      // bell_diagonal
  Mat dense;         // dense, d^2 x d^2
  Mat btilde;        // u2_invariant
  RealMat lambda;    // u2_invariant
};

struct Certificate {
  int d = 0;
  std::string family;
  std::string method;  // closed | solver
  double residual_tol = 0.0;
  double psd_tol = 0.0;
  Decomposition decomposition;
};

namespace detail {

inline double finite_or_throw(double v, const char* where) {
  if (!std::isfinite(v))
    throw NumericalFailure(std::string(where) + ": refusing to serialize a non-finite number");
  return v;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// JSON building blocks: complex numbers as [re, im], matrices as nested
// row-major arrays.

inline Json complex_to_json(const Complex& z) {
  return Json::array({detail::finite_or_throw(z.real(), "complex_to_json"),
                      detail::finite_or_throw(z.imag(), "complex_to_json")});
}

inline Complex complex_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw BadDomain("complex entries must be two-element [re, im] arrays");
  return Complex(j[0].get<double>(), j[1].get<double>());
}

inline Json mat_to_json(const Mat& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(complex_to_json(m(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Mat mat_from_json(const Json& j, int rows, int cols) {
  if (!j.is_array() || static_cast<int>(j.size()) != rows)
    throw BadDims("expected a matrix with " + std::to_string(rows) + " rows");
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    const Json& row = j[i];
    if (!row.is_array() || static_cast<int>(row.size()) != cols)
      throw BadDims("expected matrix rows of length " + std::to_string(cols));
    for (int c = 0; c < cols; ++c) m(i, c) = complex_from_json(row[c]);
  }
  return m;
}

inline Json realmat_to_json(const RealMat& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      row.push_back(detail::finite_or_throw(m(i, j), "realmat_to_json"));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline RealMat realmat_from_json(const Json& j, int rows, int cols) {
  if (!j.is_array() || static_cast<int>(j.size()) != rows)
    throw BadDims("expected a grid with " + std::to_string(rows) + " rows");
  RealMat m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    const Json& row = j[i];
    if (!row.is_array() || static_cast<int>(row.size()) != cols)
      throw BadDims("expected grid rows of length " + std::to_string(cols));
    for (int c = 0; c < cols; ++c) {
      if (!row[c].is_number()) throw BadDomain("grid entries must be numbers");
      m(i, c) = row[c].get<double>();
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// StateSpec serialization.

// Structural problems (missing fields, wrong JSON types) surface as
// nlohmann exceptions -- the CLI maps those to the malformed-input exit code;
// domain violations (bad dimensions, invalid values) throw library errors.
inline StateSpec state_spec_from_json(const Json& j) {
  StateSpec spec;
  spec.kind = j.at("kind").get<std::string>();
  spec.d = j.at("d").get<int>();
  if (spec.d < 2) throw BadDomain("state spec: d must be >= 2, got " + std::to_string(spec.d));

  if (spec.kind == "geniso") {
    spec.a = j.at("a").get<double>();
    spec.b = j.at("b").get<double>();
  } else if (spec.kind == "isotropic") {
    spec.a00 = j.at("a00").get<double>();
  } else if (spec.kind == "bell_diagonal") {
    spec.grid = realmat_from_json(j.at("grid"), spec.d, spec.d);
  } else if (spec.kind == "dense") {
    spec.dense = mat_from_json(j.at("matrix"), spec.d * spec.d, spec.d * spec.d);
  } else if (spec.kind == "u2_invariant") {
    spec.btilde = mat_from_json(j.at("btilde"), spec.d, spec.d);
    spec.lambda = realmat_from_json(j.at("lambda"), spec.d, spec.d);
  } else {
    throw BadDomain("state spec: unknown kind '" + spec.kind + "'");
  }
  return spec;
}

inline Json state_spec_to_json(const StateSpec& spec) {
  Json j;
  j["kind"] = spec.kind;
  j["d"] = spec.d;
  if (spec.kind == "geniso") {
    j["a"] = detail::finite_or_throw(spec.a, "state_spec_to_json");
    j["b"] = detail::finite_or_throw(spec.b, "state_spec_to_json");
  } else if (spec.kind == "isotropic") {
    j["a00"] = detail::finite_or_throw(spec.a00, "state_spec_to_json");
  } else if (spec.kind == "bell_diagonal") {
    j["grid"] = realmat_to_json(spec.grid);
  } else if (spec.kind == "dense") {
    j["matrix"] = mat_to_json(spec.dense);
  } else if (spec.kind == "u2_invariant") {
    j["btilde"] = mat_to_json(spec.btilde);
    j["lambda"] = realmat_to_json(spec.lambda);
  } else {
    throw BadDomain("state spec: unknown kind '" + spec.kind + "'");
  }
  return j;
}

// Validated dense payload: Hermitian within 1e-9 and unit trace within 1e-9,
// returned exactly symmetrized and renormalized so downstream constructors
// see a clean density matrix.
inline DensityMatrix dense_spec_to_density(const StateSpec& spec) {
  if (spec.kind != "dense") throw BadDomain("dense_spec_to_density: spec kind is not dense");
  const int n = spec.d * spec.d;
  if (spec.dense.rows() != n || spec.dense.cols() != n)
    throw BadDims("dense spec: expected a " + std::to_string(n) + " x " + std::to_string(n) +
                  " matrix");
  const double herm_dev = (spec.dense - spec.dense.adjoint()).norm();
  if (herm_dev > 1e-9)
    throw BadDomain("dense spec: matrix deviates from Hermitian by " + std::to_string(herm_dev));
  const double tr = spec.dense.trace().real();
  if (std::abs(tr - 1.0) > 1e-9)
    throw BadDomain("dense spec: trace is " + std::to_string(tr) + ", expected 1 within 1e-9");
  Mat sym = 0.5 * (spec.dense + spec.dense.adjoint());
  sym /= sym.trace().real();
  return DensityMatrix({spec.d, spec.d}, HermitianMatrix(sym));
}

// Builds the twirled-domain state a spec describes.  Dense specs must go
// through twirl_u2 explicitly (the caller decides whether averaging is
// acceptable), so they are rejected here.
inline U2InvariantState state_spec_to_u2(const StateSpec& spec) {
  if (spec.kind == "geniso")
    return u2_from_bell_diag(geniso_coeffs(GenIsoParams(spec.d, spec.a, spec.b)));
  if (spec.kind == "isotropic")
    return u2_from_bell_diag(isotropic_coeffs(spec.d, spec.a00));
  if (spec.kind == "bell_diagonal")
    return u2_from_bell_diag(BellCoefficients(spec.d, spec.grid));
  if (spec.kind == "u2_invariant")
    return U2InvariantState(HermitianMatrix(spec.btilde), spec.lambda);
  if (spec.kind == "dense")
    throw BadDomain("state_spec_to_u2: dense specs must be twirled first");
  throw BadDomain("state_spec_to_u2: unknown kind '" + spec.kind + "'");
}

// ---------------------------------------------------------------------------
// Certificate serialization.

inline Json certificate_to_json(const Certificate& cert) {
  Json j;
  j["format"] = kCertificateFormat;
  j["version"] = kCertificateVersion;
  j["tool_version"] = kToolVersion;
  j["d"] = cert.d;
  j["family"] = cert.family;
  j["method"] = cert.method;
  j["tolerances"] = {{"residual_tol", cert.residual_tol}, {"psd_tol", cert.psd_tol}};
  Json blocks = Json::array();
  for (const auto& b : cert.decomposition.blocks) blocks.push_back(mat_to_json(b.mat()));
  j["blocks"] = std::move(blocks);
  return j;
}

// Any structural or semantic defect in a certificate file maps to
// CorruptCertificate: certificates are machine-written, so a deviation means
// the file was damaged or tampered with, not merely misformatted.
inline Certificate certificate_from_json(const Json& j) {
  try {
    if (!j.is_object() || j.value("format", std::string()) != kCertificateFormat)
      throw CorruptCertificate("certificate: missing or wrong format marker");
    if (j.value("version", -1) != kCertificateVersion)
      throw CorruptCertificate("certificate: unsupported version");
    Certificate cert;
    cert.d = j.at("d").get<int>();
    if (cert.d < 2 || cert.d > 64) throw CorruptCertificate("certificate: implausible dimension");
    cert.family = j.at("family").get<std::string>();
    cert.method = j.value("method", std::string("unknown"));
    cert.residual_tol = j.at("tolerances").at("residual_tol").get<double>();
    cert.psd_tol = j.at("tolerances").at("psd_tol").get<double>();
    if (!(cert.residual_tol > 0.0) || !(cert.psd_tol > 0.0))
      throw CorruptCertificate("certificate: tolerances must be positive");

    const Json& blocks = j.at("blocks");
    if (!blocks.is_array() || static_cast<int>(blocks.size()) != cert.d)
      throw CorruptCertificate("certificate: expected " + std::to_string(cert.d) + " blocks");
    cert.decomposition.d = cert.d;
    for (const Json& bj : blocks) {
      const Mat m = mat_from_json(bj, cert.d, cert.d);
      if ((m - m.adjoint()).norm() > 1e-9)
        throw CorruptCertificate("certificate: block is not Hermitian");
      cert.decomposition.blocks.emplace_back(Mat(0.5 * (m + m.adjoint())));
    }
    return cert;
  } catch (const CorruptCertificate&) {
    throw;
  } catch (const std::exception& e) {
    throw CorruptCertificate(std::string("certificate: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Scan CSV.

struct ScanRow {
  double x = 0.0;
  double t = 0.0;  // a - b
  double a = 0.0;
  double b = 0.0;
  Status closed_verdict = Status::Undecided;
  double closed_margin = 0.0;
  std::optional<Status> solver_verdict;
  double solver_residual = 0.0;
};

namespace detail {

inline std::string format_number(double v, const char* where) {
  finite_or_throw(v, where);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

inline std::string scan_to_csv(const std::vector<ScanRow>& rows, bool oracle) {
  std::string out = "x,a_minus_b,a,b,closed_verdict,closed_margin";
  if (oracle) out += ",solver_verdict,solver_residual";
  out += '\n';
  for (const ScanRow& r : rows) {
    out += detail::format_number(r.x, "scan csv");
    out += ',';
    out += detail::format_number(r.t, "scan csv");
    out += ',';
    out += detail::format_number(r.a, "scan csv");
    out += ',';
    out += detail::format_number(r.b, "scan csv");
    out += ',';
    out += to_string(r.closed_verdict);
    out += ',';
    out += detail::format_number(r.closed_margin, "scan csv");
    if (oracle) {
      if (!r.solver_verdict)
        throw BadDomain("scan csv: oracle column requested but row has no solver verdict");
      out += ',';
      out += to_string(*r.solver_verdict);
      out += ',';
      out += detail::format_number(r.solver_residual, "scan csv");
    }
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Atomic file output: write to a sibling temp file, then rename into place,
// so readers never observe a half-written file.

inline void atomic_write_file(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out.is_open()) throw FileError("cannot open '" + tmp + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out.good()) {
      out.close();
      std::remove(tmp.c_str());
      throw FileError("failed while writing '" + tmp + "'");
    }
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw FileError("cannot move temporary file into '" + path + "'");
  }
}

}  // namespace symext
