#pragma once

// Application layer for the symext command-line tool.  Kept header-only so the
// test suite can invoke run_symext() in-process with captured streams instead
// of spawning the binary.

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "symext/criteria.hpp"
#include "symext/errors.hpp"
#include "symext/extender.hpp"
#include "symext/io.hpp"
#include "symext/solver.hpp"
#include "symext/states.hpp"

namespace symext::app {

// Exit codes are part of the tool's contract; scripts key off them.
inline constexpr int kExitExtendible = 0;       // also: verification passed
inline constexpr int kExitNotExtendible = 1;    // also: verification failed
inline constexpr int kExitUndecided = 2;
inline constexpr int kExitMalformedInput = 3;   // unreadable / unparseable state spec
inline constexpr int kExitInvariantViolation = 4;
inline constexpr int kExitUnwritable = 5;
inline constexpr int kExitCorruptCertificate = 6;
inline constexpr int kExitFailure = 7;          // any other library error
inline constexpr int kExitUsage = 64;

// Input that never made it to a StateSpec (missing file, not JSON at all).
struct MalformedInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline int status_exit(Status s) {
  switch (s) {
    case Status::Extendible: return kExitExtendible;
    case Status::NotExtendible: return kExitNotExtendible;
    default: return kExitUndecided;
  }
}

inline int error_exit(const Error& e, std::ostream& err) {
  err << "error: " << e.what() << '\n';
  if (dynamic_cast<const CorruptCertificate*>(&e)) return kExitCorruptCertificate;
  if (dynamic_cast<const FileError*>(&e)) return kExitUnwritable;
  if (dynamic_cast<const NotExtendible*>(&e)) return kExitNotExtendible;
  if (dynamic_cast<const BadDomain*>(&e) || dynamic_cast<const BadDims*>(&e) ||
      dynamic_cast<const DimensionMismatch*>(&e) ||
      dynamic_cast<const NotCirculant*>(&e) ||
      dynamic_cast<const NegativeAbsorber*>(&e) ||
      dynamic_cast<const IndexOutOfRange*>(&e))
    return kExitInvariantViolation;
  return kExitFailure;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MalformedInput("cannot read input file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw MalformedInput("cannot read input file: " + path);
  return buf.str();
}

inline StateSpec load_spec_file(const std::string& path) {
  return state_spec_from_json(Json::parse(read_text_file(path)));
}

// ---------------------------------------------------------------------------
// Family detection and dispatch helpers
// ---------------------------------------------------------------------------

// Recognizes state specs that carry (or encode) the two-parameter family the
// closed-form criteria cover: an explicit parameter pair, an isotropic state,
// or a Bell-diagonal grid whose first column is (a, b, ..., b) with all other
// columns uniform.
inline std::optional<GenIsoParams> closed_family_params(const StateSpec& spec) {
  if (spec.kind == "geniso") return GenIsoParams(spec.d, spec.a, spec.b);
  if (spec.kind == "isotropic") return isotropic_geniso_params(spec.d, spec.a00);
  if (spec.kind == "bell_diagonal") {
    const int d = spec.d;
    const double b = spec.grid(1, 0);
    for (int l = 2; l < d; ++l)
      if (std::abs(spec.grid(l, 0) - b) > 1e-12) return std::nullopt;
    const double rest = spec.grid(0, 1);
    for (int l = 0; l < d; ++l)
      for (int m = 1; m < d; ++m)
        if (std::abs(spec.grid(l, m) - rest) > 1e-12) return std::nullopt;
    return GenIsoParams(d, spec.grid(0, 0), b);
  }
  return std::nullopt;
}

// Any spec can be brought to the twirled (U2-invariant) form; dense inputs
// are twirled, everything else already is invariant.
inline U2InvariantState spec_to_state(const StateSpec& spec) {
  if (spec.kind == "dense") return twirl_u2(dense_spec_to_density(spec));
  return state_spec_to_u2(spec);
}

inline Verdict closed_verdict_of(const StateSpec& spec, double psd_tol) {
  if (auto p = closed_family_params(spec)) return geniso_verdict(*p);
  // Outside the two-parameter family only the necessary condition is
  // available in closed form; passing it proves nothing.
  Verdict v = necessary_corollary(spec_to_state(spec), psd_tol);
  if (v.status == Status::Undecided)
    v.witness = "no closed-form criterion for this family (" + v.witness +
                "); run the solver";
  return v;
}

inline SolveResult solver_result_of(const StateSpec& spec,
                                    const SolverOptions& opts) {
  const U2InvariantState state = spec_to_state(spec);
  if (is_circulant(state.btilde(), 1e-9)) return decompose_circulant(state, opts);
  return decompose_general(state, opts);
}

inline Json verdict_record(const Verdict& v, const std::string& method) {
  return Json{{"status", to_string(v.status)},
              {"method", method},
              {"margin", v.margin},
              {"witness", v.witness}};
}

inline void emit_output(const std::string& text, const std::string& out_path,
                        std::ostream& out) {
  if (out_path.empty()) {
    out << text;
    return;
  }
  atomic_write_file(out_path, text);
  out << "wrote " << out_path << '\n';
}

// ---------------------------------------------------------------------------
// check
// ---------------------------------------------------------------------------

struct CheckArgs {
  std::string spec_path;
  std::string method = "auto";
  int max_iterations = 20000;
  double residual_tol = 1e-8;
  unsigned long long seed = 0;
};

inline SolverOptions solver_options(int max_iterations, double residual_tol,
                                    unsigned long long seed) {
  SolverOptions opts;
  opts.max_iterations = max_iterations;
  opts.residual_tol = residual_tol;
  opts.seed = seed;
  return opts;
}

inline int cmd_check(const CheckArgs& a, std::ostream& out, std::ostream& err) {
  const StateSpec spec = load_spec_file(a.spec_path);
  const SolverOptions opts =
      solver_options(a.max_iterations, a.residual_tol, a.seed);

  std::string method = a.method;
  if (method == "auto")
    method = closed_family_params(spec) ? "closed" : "solver";

  if (method == "closed") {
    const Verdict v = closed_verdict_of(spec, opts.psd_tol);
    out << verdict_record(v, "closed").dump(2) << '\n';
    return status_exit(v.status);
  }
  if (method == "solver") {
    const SolveResult r = solver_result_of(spec, opts);
    out << verdict_record(r.verdict, "solver").dump(2) << '\n';
    return status_exit(r.verdict.status);
  }

  // method == "both": run the closed form and the solver side by side and
  // report whether the definite answers agree.
  const Verdict cv = closed_verdict_of(spec, opts.psd_tol);
  const SolveResult sr = solver_result_of(spec, opts);
  const Verdict& sv = sr.verdict;
  const bool both_definite = cv.status != Status::Undecided &&
                             sv.status != Status::Undecided;
  const bool disagree = both_definite && cv.status != sv.status;
  const Verdict& resolved = cv.status != Status::Undecided ? cv : sv;
  Json j{{"method", "both"},
         {"closed", verdict_record(cv, "closed")},
         {"solver", verdict_record(sv, "solver")},
         {"agreement", !disagree},
         {"status", to_string(resolved.status)},
         {"margin", resolved.margin},
         {"witness", resolved.witness}};
  if (disagree)
    err << "warning: closed form says " << to_string(cv.status)
        << " but the solver says " << to_string(sv.status) << '\n';
  out << j.dump(2) << '\n';
  return status_exit(resolved.status);
}

// ---------------------------------------------------------------------------
// scan
// ---------------------------------------------------------------------------

struct ScanArgs {
  int d = 0;
  int resolution = 41;
  std::string out_path;
  bool oracle = false;
  int max_iterations = 20000;
  double residual_tol = 1e-8;
  unsigned long long seed = 0;
};

inline unsigned scan_thread_count(std::size_t jobs) {
  unsigned n = std::thread::hardware_concurrency();
  if (n == 0) n = 1;
  if (const char* env = std::getenv("SYMEXT_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != nullptr && *end == '\0' && v >= 1)
      n = static_cast<unsigned>(std::min<long>(v, 256));
  }
  return static_cast<unsigned>(
      std::min<std::size_t>(n, std::max<std::size_t>(jobs, 1)));
}

inline int cmd_scan(const ScanArgs& a, std::ostream& out, std::ostream&) {
  const int d = a.d;
  const int n = a.resolution;
  const SolverOptions opts =
      solver_options(a.max_iterations, a.residual_tol, a.seed);

  // Grid over the (x, a-b) parameter polygon: x in [0, 1], the coefficient
  // difference in [-x/(d-1), x].  Off-polygon grid points are skipped.
  std::vector<std::pair<double, double>> pts;
  for (int i = 0; i < n; ++i) {
    const double x = static_cast<double>(i) / (n - 1);
    for (int j = 0; j < n; ++j) {
      const double span = 1.0 + 1.0 / (d - 1);
      const double t = -1.0 / (d - 1) + span * j / (n - 1);
      if (t < -x / (d - 1) - 1e-12 || t > x + 1e-12) continue;
      pts.emplace_back(x, t);
    }
  }

  std::vector<ScanRow> rows(pts.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure = nullptr;
  std::mutex failure_mu;
  auto work = [&]() {
    try {
      for (std::size_t i; (i = next.fetch_add(1)) < pts.size();) {
        const auto [x, t] = pts[i];
        const GenIsoParams p = geniso_from_xt(d, x, t);
        ScanRow& row = rows[i];
        row.x = x;
        row.t = t;
        row.a = p.a();
        row.b = p.b();
        const Verdict cv = geniso_verdict(p);
        row.closed_verdict = cv.status;
        row.closed_margin = cv.margin;
        if (a.oracle) {
          const SolveResult r =
              decompose_circulant(u2_from_bell_diag(geniso_coeffs(p)), opts);
          row.solver_verdict = r.verdict.status;
          row.solver_residual = r.residual;
        }
      }
    } catch (...) {
      const std::lock_guard<std::mutex> lock(failure_mu);
      if (!failure) failure = std::current_exception();
    }
  };

  const unsigned nthreads = scan_thread_count(pts.size());
  if (nthreads <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    for (unsigned i = 0; i < nthreads; ++i) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  atomic_write_file(a.out_path, scan_to_csv(rows, a.oracle));
  std::size_t extendible = 0;
  for (const auto& row : rows)
    if (row.closed_verdict == Status::Extendible) ++extendible;
  out << "scan d=" << d << ": " << rows.size() << " grid points, " << extendible
      << " extendible (closed form) -> " << a.out_path << '\n';
  return kExitExtendible;
}

// ---------------------------------------------------------------------------
// certify
// ---------------------------------------------------------------------------

struct CertifyArgs {
  std::string spec_path;
  std::string out_path;  // empty = stdout
  std::string method = "auto";
  int max_iterations = 20000;
  double residual_tol = 1e-8;
  unsigned long long seed = 0;
};

inline int cmd_certify(const CertifyArgs& a, std::ostream& out,
                       std::ostream& err) {
  const StateSpec spec = load_spec_file(a.spec_path);
  const SolverOptions opts =
      solver_options(a.max_iterations, a.residual_tol, a.seed);

  const auto family = closed_family_params(spec);
  std::string method = a.method;
  if (method == "auto") method = (family && spec.d >= 3) ? "closed" : "solver";

  Decomposition dec;
  if (method == "closed") {
    if (!family)
      throw BadDomain("closed-form certificates require the two-parameter family");
    const Verdict v = geniso_verdict(*family);
    if (v.status == Status::NotExtendible) {
      err << "not extendible: " << v.witness << '\n';
      return kExitNotExtendible;
    }
    dec = geniso_certificate(*family);
  } else {
    const SolveResult r = solver_result_of(spec, opts);
    if (r.verdict.status == Status::NotExtendible) {
      err << "not extendible: " << r.verdict.witness << '\n';
      return kExitNotExtendible;
    }
    if (r.verdict.status != Status::Extendible || !r.decomposition) {
      err << "undecided: " << r.verdict.witness << "; no certificate emitted\n";
      return kExitUndecided;
    }
    dec = *r.decomposition;
  }

  Certificate cert;
  cert.d = spec.d;
  cert.family = spec.kind;
  cert.method = method;
  cert.residual_tol = opts.residual_tol;
  cert.psd_tol = opts.psd_tol;
  cert.decomposition = std::move(dec);
  emit_output(certificate_to_json(cert).dump(2) + "\n", a.out_path, out);
  return kExitExtendible;
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

struct VerifyArgs {
  std::string spec_path;
  std::string cert_path;
  double tol = 1e-7;
};

inline int cmd_verify(const VerifyArgs& a, std::ostream& out, std::ostream& err) {
  const StateSpec spec = load_spec_file(a.spec_path);

  Certificate cert;
  try {
    std::string text;
    try {
      text = read_text_file(a.cert_path);
    } catch (const MalformedInput& e) {
      throw CorruptCertificate(e.what());
    }
    cert = certificate_from_json(Json::parse(text));
  } catch (const Json::exception& e) {
    throw CorruptCertificate(std::string("certificate is not valid JSON: ") +
                             e.what());
  }

  const U2InvariantState state = spec_to_state(spec);
  if (cert.d != state.d())
    throw DimensionMismatch("certificate dimension " + std::to_string(cert.d) +
                            " does not match state dimension " +
                            std::to_string(state.d()));

  const DecompositionReport dec_report =
      verify_decomposition(state, cert.decomposition, a.tol);
  Json j{{"tolerance", a.tol},
         {"decomposition",
          {{"sum_residual", dec_report.sum_residual},
           {"min_eigenvalue", dec_report.min_eigenvalue},
           {"max_cap_excess", dec_report.max_cap_excess},
           {"pass", dec_report.pass}}},
         {"extension", nullptr}};

  bool pass = dec_report.pass;
  const double absorber_tol = std::max(a.tol, 1e-7);
  if (pass && state.d() <= 6) {
    // Small dimensions: build the three-party matrix and check it directly.
    j["mode"] = "dense";
    const Extension ext =
        assemble_extension(state, cert.decomposition, absorber_tol);
    const ExtensionReport ext_report =
        verify_extension(u2_to_density(state), ext, a.tol);
    j["extension"] = {{"swap_residual", ext_report.swap_residual},
                      {"trace_residual", ext_report.trace_residual},
                      {"min_eigenvalue", ext_report.min_eigenvalue},
                      {"pass", ext_report.pass}};
    pass = ext_report.pass;
  } else if (pass) {
    // Large dimensions: the dense matrix is unwieldy, but positivity of the
    // doubled blocks plus nonnegative absorber weights is equivalent.
    j["mode"] = "blockwise";
    double min_eig = 0.0;
    bool absorbers_ok = true;
    try {
      const ExtensionBlocks blocks =
          assemble_blocks(state, cert.decomposition, absorber_tol);
      for (int k = 0; k < state.d(); ++k)
        min_eig = std::min(min_eig,
                           min_eigenvalue(doubled_block(blocks.bk_full[k], k)));
    } catch (const NegativeAbsorber&) {
      absorbers_ok = false;
    }
    const bool psd_ok = min_eig >= -a.tol;
    j["extension"] = {{"min_eigenvalue", min_eig},
                      {"absorbers_ok", absorbers_ok},
                      {"pass", psd_ok && absorbers_ok}};
    pass = psd_ok && absorbers_ok;
  } else {
    j["mode"] = state.d() <= 6 ? "dense" : "blockwise";
  }

  j["pass"] = pass;
  out << j.dump(2) << '\n';
  if (!pass) err << "verification failed\n";
  return pass ? kExitExtendible : kExitNotExtendible;
}

// ---------------------------------------------------------------------------
// twirl
// ---------------------------------------------------------------------------

struct TwirlArgs {
  std::string spec_path;
  std::string out_path;  // empty = stdout
};

// Tries to express a twirled state in Bell-diagonal coordinates; falls back
// to the raw invariant data when the state has no such representation.
inline StateSpec compact_twirled_spec(const U2InvariantState& state) {
  const int d = state.d();
  StateSpec spec;
  spec.d = d;

  // A Bell-diagonal state has a circulant coherence block and coupling
  // coefficients that depend only on the index difference.
  RealMat lambda_means = RealMat::Zero(d, 1);
  double lambda_dev = 0.0;
  for (int m = 0; m < d; ++m) {
    double mean = 0.0;
    for (int i = 0; i < d; ++i) mean += state.lambda()(i, (i - m + d) % d);
    mean /= d;
    lambda_means(m, 0) = mean;
    for (int i = 0; i < d; ++i)
      lambda_dev = std::max(
          lambda_dev, std::abs(state.lambda()(i, (i - m + d) % d) - mean));
  }

  if (circulant_deviation(state.btilde()) <= 1e-10 && lambda_dev <= 1e-10) {
    const std::vector<Complex> c = circulant_class_means(state.btilde());
    const std::vector<Complex> z = phase_table(d);
    RealMat grid(d, d);
    for (int l = 0; l < d; ++l) {
      Complex acc = 0.0;
      for (int k = 0; k < d; ++k) acc += c[k] * std::conj(z[(k * l) % d]);
      grid(l, 0) = std::max(acc.real(), 0.0);
      for (int m = 1; m < d; ++m) grid(l, m) = std::max(lambda_means(m, 0), 0.0);
    }
    try {
      const BellCoefficients coeffs(d, grid);
      const U2InvariantState rebuilt = u2_from_bell_diag(coeffs);
      const double btilde_err =
          frobenius_distance(rebuilt.btilde(), state.btilde());
      const double lambda_err =
          (rebuilt.lambda() - state.lambda()).cwiseAbs().maxCoeff();
      if (btilde_err <= 1e-10 && lambda_err <= 1e-10) {
        spec.kind = "bell_diagonal";
        spec.grid = grid;
        return spec;
      }
    } catch (const Error&) {
      // Negative spectral weights: not Bell-diagonal, use the raw form.
    }
  }

  spec.kind = "u2_invariant";
  spec.btilde = state.btilde().mat();
  spec.lambda = state.lambda();
  return spec;
}

inline int cmd_twirl(const TwirlArgs& a, std::ostream& out, std::ostream&) {
  const StateSpec spec = load_spec_file(a.spec_path);

  StateSpec result;
  if (spec.kind == "dense") {
    result = compact_twirled_spec(twirl_u2(dense_spec_to_density(spec)));
  } else if (spec.kind == "bell_diagonal") {
    const BellCoefficients coeffs(spec.d, spec.grid);
    if (is_u2_invariant_bell(coeffs, 1e-10)) {
      result = spec;  // already invariant: pass through unchanged
    } else {
      result.kind = "bell_diagonal";
      result.d = spec.d;
      result.grid = bell_twirl_grid(coeffs).grid();
    }
  } else {
    // geniso / isotropic / u2_invariant states are invariant by construction.
    result = spec;
  }

  emit_output(state_spec_to_json(result).dump(2) + "\n", a.out_path, out);
  return kExitExtendible;
}

// ---------------------------------------------------------------------------
// entry point
// ---------------------------------------------------------------------------

inline int run_symext(const std::vector<std::string>& args, std::ostream& out,
                      std::ostream& err) {
  CLI::App cli{"symmetric-extension toolkit for two-qudit invariant states"};
  cli.name("symext");
  cli.require_subcommand(1);

  CheckArgs check_args;
  CLI::App* check = cli.add_subcommand(
      "check", "Decide symmetric extendibility of a state spec");
  check->add_option("spec", check_args.spec_path, "state spec JSON file")
      ->required();
  check->add_option("--method", check_args.method,
                    "decision method: auto, closed, solver, or both")
      ->check(CLI::IsMember({"auto", "closed", "solver", "both"}));
  check->add_option("--max-iterations", check_args.max_iterations,
                    "solver sweep budget")
      ->check(CLI::PositiveNumber);
  check->add_option("--tol,--residual-tol", check_args.residual_tol,
                    "solver convergence residual")
      ->check(CLI::PositiveNumber);
  check->add_option("--seed", check_args.seed, "random seed (reserved)");

  ScanArgs scan_args;
  CLI::App* scan = cli.add_subcommand(
      "scan", "Sweep the two-parameter family and write a CSV verdict table");
  scan->add_option("--d", scan_args.d, "local dimension")
      ->required()
      ->check(CLI::Range(2, 64));
  scan->add_option("--resolution", scan_args.resolution,
                   "grid points per axis")
      ->check(CLI::Range(2, 501));
  scan->add_option("--out", scan_args.out_path, "output CSV path")->required();
  scan->add_flag("--oracle", scan_args.oracle,
                 "also run the projection solver on every grid point");
  scan->add_option("--max-iterations", scan_args.max_iterations,
                   "solver sweep budget")
      ->check(CLI::PositiveNumber);
  scan->add_option("--tol,--residual-tol", scan_args.residual_tol,
                   "solver convergence residual")
      ->check(CLI::PositiveNumber);
  scan->add_option("--seed", scan_args.seed, "random seed (reserved)");

  CertifyArgs certify_args;
  CLI::App* certify = cli.add_subcommand(
      "certify", "Produce an extension certificate for an extendible state");
  certify->add_option("spec", certify_args.spec_path, "state spec JSON file")
      ->required();
  certify->add_option("--out", certify_args.out_path,
                      "certificate path (default: stdout)");
  certify->add_option("--method", certify_args.method,
                      "certificate construction: auto, closed, or solver")
      ->check(CLI::IsMember({"auto", "closed", "solver"}));
  certify->add_option("--max-iterations", certify_args.max_iterations,
                      "solver sweep budget")
      ->check(CLI::PositiveNumber);
  certify->add_option("--tol,--residual-tol", certify_args.residual_tol,
                      "solver convergence residual")
      ->check(CLI::PositiveNumber);
  certify->add_option("--seed", certify_args.seed, "random seed (reserved)");

  VerifyArgs verify_args;
  CLI::App* verify = cli.add_subcommand(
      "verify", "Check a certificate against a state spec");
  verify->add_option("spec", verify_args.spec_path, "state spec JSON file")
      ->required();
  verify->add_option("certificate", verify_args.cert_path,
                     "certificate JSON file")
      ->required();
  verify->add_option("--tol", verify_args.tol, "verification tolerance")
      ->check(CLI::PositiveNumber);

  TwirlArgs twirl_args;
  CLI::App* twirl = cli.add_subcommand(
      "twirl", "Project a state spec onto the invariant family");
  twirl->add_option("spec", twirl_args.spec_path, "state spec JSON file")
      ->required();
  twirl->add_option("--out", twirl_args.out_path,
                    "output spec path (default: stdout)");

  try {
    // CLI11's vector-parse entry point consumes arguments back to front.
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    cli.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return cli.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    cli.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (check->parsed()) return cmd_check(check_args, out, err);
    if (scan->parsed()) return cmd_scan(scan_args, out, err);
    if (certify->parsed()) return cmd_certify(certify_args, out, err);
    if (verify->parsed()) return cmd_verify(verify_args, out, err);
    if (twirl->parsed()) return cmd_twirl(twirl_args, out, err);
    err << "symext: no command given\n";
    return kExitUsage;
  } catch (const MalformedInput& e) {
    err << "malformed input: " << e.what() << '\n';
    return kExitMalformedInput;
  } catch (const Json::exception& e) {
    err << "malformed input: " << e.what() << '\n';
    return kExitMalformedInput;
  } catch (const Error& e) {
    return error_exit(e, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace symext::app
