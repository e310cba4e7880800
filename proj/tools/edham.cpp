// edham: command line front end.
//
// Exit codes: 0 success, 2 input error, 3 numeric error, 4 verification
// mismatch (only with --verify). Errors go to stderr as one line of JSON.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "edham/edham.hpp"
#include "edham/io.hpp"

namespace {

using edham::Index;
using edham::Matrix;
using edham::Vector;
using edham::io::Json;
using edham::io::to_json;

constexpr int kExitInput = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitVerify = 4;

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

struct Outcome {
  Json json;
  Table csv;
  std::optional<bool> verified;  // set when --verify ran
  std::string verify_detail;
};

struct Common {
  std::string format = "json";
  bool verify = false;
};

std::string cell(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}
std::string cell(long x) { return std::to_string(x); }
std::string cell(int x) { return std::to_string(x); }

std::string render_csv(const Table& t) {
  std::ostringstream os;
  auto line = [&](const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << r[i];
    os << '\n';
  };
  line(t.header);
  for (const auto& r : t.rows) line(r);
  return os.str();
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--format", c.format, "Output format (json is canonical, csv drops matrices)")
      ->check(CLI::IsMember({"json", "csv"}))
      ->capture_default_str();
  sub->add_flag("--verify", c.verify, "Run the independent oracle and exit 4 on mismatch");
}

Json verify_block(bool ok, double tol) {
  Json j;
  j["tolerance"] = tol;
  j["ok"] = ok;
  return j;
}

// ---------------------------------------------------------------------------
// qes-charges

struct ChargesArgs {
  int N = 0;
  int ell = 0;
  double f = 0.0;
  double tol = 5e-6;
};

Outcome run_qes_charges(const ChargesArgs& a, const Common& c) {
  const edham::HautotModel model{a.ell, a.f};
  const auto levels = edham::qes_levels(a.N, model);
  const double E = edham::qes_energy(a.N, model);
  Outcome out;
  Json& j = out.json;
  j["N"] = a.N;
  j["ell"] = a.ell;
  j["f"] = a.f;
  j["E"] = E;
  j["charges"] = Json::array();
  j["levels"] = Json::array();
  out.csv.header = {"j", "F", "E", "nodes", "norm"};
  for (const auto& lv : levels) {
    j["charges"].push_back(lv.charge);
    Json l;
    l["j"] = lv.j;
    l["F"] = lv.charge;
    l["c"] = to_json(lv.coeffs);
    l["norm"] = lv.norm;
    l["nodes"] = lv.nodes;
    l["recurrence_residual"] = lv.recurrence_residual;
    j["levels"].push_back(l);
    out.csv.rows.push_back({cell(lv.j), cell(lv.charge), cell(E), cell(lv.nodes), cell(lv.norm)});
  }
  const auto table = edham::MomentCache::instance().get(a.f, 2 * a.ell + 2 * a.N + 2);
  j["moments"] = {{"method", table->method}, {"warnings", table->warnings}};

  if (c.verify) {
    std::vector<edham::oracle::NearestLevel> near(levels.size());
    edham::parallel_for(levels.size(), [&](std::size_t i) {
      const auto fd = edham::oracle::fd_spectrum_near(edham::radial_problem(model, levels[i].charge), E, 1);
      near[i] = edham::oracle::nearest_level(fd, E);
    });
    bool ok = true;
    Json rows = Json::array();
    out.csv.header.insert(out.csv.header.end(), {"E_fd", "deviation", "nodes_fd"});
    for (std::size_t i = 0; i < levels.size(); ++i) {
      const bool good = near[i].deviation <= a.tol && near[i].nodes == levels[i].nodes;
      ok = ok && good;
      rows.push_back({{"j", levels[i].j}, {"E_fd", near[i].energy}, {"deviation", near[i].deviation},
                      {"nodes_fd", near[i].nodes}, {"ok", good}});
      auto& r = out.csv.rows[i];
      r.insert(r.end(), {cell(near[i].energy), cell(near[i].deviation), cell(near[i].nodes)});
    }
    j["verify"] = verify_block(ok, a.tol);
    j["verify"]["oracle"] = "finite_difference";
    j["verify"]["levels"] = rows;
    out.verified = ok;
    if (!ok) out.verify_detail = "finite-difference level off E_N or node count differs";
  }
  return out;
}

// ---------------------------------------------------------------------------
// qes-sextic

struct SexticArgs {
  int N = 0;
  int ell = 0;
  double a = 0.0;
  int max_N = edham::sextic_default_max_N;
  bool report = false;
  double tol = 5e-6;
};

Outcome run_qes_sextic(const SexticArgs& a, const Common& c) {
  const edham::SinghModel model{a.ell, a.a};
  const auto spec = edham::qes_energies(a.N, model, a.max_N, a.report);
  Outcome out;
  Json& j = out.json;
  j["N"] = a.N;
  j["ell"] = a.ell;
  j["a"] = a.a;
  j["A"] = spec.coupling;
  j["energies"] = to_json(spec.energies);
  j["levels"] = Json::array();
  out.csv.header = {"j", "eps", "A", "nodes", "norm"};
  for (const auto& lv : spec.levels) {
    j["levels"].push_back({{"j", lv.j},
                           {"eps", lv.energy},
                           {"q", to_json(lv.coeffs)},
                           {"norm", lv.norm},
                           {"nodes", lv.nodes},
                           {"recurrence_residual", lv.recurrence_residual}});
    out.csv.rows.push_back({cell(lv.j), cell(lv.energy), cell(spec.coupling), cell(lv.nodes), cell(lv.norm)});
  }
  j["worst_residual"] = spec.worst_residual;
  j["warnings"] = spec.warnings;

  if (c.verify) {
    const auto problem = edham::radial_problem(model, spec.coupling);
    std::vector<edham::oracle::NearestLevel> near(spec.levels.size());
    edham::parallel_for(spec.levels.size(), [&](std::size_t i) {
      const double e = spec.levels[i].energy;
      near[i] = edham::oracle::nearest_level(edham::oracle::fd_spectrum_near(problem, e, 1), e);
    });
    bool ok = true;
    Json rows = Json::array();
    out.csv.header.insert(out.csv.header.end(), {"eps_fd", "deviation"});
    for (std::size_t i = 0; i < near.size(); ++i) {
      const bool good = near[i].deviation <= a.tol;
      ok = ok && good;
      rows.push_back({{"j", spec.levels[i].j}, {"eps_fd", near[i].energy}, {"deviation", near[i].deviation}, {"ok", good}});
      auto& r = out.csv.rows[i];
      r.insert(r.end(), {cell(near[i].energy), cell(near[i].deviation)});
    }
    j["verify"] = verify_block(ok, a.tol);
    j["verify"]["oracle"] = "finite_difference";
    j["verify"]["levels"] = rows;
    out.verified = ok;
    if (!ok) out.verify_detail = "finite-difference spectrum misses a multiplet energy";
  }
  return out;
}

// ---------------------------------------------------------------------------
// spectrum

struct SpectrumArgs {
  int ell = 0;
  double f = 0.0;
  double charge = 0.0;
  int nmax = 8;
  std::string pick = "auto";
  std::optional<double> pick_target;
  int levels = 3;
  double tol = 1e-3;
};

edham::BasisSelection parse_pick(const SpectrumArgs& a, const edham::HautotModel& m) {
  if (a.pick == "auto") return edham::auto_selection(m, a.nmax, a.pick_target.value_or(a.charge));
  std::vector<int> picks;
  std::stringstream ss(a.pick);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      picks.push_back(std::stoi(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw edham::InputError("--pick: expected 'auto' or a comma separated list of integers");
    }
  }
  if (static_cast<int>(picks.size()) != a.nmax + 1)
    throw edham::InputError("--pick: need N_max + 1 = " + std::to_string(a.nmax + 1) + " entries");
  return edham::explicit_selection(std::move(picks));
}

Outcome run_spectrum(const SpectrumArgs& a, const Common& c) {
  const edham::HautotModel model{a.ell, a.f};
  const auto sys = edham::assemble(parse_pick(a, model), model);
  const auto spec = edham::solve_generic(sys, a.charge);
  Outcome out;
  Json& j = out.json;
  j["model"] = {{"ell", a.ell}, {"f", a.f}};
  j["F"] = a.charge;
  j["N_max"] = a.nmax;
  j["pick"] = sys.selection.pick;
  j["basis"] = Json::array();
  for (Index i = 0; i < sys.size(); ++i)
    j["basis"].push_back({{"N", i}, {"j", sys.selection.pick[static_cast<std::size_t>(i)]}, {"E", sys.E(i)},
                          {"F", sys.F(i)}, {"w", sys.w(i)}});
  j["energies"] = to_json(spec.energies);
  j["h"] = to_json(Matrix(spec.h.transpose()));
  j["complex_pairs"] = Json::array();
  for (auto z : spec.complex_pairs) j["complex_pairs"].push_back({{"re", z.real()}, {"im", z.imag()}});
  j["diagnostics"] = {{"reduction", spec.reduction},
                      {"rank", spec.rank},
                      {"cond_R", spec.cond_R},
                      {"wt_asymmetry", sys.wt_asymmetry},
                      {"drift", spec.drift},
                      {"coincident_rows", spec.coincident_rows},
                      {"warnings", spec.warnings}};
  out.csv.header = {"k", "E", "drift"};
  for (std::size_t k = 0; k < spec.energies.size(); ++k)
    out.csv.rows.push_back({cell(static_cast<long>(k)), cell(spec.energies[k]),
                            k < spec.drift.size() ? cell(spec.drift[k]) : std::string()});

  if (c.verify) {
    const int levels = std::min<int>(a.levels, static_cast<int>(spec.energies.size()));
    bool ok = levels > 0;
    Json rows = Json::array();
    out.csv.header.insert(out.csv.header.end(), {"E_fd", "deviation"});
    if (levels > 0) {
      const auto fd = edham::oracle::fd_spectrum(edham::radial_problem(model, a.charge), levels);
      for (int k = 0; k < levels; ++k) {
        const double dev = std::abs(spec.energies[static_cast<std::size_t>(k)] - fd.extrapolated[static_cast<std::size_t>(k)]);
        const bool good = dev <= a.tol;
        ok = ok && good;
        rows.push_back({{"k", k}, {"E_fd", fd.extrapolated[static_cast<std::size_t>(k)]}, {"deviation", dev}, {"ok", good}});
        auto& r = out.csv.rows[static_cast<std::size_t>(k)];
        r.insert(r.end(), {cell(fd.extrapolated[static_cast<std::size_t>(k)]), cell(dev)});
      }
    }
    j["verify"] = verify_block(ok, a.tol);
    j["verify"]["oracle"] = "finite_difference";
    j["verify"]["levels"] = rows;
    out.verified = ok;
    if (!ok) out.verify_detail = "reduced spectrum deviates from the finite-difference oracle";
  }
  return out;
}

// ---------------------------------------------------------------------------
// fixed-point

struct FixedPointArgs {
  std::string family;
  std::vector<double> grid;  // lo, hi[, n]
  std::optional<int> levels;
  double fp_tol = 1e-10;
};

Outcome run_fixed_point(const FixedPointArgs& a, const Common& c) {
  const auto family = edham::io::read_family(edham::io::read_file(a.family));
  double lo = family.domain().lo;
  double hi = family.domain().hi;
  std::size_t n = 400;
  if (!a.grid.empty()) {
    if (a.grid.size() < 2 || a.grid.size() > 3) throw edham::InputError("--grid: expected lo,hi[,n]");
    lo = a.grid[0];
    hi = a.grid[1];
    if (a.grid.size() == 3) {
      if (!(a.grid[2] >= 2) || a.grid[2] != std::floor(a.grid[2])) throw edham::InputError("--grid: n must be an integer >= 2");
      n = static_cast<std::size_t>(a.grid[2]);
    }
  }
  if (!std::isfinite(lo) || !std::isfinite(hi)) throw edham::InputError("--grid is required when the family has no finite domain");
  edham::FixedPointOptions opts;
  opts.fp_tol = a.fp_tol;
  if (a.levels) opts.tracking.max_branches = *a.levels;
  const auto set = edham::find_fixed_points_refining(family, edham::uniform_grid(lo, hi, n), opts);

  Outcome out;
  Json& j = out.json;
  j["dim"] = family.dim();
  j["grid"] = {{"lo", lo}, {"hi", hi}, {"n", n}};
  j["solutions"] = Json::array();
  out.csv.header = {"branch", "root", "energy", "residual", "at_boundary"};
  for (const auto& s : set.solutions) {
    j["solutions"].push_back({{"branch", s.branch},
                              {"root", s.root},
                              {"energy", s.energy},
                              {"residual", s.residual},
                              {"at_boundary", s.at_boundary},
                              {"vector", to_json(s.vector)}});
    out.csv.rows.push_back({cell(static_cast<long>(s.branch)), cell(static_cast<long>(s.root)), cell(s.energy),
                            cell(s.residual), s.at_boundary ? "true" : "false"});
  }
  j["degenerate_steps"] = Json::array();
  for (const auto& d : set.degenerate_steps)
    j["degenerate_steps"].push_back({{"z", d.z}, {"branch", d.branch}, {"cluster_size", d.cluster_size}});
  j["warnings"] = set.warnings;

  if (c.verify) {
    bool ok = true;
    double worst = 0.0;
    for (const auto& s : set.solutions) {
      const Matrix h = family.evaluate(s.energy);
      const double r = (h * s.vector - s.energy * s.vector).norm() / std::max(1.0, h.norm());
      worst = std::max(worst, r);
      ok = ok && r <= 1e-8;
    }
    j["verify"] = verify_block(ok, 1e-8);
    j["verify"]["worst_relative_residual"] = worst;
    out.verified = ok;
    if (!ok) out.verify_detail = "a fixed point fails the direct residual check";
  }
  return out;
}

// ---------------------------------------------------------------------------
// feshbach

struct FeshbachArgs {
  std::string matrix;
  std::vector<long> p;
};

Outcome run_feshbach(const FeshbachArgs& a, const Common& c) {
  Matrix H = edham::io::read_matrix(edham::io::read_file(a.matrix));
  std::vector<Index> p(a.p.begin(), a.p.end());
  const auto part = edham::make_partition(H, p);
  const auto fam = edham::make_effective(part);
  const auto spec = edham::selfconsistent_spectrum(fam);
  const auto full = edham::spectral_decompose(0.5 * (part.H + part.H.transpose()));

  // Match the fixed points against the full spectrum; eigenvalues whose
  // eigenvectors have no P-component are expected to be missing.
  const double tol = 1e-9 * std::max(1.0, fam.norm());
  const auto found = spec.energies();
  std::vector<char> used(found.size(), 0);
  Json missed = Json::array();
  bool matched = true;
  for (Index k = 0; k < full.values.size(); ++k) {
    double weight = 0.0;
    for (Index i : part.p) weight += full.vectors(i, k) * full.vectors(i, k);
    weight = std::sqrt(weight);
    std::size_t best = found.size();
    for (std::size_t i = 0; i < found.size(); ++i)
      if (!used[i] && std::abs(found[i] - full.values(k)) <= tol && (best == found.size() || std::abs(found[i] - full.values(k)) < std::abs(found[best] - full.values(k))))
        best = i;
    if (best < found.size()) {
      used[best] = 1;
    } else {
      missed.push_back({{"E", full.values(k)}, {"p_weight", weight}});
      if (weight >= 1e-6) matched = false;
    }
  }
  if (std::any_of(used.begin(), used.end(), [](char u) { return !u; })) matched = false;

  Outcome out;
  Json& j = out.json;
  j["poles"] = to_json(spec.poles);
  j["fixed_points"] = to_json(found);
  j["full_spectrum"] = to_json(full.values);
  j["matched"] = matched;
  j["missed"] = missed;
  j["intervals"] = Json::array();
  for (const auto& r : spec.intervals)
    j["intervals"].push_back({{"lo", r.interval.lo}, {"hi", r.interval.hi}, {"expected", r.expected},
                              {"found", r.found}, {"fallback", r.fallback}});
  j["warnings"] = spec.warnings;
  out.csv.header = {"E", "residual"};
  for (const auto& s : spec.fixed_points) out.csv.rows.push_back({cell(s.energy), cell(s.residual)});

  if (c.verify) {
    bool ok = matched;
    double worst = 0.0;
    Json rows = Json::array();
    for (const auto& s : spec.fixed_points) {
      const auto v = edham::reconstruct_full(part, fam, s.energy, s.vector);
      worst = std::max(worst, v.residual);
      rows.push_back({{"E", s.energy}, {"residual", v.residual}});
    }
    ok = ok && worst <= 1e-8 * std::max(1.0, fam.norm());
    j["verify"] = verify_block(ok, 1e-8);
    j["verify"]["reconstruction"] = rows;
    out.verified = ok;
    if (!ok) out.verify_detail = matched ? "reconstructed eigenvector residual too large" : "fixed points do not match the spectrum";
  }
  return out;
}

// ---------------------------------------------------------------------------
// toy

struct ToyArgs {
  double A = 1.0;
  double E0 = 0.0;
  std::vector<double> window;  // closed-form listing, in formula units
  std::vector<double> solver_window;
  int levels = 8;
  int grid = 400;
  bool half_line = false;
  bool constant_mass = false;
};

Outcome run_toy(const ToyArgs& a, const Common& c) {
  const edham::ToyModel model{a.A, a.E0};
  edham::validate(model);
  double lo = a.E0;
  double hi = a.E0 + 20.0;
  if (!a.window.empty()) {
    if (a.window.size() != 2 || !(a.window[1] > a.window[0])) throw edham::InputError("--window: expected lo,hi with lo < hi");
    lo = a.window[0];
    hi = a.window[1];
  }
  Outcome out;
  Json& j = out.json;
  j["model"] = {{"A", a.A}, {"E0", a.E0}};
  j["window"] = {lo, hi};
  j["plus"] = Json::array();
  struct Row {
    std::string branch;
    int n;
    double e;
  };
  std::vector<Row> rows;
  for (int n = 0; n < 100000; ++n) {
    const double e = edham::spectrum_plus(n, model);
    if (e > hi) break;
    if (e < lo) continue;
    j["plus"].push_back({{"n", n}, {"E", e}});
    rows.push_back({"plus", n, e});
  }
  const int n_max = edham::minus_branch_nmax(model);
  j["n_max"] = n_max;
  j["minus"] = Json::array();
  for (const auto& p : edham::spectrum_minus(model)) {
    j["minus"].push_back({{"n", p.n}, {"lower", p.lower}, {"upper", p.upper}});
    rows.push_back({"minus_lower", p.n, p.lower});
    rows.push_back({"minus_upper", p.n, p.upper});
  }

  std::map<std::pair<std::string, int>, double> solver;
  if (c.verify) {
    edham::ToyCrosscheckOptions opts;
    opts.levels = a.levels;
    opts.grid_points = a.grid;
    opts.half_line = a.half_line;
    opts.constant_mass = a.constant_mass;
    if (!a.solver_window.empty()) {
      if (a.solver_window.size() != 2 || !(a.solver_window[1] > a.solver_window[0]))
        throw edham::InputError("--solver-window: expected lo,hi with lo < hi");
      opts.window = edham::Interval{a.solver_window[0], a.solver_window[1]};
    }
    const auto cc = edham::crosscheck_fixed_point(model, opts);
    Json v;
    v["rows"] = Json::array();
    for (const auto& r : cc.rows) {
      Json row{{"branch", r.branch}, {"n", r.n}, {"solver", r.solver}, {"solver_coarse", r.solver_coarse},
               {"solver_fine", r.solver_fine}};
      row["formula"] = r.formula ? Json(*r.formula) : Json(nullptr);
      v["rows"].push_back(row);
      solver[{r.branch, r.n}] = r.solver;
    }
    v["convention_factor"] = cc.convention_factor ? Json(*cc.convention_factor) : Json(nullptr);
    v["max_relative_misfit"] = cc.max_relative_misfit;
    v["plus_found"] = cc.plus_found;
    v["plus_expected"] = cc.plus_expected;
    v["minus_found"] = cc.minus_found;
    v["minus_expected"] = cc.minus_expected;
    v["plus_increasing"] = cc.plus_increasing;
    v["counts_match"] = cc.counts_match;
    v["warnings"] = cc.warnings;
    const bool ok = cc.counts_match && cc.plus_increasing && cc.max_relative_misfit <= 1e-3;
    v["tolerance"] = 1e-3;
    v["ok"] = ok;
    j["verify"] = v;
    out.verified = ok;
    if (!ok) out.verify_detail = "fixed-point solver disagrees with the closed-form structure";
  }
  out.csv.header = {"branch", "n", "E_formula", "E_solver"};
  for (const auto& r : rows) {
    auto it = solver.find({r.branch, r.n});
    out.csv.rows.push_back({r.branch, cell(r.n), cell(r.e), it == solver.end() ? std::string() : cell(it->second)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// biortho-audit

struct AuditArgs {
  std::string system;
  double tol = 1e-10;
};

Outcome run_biortho_audit(const AuditArgs& a, const Common& c) {
  const Json file = edham::io::read_file(a.system);
  edham::io::require_keys(file, {"kets", "energies", "d", "family", "grid", "allow_degenerate"}, "system file");
  edham::BiorthoOptions bopts;
  if (file.contains("allow_degenerate")) {
    if (!file["allow_degenerate"].is_boolean()) throw edham::InputError("system file: allow_degenerate must be boolean");
    bopts.allow_degenerate = file["allow_degenerate"].get<bool>();
  }
  std::optional<edham::ParametricOperator> family;
  if (file.contains("family")) family = edham::io::read_family(file["family"]);
  Matrix kets;
  Vector energies;
  if (file.contains("kets")) {
    if (!file.contains("energies")) throw edham::InputError("system file: kets need energies");
    kets = edham::io::matrix_from_json(file["kets"], "kets").transpose();
    energies = edham::io::vector_from_json(file["energies"], "energies");
  } else if (family) {
    if (!file.contains("grid")) throw edham::InputError("system file: a family needs a grid [lo, hi, n]");
    const Vector g = edham::io::vector_from_json(file["grid"], "grid");
    if (g.size() != 3 || !(g(2) >= 2)) throw edham::InputError("system file: grid must be [lo, hi, n]");
    const auto set = edham::find_fixed_points_refining(*family, edham::uniform_grid(g(0), g(1), static_cast<std::size_t>(g(2))));
    if (set.solutions.empty()) throw edham::InputError("system file: the family has no fixed points on the grid");
    kets.resize(family->dim(), static_cast<Index>(set.solutions.size()));
    energies.resize(static_cast<Index>(set.solutions.size()));
    for (std::size_t i = 0; i < set.solutions.size(); ++i) {
      kets.col(static_cast<Index>(i)) = set.solutions[i].vector;
      energies(static_cast<Index>(i)) = set.solutions[i].energy;
    }
  } else {
    throw edham::InputError("system file: needs either kets + energies or family + grid");
  }
  const auto sys = edham::build_system(kets, energies, bopts);
  Vector d;
  if (file.contains("d")) d = edham::io::vector_from_json(file["d"], "d");
  const auto q = edham::build_K(sys);
  const auto metric = edham::build_metric(sys, d);
  const auto report = edham::audit(sys, q, metric);

  Outcome out;
  Json& j = out.json;
  j["dim"] = sys.dim();
  j["size"] = sys.size();
  j["system"] = to_json(sys);
  j["cholesky"] = sys.cholesky;
  Json r;
  r["biorthogonality"] = report.biorthogonality;
  r["k_eigenrelation"] = report.k_eigenrelation;
  r["completeness"] = report.completeness;
  r["pseudo_hermiticity"] = report.pseudo_hermiticity;
  r["proportionality_angle"] = report.proportionality_angle;
  r["proportionality_constant"] = report.proportionality_constant;
  r["two_form_gap"] = report.two_form_gap;
  double weak = 0.0;
  if (family && family->dim() == sys.dim()) {
    const Matrix M = edham::weak_orthogonality_residual(*family, sys);
    const double scale = std::max(1.0, sys.energies.cwiseAbs().maxCoeff());
    weak = M.cwiseAbs().maxCoeff() / scale;
    r["weak_orthogonality"] = weak;
  }
  j["residuals"] = r;
  j["proportionality_constants"] = to_json(report.constants);
  j["d"] = to_json(metric.d);
  j["K"] = to_json(q.K);
  j["eta"] = to_json(metric.eta);
  j["eta_inv"] = to_json(metric.eta_inv);
  out.csv.header = {"residual", "value"};
  for (auto it = r.begin(); it != r.end(); ++it) out.csv.rows.push_back({it.key(), cell(it.value().get<double>())});

  if (c.verify) {
    const bool ok = report.worst() <= a.tol && weak <= 1e-9;
    j["verify"] = verify_block(ok, a.tol);
    out.verified = ok;
    if (!ok) out.verify_detail = "a biorthogonal identity exceeds the tolerance";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Driver

void emit_error(const std::string& kind, const std::string& message, int code) {
  Json e;
  e["error"] = {{"kind", kind}, {"message", message}, {"exit_code", code}};
  std::cerr << edham::io::dump(e, 0) << std::endl;
}

std::string join(const Json& v) {
  if (v.is_array()) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) s += ",";
      s += join(v[i]);
    }
    return s;
  }
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_float()) return cell(v.get<double>());
  return v.dump();
}

/// Pulls "--config path" out of argv and turns the JSON object into flags of
/// the selected subcommand. Flags given on the command line win.
std::vector<std::string> expand_config(const CLI::App& app, std::vector<std::string> args) {
  std::optional<std::string> path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw edham::InputError("--config needs a path");
      path = args[i + 1];
      args.erase(args.begin() + static_cast<long>(i), args.begin() + static_cast<long>(i) + 2);
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      args.erase(args.begin() + static_cast<long>(i));
      break;
    }
  }
  if (!path) return args;
  if (args.empty() || args[0].empty() || args[0][0] == '-')
    throw edham::InputError("--config must follow a subcommand");
  const CLI::App* sub = nullptr;
  for (const auto* s : app.get_subcommands({}))
    if (s->get_name() == args[0]) sub = s;
  if (!sub) throw edham::InputError("unknown subcommand '" + args[0] + "'");
  const Json cfg = edham::io::read_file(*path);
  if (!cfg.is_object()) throw edham::InputError("config: expected a JSON object");
  std::vector<std::string> extra;
  for (auto it = cfg.begin(); it != cfg.end(); ++it) {
    const std::string flag = "--" + it.key();
    const CLI::Option* opt = sub->get_option_no_throw(flag);
    if (!opt || it.key() == "help") throw edham::InputError("config: unknown key '" + it.key() + "' for " + args[0]);
    const bool on_cli = std::any_of(args.begin() + 1, args.end(), [&](const std::string& a) {
      return a == flag || a.rfind(flag + "=", 0) == 0;
    });
    if (on_cli) continue;
    const Json& v = it.value();
    if (v.is_boolean()) {
      if (opt->get_type_size() != 0) throw edham::InputError("config: key '" + it.key() + "' is not a flag");
      if (v.get<bool>()) extra.push_back(flag);
      continue;
    }
    if (v.is_null() || v.is_object()) throw edham::InputError("config: unsupported value for '" + it.key() + "'");
    extra.push_back(flag + "=" + join(v));
  }
  args.insert(args.begin() + 1, extra.begin(), extra.end());
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Energy-dependent Hamiltonians: QES spectra, biorthogonal bases and fixed-point solvers", "edham"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "edham 0.1.0");
  app.footer(
      "Every subcommand accepts --config path.json whose keys mirror its flags.\n"
      "EDHAM_THREADS caps internal parallelism.\n"
      "Exit codes: 0 ok, 2 input error, 3 numeric error, 4 verification mismatch.");
  std::string config_path;
  app.add_option("--config", config_path, "JSON file with flag values for the subcommand");

  Common common;
  ChargesArgs charges;
  auto* c1 = app.add_subcommand("qes-charges", "Charges F_{N,j} and polynomial levels of the Coulomb QES oscillator");
  c1->add_option("--N", charges.N, "Polynomial degree")->required()->check(CLI::NonNegativeNumber);
  c1->add_option("--ell", charges.ell, "Angular momentum")->capture_default_str()->check(CLI::NonNegativeNumber);
  c1->add_option("--f", charges.f, "Slope of the linear term")->capture_default_str();
  c1->add_option("--verify-tol", charges.tol, "Oracle tolerance")->capture_default_str()->check(CLI::PositiveNumber);
  add_common(c1, common);

  SexticArgs sextic;
  auto* c2 = app.add_subcommand("qes-sextic", "Coupling A_N and energy multiplet of the sextic oscillator");
  c2->add_option("--N", sextic.N, "Polynomial degree in r^2")->required()->check(CLI::NonNegativeNumber);
  c2->add_option("--ell", sextic.ell, "Angular momentum")->capture_default_str()->check(CLI::NonNegativeNumber);
  c2->add_option("--a", sextic.a, "Quartic coupling")->capture_default_str();
  c2->add_option("--max-N", sextic.max_N, "Largest N accepted without --report")->capture_default_str();
  c2->add_flag("--report", sextic.report, "Allow N above --max-N and report residuals");
  c2->add_option("--verify-tol", sextic.tol, "Oracle tolerance")->capture_default_str()->check(CLI::PositiveNumber);
  add_common(c2, common);

  SpectrumArgs spectrum;
  auto* c3 = app.add_subcommand("spectrum", "Generic-charge spectrum from a basis of QES states");
  c3->add_option("--ell", spectrum.ell, "Angular momentum")->capture_default_str()->check(CLI::NonNegativeNumber);
  c3->add_option("--f", spectrum.f, "Slope of the linear term")->capture_default_str();
  c3->add_option("--charge", spectrum.charge, "Coulomb charge F")->required();
  c3->add_option("--nmax", spectrum.nmax, "Basis truncation N_max")->capture_default_str()->check(CLI::NonNegativeNumber);
  c3->add_option("--pick", spectrum.pick, "'auto' or j(0),...,j(N_max)")->capture_default_str();
  c3->add_option("--pick-target", spectrum.pick_target, "Charge the auto pick aims at (default: --charge)");
  c3->add_option("--levels", spectrum.levels, "Levels compared by --verify")->capture_default_str()->check(CLI::PositiveNumber);
  c3->add_option("--verify-tol", spectrum.tol, "Oracle tolerance")->capture_default_str()->check(CLI::PositiveNumber);
  add_common(c3, common);

  FixedPointArgs fixed;
  auto* c4 = app.add_subcommand("fixed-point", "Fixed points E_n(z) = z of a matrix family file");
  c4->add_option("--family", fixed.family, "Family JSON (affine or table)")->required();
  c4->add_option("--grid", fixed.grid, "lo,hi[,n] scan grid")->delimiter(',');
  c4->add_option("--levels", fixed.levels, "Track only the lowest branches")->check(CLI::PositiveNumber);
  c4->add_option("--fp-tol", fixed.fp_tol, "Root tolerance on E_n(z) - z")->capture_default_str()->check(CLI::PositiveNumber);
  add_common(c4, common);

  FeshbachArgs fesh;
  auto* c5 = app.add_subcommand("feshbach", "Effective Hamiltonian of a partitioned symmetric matrix");
  c5->add_option("--matrix", fesh.matrix, "Matrix JSON (array of rows or {\"H\": rows})")->required();
  c5->add_option("--p", fesh.p, "Coordinates spanning P, comma separated")->required()->delimiter(',');
  add_common(c5, common);

  ToyArgs toy;
  auto* c6 = app.add_subcommand("toy", "Oscillator with energy-dependent mass A^2 (E - E0)^2");
  c6->add_option("--A", toy.A, "Mass scale A > 0")->capture_default_str();
  c6->add_option("--E0", toy.E0, "Mass zero E0")->capture_default_str();
  c6->add_option("--window", toy.window, "lo,hi energy window for the plus branch")->delimiter(',');
  c6->add_option("--solver-window", toy.solver_window, "lo,hi scan window of the solver (its own units)")->delimiter(',');
  c6->add_option("--levels", toy.levels, "Branches tracked by the solver")->capture_default_str()->check(CLI::PositiveNumber);
  c6->add_option("--grid", toy.grid, "Finite-difference points (coarse grid)")->capture_default_str()->check(CLI::Range(50, 100000));
  c6->add_flag("--half-line", toy.half_line, "Pose the solver problem on [0, L]");
  c6->add_flag("--constant-mass", toy.constant_mass, "Replace m(E) by 1");
  add_common(c6, common);

  AuditArgs audit;
  auto* c7 = app.add_subcommand("biortho-audit", "Dual basis, K, metric and residual report for a system file");
  c7->add_option("--system", audit.system, "System JSON (kets + energies, or family + grid)")->required();
  c7->add_option("--verify-tol", audit.tol, "Residual tolerance")->capture_default_str()->check(CLI::PositiveNumber);
  add_common(c7, common);

  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    edham::thread_count();
    args = expand_config(app, std::move(args));
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    emit_error("usage", e.what(), kExitInput);
    return kExitInput;
  } catch (const edham::Error& e) {
    emit_error(e.kind(), e.what(), kExitInput);
    return kExitInput;
  }

  try {
    Outcome out;
    if (c1->parsed())
      out = run_qes_charges(charges, common);
    else if (c2->parsed())
      out = run_qes_sextic(sextic, common);
    else if (c3->parsed())
      out = run_spectrum(spectrum, common);
    else if (c4->parsed())
      out = run_fixed_point(fixed, common);
    else if (c5->parsed())
      out = run_feshbach(fesh, common);
    else if (c6->parsed())
      out = run_toy(toy, common);
    else
      out = run_biortho_audit(audit, common);

    if (common.format == "csv")
      std::cout << render_csv(out.csv);
    else
      std::cout << edham::io::dump(out.json) << '\n';
    std::cout.flush();
    if (out.verified && !*out.verified) {
      emit_error("verify_mismatch", out.verify_detail, kExitVerify);
      return kExitVerify;
    }
    return 0;
  } catch (const edham::InputError& e) {
    emit_error(e.kind(), e.what(), kExitInput);
    return kExitInput;
  } catch (const edham::Error& e) {
    emit_error(e.kind(), e.what(), kExitNumeric);
    return kExitNumeric;
  } catch (const nlohmann::json::exception& e) {
    emit_error("input", e.what(), kExitInput);
    return kExitInput;
  } catch (const std::exception& e) {
    emit_error("numeric", e.what(), kExitNumeric);
    return kExitNumeric;
  }
}
