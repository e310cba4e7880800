#pragma once

// JSON input/output. Output is canonical: keys in insertion order, doubles
// with 17 significant digits, non-finite values as the strings "inf", "-inf"
// and "nan".

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "edham/biortho.hpp"
#include "edham/core_spectral.hpp"
#include "edham/errors.hpp"
#include "edham/linalg.hpp"

namespace edham::io {

using Json = nlohmann::ordered_json;

inline std::string format_double(double x) {
  if (std::isnan(x)) return "\"nan\"";
  if (std::isinf(x)) return x > 0 ? "\"inf\"" : "\"-inf\"";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  std::string s(buf);
  if (s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

namespace detail {

inline void write(std::ostringstream& os, const Json& j, int indent, int depth) {
  const std::string pad = indent > 0 ? std::string(static_cast<std::size_t>(indent * (depth + 1)), ' ') : "";
  const std::string close = indent > 0 ? std::string(static_cast<std::size_t>(indent * depth), ' ') : "";
  const char* nl = indent > 0 ? "\n" : "";
  const char* sep = indent > 0 ? ": " : ":";
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        os << "{}";
        return;
      }
      os << '{' << nl;
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) os << ',' << nl;
        first = false;
        os << pad << Json(it.key()).dump() << sep;
        write(os, it.value(), indent, depth + 1);
      }
      os << nl << close << '}';
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        os << "[]";
        return;
      }
      // Arrays of scalars stay on one line.
      const bool flat = std::all_of(j.begin(), j.end(), [](const Json& e) { return !e.is_structured(); });
      if (flat || indent == 0) {
        os << '[';
        for (std::size_t i = 0; i < j.size(); ++i) {
          if (i) os << (indent > 0 ? ", " : ",");
          write(os, j[i], flat ? 0 : indent, depth + 1);
        }
        os << ']';
        return;
      }
      os << '[' << nl;
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) os << ',' << nl;
        os << pad;
        write(os, j[i], indent, depth + 1);
      }
      os << nl << close << ']';
      return;
    }
    case Json::value_t::number_float:
      os << format_double(j.get<double>());
      return;
    default:
      os << j.dump();
  }
}

}  // namespace detail

inline std::string dump(const Json& j, int indent = 2) {
  std::ostringstream os;
  detail::write(os, j, indent, 0);
  return os.str();
}

inline Json to_json(const Vector& v) {
  Json a = Json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline Json to_json(const std::vector<double>& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(x);
  return a;
}

/// Row-major nested arrays.
inline Json to_json(const Matrix& m) {
  Json a = Json::array();
  for (Index i = 0; i < m.rows(); ++i) a.push_back(to_json(Vector(m.row(i).transpose())));
  return a;
}

/// Rejects keys outside `allowed`.
inline void require_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw InputError(where + ": expected a JSON object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!ok.count(it.key())) throw InputError(where + ": unknown key '" + it.key() + "'");
}

inline double number(const Json& j, const std::string& where) {
  if (!j.is_number()) throw InputError(where + ": expected a number");
  const double x = j.get<double>();
  if (!std::isfinite(x)) throw InputError(where + ": non-finite number");
  return x;
}

inline Vector vector_from_json(const Json& j, const std::string& where) {
  if (!j.is_array()) throw InputError(where + ": expected an array of numbers");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i)
    v(static_cast<Index>(i)) = number(j[i], where + "[" + std::to_string(i) + "]");
  return v;
}

inline Matrix matrix_from_json(const Json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw InputError(where + ": expected a non-empty array of rows");
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  if (cols == 0) throw InputError(where + ": rows must be non-empty arrays");
  Matrix m(static_cast<Index>(j.size()), static_cast<Index>(cols));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || j[i].size() != cols) throw InputError(where + ": ragged matrix");
    m.row(static_cast<Index>(i)) = vector_from_json(j[i], where).transpose();
  }
  return m;
}

inline Json read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError("'" + path + "' is not valid JSON: " + e.what());
  }
}

/// A matrix file is either a bare array of rows or {"H": rows}.
inline Matrix read_matrix(const Json& j) {
  if (j.is_array()) return matrix_from_json(j, "matrix");
  require_keys(j, {"H"}, "matrix file");
  if (!j.contains("H")) throw InputError("matrix file: missing 'H'");
  return matrix_from_json(j["H"], "matrix file H");
}

/// Parametric families:
///   {"type": "affine", "H0": rows, "H1": rows, "domain": [lo, hi]}
///   {"type": "table", "z": [...], "matrices": [rows, ...]}
inline ParametricOperator read_family(const Json& j) {
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string())
    throw InputError("family: expected an object with a string 'type'");
  const auto type = j["type"].get<std::string>();
  if (type == "affine") {
    require_keys(j, {"type", "H0", "H1", "domain"}, "affine family");
    if (!j.contains("H0") || !j.contains("H1")) throw InputError("affine family: needs H0 and H1");
    Interval dom;
    if (j.contains("domain")) {
      const Vector d = vector_from_json(j["domain"], "affine family domain");
      if (d.size() != 2 || !(d(1) > d(0))) throw InputError("affine family: domain must be [lo, hi] with lo < hi");
      dom = {d(0), d(1)};
    }
    return ParametricOperator::affine(matrix_from_json(j["H0"], "H0"), matrix_from_json(j["H1"], "H1"), dom);
  }
  if (type == "table") {
    require_keys(j, {"type", "z", "matrices"}, "table family");
    if (!j.contains("z") || !j.contains("matrices") || !j["matrices"].is_array())
      throw InputError("table family: needs z and matrices");
    const Vector z = vector_from_json(j["z"], "table z");
    std::vector<Matrix> mats;
    for (std::size_t i = 0; i < j["matrices"].size(); ++i)
      mats.push_back(matrix_from_json(j["matrices"][i], "table matrix " + std::to_string(i)));
    return ParametricOperator::table(std::vector<double>(z.data(), z.data() + z.size()), std::move(mats));
  }
  throw InputError("family: unknown type '" + type + "'");
}

inline Json to_json(const BiorthoSystem& sys) {
  Json j;
  j["energies"] = to_json(sys.energies);
  j["kets"] = to_json(Matrix(sys.kets.transpose()));
  j["R"] = to_json(sys.R);
  j["cond_R"] = sys.cond_R;
  return j;
}

}  // namespace edham::io
