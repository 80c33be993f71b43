#include "logcave/json_io.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "logcave/error.hpp"

namespace logcave {
namespace {

[[noreturn]] void bad(const std::string& field, const std::string& why) {
  throw Error(ErrorCode::kInvalidInput, "field '" + field + "': " + why);
}

const Json& need(const Json& j, const std::string& key, const std::string& where) {
  if (!j.is_object()) bad(where, "expected an object");
  if (!j.contains(key)) bad(where.empty() ? key : where + "." + key, "missing");
  return j.at(key);
}

std::vector<double> numbers(const Json& j, const std::string& field) {
  if (!j.is_array()) bad(field, "expected an array of numbers");
  std::vector<double> out;
  for (const auto& v : j) {
    if (!v.is_number()) bad(field, "expected an array of numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

void arity(const std::vector<double>& p, std::size_t lo, std::size_t hi, const std::string& field) {
  if (p.size() < lo || p.size() > hi) {
    bad(field, "expected " + std::to_string(lo) + (lo == hi ? "" : "-" + std::to_string(hi)) + " parameters, got " +
                   std::to_string(p.size()));
  }
}

AnalyticDensity parse_density(const Json& j, const std::string& where) {
  const std::string fam_field = where.empty() ? "family" : where + ".family";
  const Json& fam = need(j, "family", where);
  if (!fam.is_string()) bad(fam_field, "expected a string");
  Family family;
  try {
    family = family_from_name(fam.get<std::string>());
  } catch (const Error&) {
    bad(fam_field, "unknown family '" + fam.get<std::string>() + "'");
  }
  const std::string pf = where.empty() ? "params" : where + ".params";
  if (family == Family::kMixture || family == Family::kProduct) {
    const std::string cf = where.empty() ? "components" : where + ".components";
    const Json& comps = need(j, "components", where);
    if (!comps.is_array() || comps.empty()) bad(cf, "expected a nonempty array");
    std::vector<AnalyticDensity> parts;
    std::vector<double> weights;
    for (std::size_t i = 0; i < comps.size(); ++i) {
      const std::string at = cf + "[" + std::to_string(i) + "]";
      parts.push_back(parse_density(comps[i], at));
      if (family == Family::kMixture) {
        const Json& w = need(comps[i], "weight", at);
        if (!w.is_number()) bad(at + ".weight", "expected a number");
        weights.push_back(w.get<double>());
      }
    }
    if (family == Family::kProduct) {
      if (parts.size() != 2) bad(cf, "product needs exactly two components");
      return AnalyticDensity::product(parts[0], parts[1]);
    }
    return AnalyticDensity::mixture(weights, parts);
  }
  const std::vector<double> p = numbers(need(j, "params", where), pf);
  switch (family) {
    case Family::kNormal: arity(p, 2, 2, pf); return AnalyticDensity::normal(p[0], p[1]);
    case Family::kLaplace: arity(p, 2, 2, pf); return AnalyticDensity::laplace(p[0], p[1]);
    case Family::kGamma: arity(p, 2, 2, pf); return AnalyticDensity::gamma(p[0], p[1]);
    case Family::kBeta: arity(p, 2, 2, pf); return AnalyticDensity::beta(p[0], p[1]);
    case Family::kLogistic: arity(p, 2, 2, pf); return AnalyticDensity::logistic(p[0], p[1]);
    case Family::kGumbel: arity(p, 2, 2, pf); return AnalyticDensity::gumbel(p[0], p[1]);
    case Family::kUniform: arity(p, 2, 2, pf); return AnalyticDensity::uniform(p[0], p[1]);
    case Family::kStudentT:
      arity(p, 1, 3, pf);
      return AnalyticDensity::student_t(p[0], p.size() > 1 ? p[1] : 0.0, p.size() > 2 ? p[2] : 1.0);
    case Family::kNormal2: arity(p, 5, 5, pf); return AnalyticDensity::normal2({p[0], p[1]}, p[2], p[3], p[4]);
    default: break;
  }
  bad(fam_field, "unsupported family");
}

}  // namespace

Json tent_to_json(const TentFunction& t) {
  Json j;
  j["dim"] = t.dim();
  if (t.dim() == 1) {
    j["knots"] = t.knots_1d();
    j["triangulation"] = Json::array();
  } else {
    Json knots = Json::array();
    for (const auto& p : t.knots_2d()) knots.push_back({p[0], p[1]});
    j["knots"] = knots;
    Json tris = Json::array();
    for (const auto& tri : t.triangles()) tris.push_back({tri[0], tri[1], tri[2]});
    j["triangulation"] = tris;
  }
  j["values"] = t.values();
  return j;
}

TentFunction tent_from_json(const Json& j) {
  const Json& dim = need(j, "dim", "");
  if (!dim.is_number_integer() || (dim.get<int>() != 1 && dim.get<int>() != 2)) bad("dim", "expected 1 or 2");
  const std::vector<double> values = numbers(need(j, "values", ""), "values");
  const Json& knots = need(j, "knots", "");
  if (dim.get<int>() == 1) {
    std::vector<double> xs = numbers(knots, "knots");
    if (xs.size() != values.size()) bad("values", "expected one value per knot");
    return TentFunction::make_1d(std::move(xs), values);
  }
  if (!knots.is_array()) bad("knots", "expected an array of [x, y] pairs");
  std::vector<Point2> ps;
  for (const auto& k : knots) {
    const auto xy = numbers(k, "knots");
    if (xy.size() != 2) bad("knots", "expected [x, y] pairs");
    ps.push_back({xy[0], xy[1]});
  }
  if (ps.size() != values.size()) bad("values", "expected one value per knot");
  const Json& tri = need(j, "triangulation", "");
  if (!tri.is_array()) bad("triangulation", "expected an array of index triples");
  std::vector<Triangle> tris;
  for (const auto& t : tri) {
    if (!t.is_array() || t.size() != 3) bad("triangulation", "expected index triples");
    Triangle out;
    for (int k = 0; k < 3; ++k) {
      if (!t[k].is_number_integer() || t[k].get<long>() < 0 || t[k].get<std::size_t>() >= ps.size()) {
        bad("triangulation", "index out of range");
      }
      out[k] = t[k].get<int>();
    }
    tris.push_back(out);
  }
  return TentFunction::make_2d(std::move(ps), values, std::move(tris));
}

Json density_to_json(const AnalyticDensity& f) {
  Json j;
  j["family"] = family_name(f.family());
  if (f.family() == Family::kMixture || f.family() == Family::kProduct) {
    Json comps = Json::array();
    for (std::size_t i = 0; i < f.parts().size(); ++i) {
      Json c = density_to_json(f.parts()[i]);
      if (f.family() == Family::kMixture) c["weight"] = f.weights()[i];
      comps.push_back(c);
    }
    j["components"] = comps;
  } else {
    j["params"] = f.params();
  }
  return j;
}

AnalyticDensity density_from_json(const Json& j) { return parse_density(j, ""); }

DensityLike density_like_from_json(const Json& j) {
  if (j.is_object() && j.contains("knots")) return tent_from_json(j);
  return density_from_json(j);
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kInvalidInput, "cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::kInvalidInput, "'" + path + "' is not valid JSON: " + e.what());
  }
}

void write_text_atomic(const std::string& path, const std::string& text) {
  const std::filesystem::path target(path);
  if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
  const std::filesystem::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(ErrorCode::kInvalidInput, "cannot write '" + tmp.string() + "'");
    out << text;
    if (!out) throw Error(ErrorCode::kInvalidInput, "write to '" + tmp.string() + "' failed");
  }
  std::filesystem::rename(tmp, target);
}

}  // namespace logcave
