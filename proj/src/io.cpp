#include "latmpc/io.hpp"

#include <cmath>
#include <fstream>
#include <limits>

namespace latmpc {

using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double bound_value(const json& v, double unbounded) {
  if (v.is_null()) return unbounded;
  return v.get<double>();
}

Vector bounds_from_json(const json& j, const char* key, int n, double unbounded) {
  Vector out = Vector::Constant(n, unbounded);
  if (!j.contains(key) || j[key].is_null()) return out;
  const json& v = j[key];
  if (v.is_number()) return Vector::Constant(n, v.get<double>());
  if (!v.is_array() || static_cast<int>(v.size()) != n) {
    throw InvalidInput(std::string("problem field '") + key + "' must have one entry per component");
  }
  for (int i = 0; i < n; ++i) out[i] = bound_value(v[i], unbounded);
  return out;
}

json bounds_to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::isfinite(v[i])) {
      out.push_back(v[i]);
    } else {
      out.push_back(nullptr);
    }
  }
  return out;
}

json box_to_json(const Box& b) { return {{"lo", vector_to_json(b.lo)}, {"hi", vector_to_json(b.hi)}}; }

Box box_from_json(const json& j) { return Box(vector_from_json(j.at("lo")), vector_from_json(j.at("hi"))); }

json law_to_json(const AffineLaw& l, bool with_full) {
  json o = {{"a", vector_to_json(l.a)}, {"b", l.b}, {"active_set", l.origin_active_set}};
  if (with_full && l.full_K) {
    o["K"] = matrix_to_json(*l.full_K);
    o["k"] = vector_to_json(l.k);
  }
  return o;
}

AffineLaw law_from_json(const json& j) {
  AffineLaw l;
  l.a = vector_from_json(j.at("a"));
  l.b = j.at("b").get<double>();
  if (j.contains("active_set")) l.origin_active_set = j["active_set"].get<IndexList>();
  if (j.contains("K")) {
    l.full_K = matrix_from_json(j["K"]);
    l.k = vector_from_json(j.at("k"));
  }
  return l;
}

}  // namespace

Matrix matrix_from_json(const json& j) {
  if (j.is_number()) return Matrix::Constant(1, 1, j.get<double>());
  if (!j.is_array() || j.empty()) throw InvalidInput("matrix must be a non-empty array of rows");
  if (!j[0].is_array()) {
    // a flat array is a column
    Matrix M(j.size(), 1);
    for (std::size_t i = 0; i < j.size(); ++i) M(i, 0) = j[i].get<double>();
    return M;
  }
  const std::size_t rows = j.size();
  const std::size_t cols = j[0].size();
  Matrix M(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols) throw InvalidInput("matrix rows differ in length");
    for (std::size_t c = 0; c < cols; ++c) M(r, c) = j[r][c].get<double>();
  }
  return M;
}

json matrix_to_json(const Matrix& M) {
  json out = json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

Vector vector_from_json(const json& j) {
  if (j.is_number()) return Vector::Constant(1, j.get<double>());
  if (!j.is_array()) throw InvalidInput("vector must be an array");
  Vector v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v[i] = j[i].get<double>();
  return v;
}

json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

ProblemSpec problem_from_json(const json& j) {
  ProblemSpec spec;
  spec.name = j.value("name", std::string());
  MpcProblem& p = spec.problem;
  if (j.contains("Ts") && !j["Ts"].is_null()) spec.Ts = j["Ts"].get<double>();
  if (j.contains("continuous") && !j["continuous"].is_null()) {
    if (!spec.Ts) throw InvalidInput("continuous model requires Ts");
    const json& c = j["continuous"];
    const StateSpaceModel d = discretize_zoh(matrix_from_json(c.at("A_c")), matrix_from_json(c.at("B_c")), *spec.Ts);
    p.A = d.A;
    p.B = d.B;
  } else {
    p.A = matrix_from_json(j.at("A"));
    p.B = matrix_from_json(j.at("B"));
  }
  const int nx = static_cast<int>(p.A.rows());
  const int nu = static_cast<int>(p.B.cols());
  p.Q = matrix_from_json(j.at("Q"));
  p.R = matrix_from_json(j.at("R"));
  p.horizon = j.at("N_p").get<int>();
  p.x_min = bounds_from_json(j, "x_min", nx, -kInf);
  p.x_max = bounds_from_json(j, "x_max", nx, kInf);
  p.u_min = bounds_from_json(j, "u_min", nu, -kInf);
  p.u_max = bounds_from_json(j, "u_max", nu, kInf);
  p.terminal_state_box = j.value("terminal_state_box", true);
  if (j.contains("extra_rows")) {
    for (const auto& r : j["extra_rows"]) {
      p.extra_rows.push_back({vector_from_json(r.at("c_x")), vector_from_json(r.at("c_u")), r.at("d").get<double>()});
    }
  }
  const json& P = j.contains("P") ? j["P"] : json("dare");
  if (P.is_string()) {
    if (P.get<std::string>() != "dare") throw InvalidInput("P must be \"dare\" or a matrix");
    p.P = Matrix::Zero(nx, nx);  // placeholder so Q and R are checked before the Riccati solve
    p.validate();
    p.P = solve_dare(p.A, p.B, p.Q, p.R);
  } else {
    p.P = matrix_from_json(P);
  }
  p.validate();
  if (j.contains("domain")) {
    spec.domain = box_from_json(j["domain"]);
  } else {
    spec.domain = Box(p.x_min, p.x_max);
  }
  if (spec.domain.dim() != nx) throw InvalidInput("domain dimension mismatch");
  return spec;
}

json problem_to_json(const ProblemSpec& spec) {
  const MpcProblem& p = spec.problem;
  json j = {{"A", matrix_to_json(p.A)},         {"B", matrix_to_json(p.B)},
            {"Q", matrix_to_json(p.Q)},         {"R", matrix_to_json(p.R)},
            {"P", matrix_to_json(p.P)},         {"N_p", p.horizon},
            {"x_min", bounds_to_json(p.x_min)}, {"x_max", bounds_to_json(p.x_max)},
            {"u_min", bounds_to_json(p.u_min)}, {"u_max", bounds_to_json(p.u_max)},
            {"domain", box_to_json(spec.domain)}, {"terminal_state_box", p.terminal_state_box}};
  if (!spec.name.empty()) j["name"] = spec.name;
  if (spec.Ts) j["Ts"] = *spec.Ts;
  if (!p.extra_rows.empty()) {
    json rows = json::array();
    for (const auto& r : p.extra_rows) {
      rows.push_back({{"c_x", vector_to_json(r.c_x)}, {"c_u", vector_to_json(r.c_u)}, {"d", r.d}});
    }
    j["extra_rows"] = rows;
  }
  return j;
}

json dataset_to_json(const SampleDataset& ds) {
  json points = json::array();
  for (const auto& p : ds.points) {
    points.push_back({{"x", vector_to_json(p.x)}, {"law", p.law_index}, {"u", p.u_value}, {"source", to_string(p.source)}});
  }
  json literals = json::array();
  for (const auto& l : ds.literals) literals.push_back(law_to_json(l, true));
  json skipped = json::array();
  for (const auto& s : ds.stats.skipped) skipped.push_back({{"x", vector_to_json(s.x)}, {"reason", s.reason}});
  return {{"domain", box_to_json(ds.domain)},
          {"points", points},
          {"literals", literals},
          {"stats",
           {{"raw_points", ds.stats.raw_points},
            {"infeasible", ds.stats.infeasible},
            {"perturbed", ds.stats.perturbed},
            {"resampled_initial", ds.stats.resampled_initial},
            {"skipped", skipped}}}};
}

SampleDataset dataset_from_json(const json& j) {
  SampleDataset ds;
  ds.domain = box_from_json(j.at("domain"));
  for (const auto& l : j.at("literals")) ds.literals.push_back(law_from_json(l));
  for (const auto& p : j.at("points")) {
    SamplePoint pt;
    pt.x = vector_from_json(p.at("x"));
    pt.law_index = p.at("law").get<int>();
    pt.u_value = p.at("u").get<double>();
    pt.source = sample_source_from_string(p.value("source", std::string("grid")));
    if (pt.law_index < 0 || pt.law_index >= static_cast<int>(ds.literals.size())) {
      throw InvalidInput("dataset point references a missing literal");
    }
    ds.points.push_back(std::move(pt));
  }
  if (j.contains("stats")) {
    const json& s = j["stats"];
    ds.stats.raw_points = s.value("raw_points", 0);
    ds.stats.infeasible = s.value("infeasible", 0);
    ds.stats.perturbed = s.value("perturbed", 0);
    ds.stats.resampled_initial = s.value("resampled_initial", 0);
    if (s.contains("skipped")) {
      for (const auto& k : s["skipped"]) ds.stats.skipped.push_back({vector_from_json(k.at("x")), k.value("reason", "")});
    }
  }
  return ds;
}

json lattice_to_json(const LatticeForm& form) {
  json literals = json::array();
  for (const auto& l : form.literals()) literals.push_back(law_to_json(l, false));
  return {{"kind", to_string(form.kind())},
          {"n_x", form.n_x()},
          {"literals", literals},
          {"terms", form.terms()},
          {"anchors", form.anchors()}};
}

LatticeForm lattice_from_json(const json& j) {
  std::vector<AffineLaw> literals;
  for (const auto& l : j.at("literals")) literals.push_back(law_from_json(l));
  std::vector<int> anchors;
  if (j.contains("anchors")) anchors = j["anchors"].get<std::vector<int>>();
  return LatticeForm(lattice_kind_from_string(j.at("kind").get<std::string>()), std::move(literals),
                     j.at("terms").get<std::vector<IndexList>>(), std::move(anchors));
}

json to_json(const LpScanReport& r) {
  json w = json::array();
  for (const auto& x : r.witnesses) {
    w.push_back({{"x", vector_to_json(x.x)},
                 {"term_c", x.term_c},
                 {"term_d", x.term_d},
                 {"owner_c", x.owner_c},
                 {"owner_d", x.owner_d},
                 {"objective", x.objective}});
  }
  return {{"pairs_checked", r.pairs_checked}, {"min_objective", r.min_objective}, {"witnesses", w}};
}

json to_json(const ValidationReport& r) {
  json m = json::array();
  for (const auto& x : r.mismatches) m.push_back({{"x", vector_to_json(x.x)}, {"f_d", x.f_d}, {"f_c", x.f_c}});
  return {{"N_v", r.N_v},
          {"epsilon", r.epsilon},
          {"I_bar", r.I_bar},
          {"confidence", r.confidence},
          {"mismatch_count", r.mismatch_count},
          {"ordering_violations", r.ordering_violations},
          {"seed", r.seed},
          {"mismatches", m}};
}

json to_json(const SandwichReport& r) {
  return {{"checked", r.checked},
          {"infeasible_skipped", r.infeasible_skipped},
          {"max_lower_violation", r.max_lower_violation},
          {"max_upper_violation", r.max_upper_violation},
          {"epsilon_hat", r.epsilon_hat},
          {"max_abs_error", r.max_abs_error}};
}

json to_json(const StorageStats& s) {
  return {{"M", s.M}, {"N_terms", s.N_terms}, {"reals", s.reals}, {"integers", s.integers}, {"total_params", s.total_params}};
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InvalidInput("cannot parse '" + path + "': " + e.what());
  }
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write '" + path + "'");
  out << j.dump(1) << '\n';
}

}  // namespace latmpc
