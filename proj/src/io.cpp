#include "dualdg/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace dualdg::io {

namespace {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.16e", v);
  return buf;
}

std::string format_json_double(double v) {
  // JSON has no NaN/Inf; those become null.
  if (!std::isfinite(v)) return "null";
  return format_double(v);
}

bool is_flat(const json& v) {
  for (const auto& e : v) {
    if (e.is_structured()) return false;
  }
  return true;
}

void emit(std::string& out, const json& v, int depth) {
  const std::string pad(2 * (depth + 1), ' ');
  const std::string close_pad(2 * depth, ' ');
  switch (v.type()) {
    case json::value_t::object: {
      if (v.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = v.begin(); it != v.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        out += pad + json(it.key()).dump() + ": ";
        emit(out, it.value(), depth + 1);
      }
      out += "\n" + close_pad + "}";
      return;
    }
    case json::value_t::array: {
      if (v.empty()) {
        out += "[]";
        return;
      }
      if (is_flat(v)) {
        out += "[";
        for (std::size_t k = 0; k < v.size(); ++k) {
          if (k) out += ", ";
          emit(out, v[k], depth + 1);
        }
        out += "]";
        return;
      }
      out += "[\n";
      for (std::size_t k = 0; k < v.size(); ++k) {
        if (k) out += ",\n";
        out += pad;
        emit(out, v[k], depth + 1);
      }
      out += "\n" + close_pad + "]";
      return;
    }
    case json::value_t::number_float:
      out += format_json_double(v.get<double>());
      return;
    default:
      out += v.dump();
  }
}

json vec_json(const Vec<double>& v) {
  json a = json::array();
  for (Index k = 0; k < v.size(); ++k) a.push_back(v(k));
  return a;
}

json mat_json(const Mat<double>& m) {
  json a = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) a.push_back(m(r, c));
  }
  return a;
}

const json& field(const json& doc, const char* key) {
  if (!doc.is_object() || !doc.contains(key)) throw FormatError(std::string("missing field '") + key + "'");
  return doc.at(key);
}

Vec<double> vec_from(const json& a, const char* what) {
  if (!a.is_array()) throw FormatError(std::string(what) + ": expected an array");
  Vec<double> v(static_cast<Index>(a.size()));
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a[k].is_null()) {
      v(static_cast<Index>(k)) = std::numeric_limits<double>::quiet_NaN();
    } else if (a[k].is_number()) {
      v(static_cast<Index>(k)) = a[k].get<double>();
    } else {
      throw FormatError(std::string(what) + ": expected numbers");
    }
  }
  return v;
}

Mat<double> mat_from(const json& a, Index rows, Index cols, const char* what) {
  const Vec<double> flat = vec_from(a, what);
  if (flat.size() != rows * cols) {
    throw FormatError(std::string(what) + ": has " + std::to_string(flat.size()) + " entries, expected " +
                      std::to_string(rows) + "x" + std::to_string(cols));
  }
  Mat<double> m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) m(r, c) = flat(r * cols + c);
  }
  return m;
}

std::vector<Index> index_list(const json& a, const char* what) {
  if (!a.is_array()) throw FormatError(std::string(what) + ": expected an array");
  std::vector<Index> out;
  for (const auto& e : a) {
    if (!e.is_number_integer()) throw FormatError(std::string(what) + ": expected integers");
    out.push_back(e.get<Index>());
  }
  return out;
}

json blocks_json(const BlockProblem<double>& problem, bool equality) {
  json list = json::array();
  const BipartiteGraph& gr = problem.graph();
  for (Index e = 0; e < gr.num_edges(); ++e) {
    const Edge& ed = gr.edges()[e];
    const Mat<double>& m = equality ? problem.block(e).A : problem.block(e).C;
    if (m.size() == 0) continue;
    list.push_back({{"j", ed.j}, {"i", ed.i}, {"rows", m.rows()}, {"cols", m.cols()}, {"data", mat_json(m)}});
  }
  return list;
}

}  // namespace

std::string dump(const json& value) {
  std::string out;
  emit(out, value, 0);
  out += "\n";
  return out;
}

std::uint64_t content_hash(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path);
  out << text;
}

json problem_to_json(const BlockProblem<double>& problem) {
  const BipartiteGraph& gr = problem.graph();
  json edges = json::array();
  for (const Edge& e : gr.edges()) edges.push_back(json::array({e.j, e.i}));
  json doc;
  doc["graph"] = {{"M", gr.num_primal()}, {"M_bar", gr.num_dual()}, {"E", edges},
                  {"n", gr.n_sizes()},    {"p", gr.p_sizes()},       {"q", gr.q_sizes()}};
  json objectives = json::array();
  for (const auto& obj : problem.objectives()) {
    objectives.push_back({{"Q", mat_json(obj.Q())}, {"q", vec_json(obj.q())}, {"gamma", obj.gamma()},
                          {"a", vec_json(obj.a())}});
  }
  doc["objectives"] = objectives;
  doc["A_blocks"] = blocks_json(problem, true);
  doc["C_blocks"] = blocks_json(problem, false);
  doc["b"] = vec_json(problem.b());
  doc["c"] = vec_json(problem.c());
  if (problem.strict_point()) doc["strict_point"] = vec_json(*problem.strict_point());
  if (problem.seed) doc["seed"] = *problem.seed;
  return doc;
}

BlockProblem<double> problem_from_json(const json& doc) {
  const json& g = field(doc, "graph");
  const Index M = field(g, "M").get<Index>();
  const Index M_bar = field(g, "M_bar").get<Index>();
  std::vector<Edge> edges;
  for (const auto& e : field(g, "E")) {
    if (!e.is_array() || e.size() != 2) throw FormatError("graph.E: expected [j, i] pairs");
    edges.push_back({e[0].get<Index>(), e[1].get<Index>()});
  }
  BipartiteGraph graph(M, M_bar, edges, index_list(field(g, "n"), "graph.n"), index_list(field(g, "p"), "graph.p"),
                       index_list(field(g, "q"), "graph.q"));

  std::vector<BlockObjective<double>> objectives;
  const json& objs = field(doc, "objectives");
  if (static_cast<Index>(objs.size()) != M) throw FormatError("objectives: expected one entry per primal block");
  for (Index i = 0; i < M; ++i) {
    const json& o = objs[i];
    const Index n = graph.n(i);
    Vec<double> a = o.contains("a") ? vec_from(o.at("a"), "objective.a") : Vec<double>::Zero(n);
    const double gamma = o.contains("gamma") ? o.at("gamma").get<double>() : 0.0;
    objectives.emplace_back(mat_from(field(o, "Q"), n, n, "objective.Q"), vec_from(field(o, "q"), "objective.q"), gamma,
                            std::move(a));
  }

  BlockProblem<double>::BlockMap blocks;
  auto read_blocks = [&](const char* key, bool equality) {
    if (!doc.contains(key)) return;
    for (const auto& entry : doc.at(key)) {
      const Index j = field(entry, "j").get<Index>();
      const Index i = field(entry, "i").get<Index>();
      Mat<double> m = mat_from(field(entry, "data"), field(entry, "rows").get<Index>(),
                               field(entry, "cols").get<Index>(), key);
      auto& slot = blocks[{j, i}];
      (equality ? slot.A : slot.C) = std::move(m);
    }
  };
  read_blocks("A_blocks", true);
  read_blocks("C_blocks", false);

  std::optional<Vec<double>> strict;
  if (doc.contains("strict_point")) strict = vec_from(doc.at("strict_point"), "strict_point");
  auto problem = BlockProblem<double>::from_blocks(std::move(graph), std::move(objectives), blocks,
                                                   vec_from(field(doc, "b"), "b"), vec_from(field(doc, "c"), "c"),
                                                   std::move(strict));
  if (doc.contains("seed")) problem.seed = doc.at("seed").get<std::uint64_t>();
  return problem;
}

void write_problem(const std::string& path, const BlockProblem<double>& problem) {
  write_text(path, dump(problem_to_json(problem)));
}

BlockProblem<double> read_problem(const std::string& path) {
  try {
    return problem_from_json(json::parse(read_text(path)));
  } catch (const json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
}

json reference_to_json(const RefSolution<double>& ref, std::uint64_t problem_hash) {
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(problem_hash));
  return {{"problem_hash", hex},
          {"z_star", vec_json(ref.z_star)},
          {"f_star", ref.f_star},
          {"lambda_ref", vec_json(ref.lambda_ref)},
          {"quality",
           {{"prox_w", ref.quality.prox_w},
            {"infeas", ref.quality.infeas},
            {"iterations", ref.quality.iterations},
            {"f_from_dual", ref.quality.f_from_dual},
            {"low_quality", ref.quality.low_quality}}}};
}

RefSolution<double> reference_from_json(const json& doc, std::uint64_t* problem_hash) {
  RefSolution<double> ref;
  ref.z_star = vec_from(field(doc, "z_star"), "z_star");
  ref.f_star = field(doc, "f_star").get<double>();
  ref.lambda_ref = vec_from(field(doc, "lambda_ref"), "lambda_ref");
  if (doc.contains("quality")) {
    const json& q = doc.at("quality");
    ref.quality.prox_w = q.value("prox_w", 0.0);
    ref.quality.infeas = q.value("infeas", 0.0);
    ref.quality.iterations = q.value("iterations", Index(0));
    ref.quality.f_from_dual = q.value("f_from_dual", false);
    ref.quality.low_quality = q.value("low_quality", false);
  }
  if (problem_hash != nullptr) {
    *problem_hash = doc.contains("problem_hash") ? std::stoull(doc.at("problem_hash").get<std::string>(), nullptr, 16) : 0;
  }
  return ref;
}

NetworkedSystem system_from_json(const json& doc) {
  NetworkedSystem sys;
  sys.horizon = doc.value("horizon", Index(1));
  for (const auto& sj : field(doc, "subsystems")) {
    Subsystem s;
    s.nx = field(sj, "nx").get<Index>();
    s.nu = field(sj, "nu").get<Index>();
    s.Q = mat_from(field(sj, "Q"), s.nx, s.nx, "subsystem.Q");
    s.R = mat_from(field(sj, "R"), s.nu, s.nu, "subsystem.R");
    s.P = mat_from(field(sj, "P"), s.nx, s.nx, "subsystem.P");
    s.x0 = vec_from(field(sj, "x0"), "subsystem.x0");
    s.c = sj.contains("c") ? vec_from(sj.at("c"), "subsystem.c") : Vec<double>(0);
    sys.subsystems.push_back(std::move(s));
  }
  // Neighbor shapes depend on the other subsystems' dimensions.
  std::size_t idx = 0;
  for (const auto& sj : field(doc, "subsystems")) {
    Subsystem& s = sys.subsystems[idx++];
    const Index rows = s.c.size();
    if (sj.contains("neighbors")) {
      for (const auto& nj : sj.at("neighbors")) {
        Coupling cp;
        cp.j = field(nj, "j").get<Index>();
        if (cp.j < 0 || cp.j >= static_cast<Index>(sys.subsystems.size())) {
          throw FormatError("subsystem neighbor index out of range");
        }
        const Subsystem& o = sys.subsystems[cp.j];
        if (nj.contains("A")) cp.A = mat_from(nj.at("A"), s.nx, o.nx, "neighbor.A");
        if (nj.contains("B")) cp.B = mat_from(nj.at("B"), s.nx, o.nu, "neighbor.B");
        if (nj.contains("Cx")) cp.Cx = mat_from(nj.at("Cx"), rows, o.nx, "neighbor.Cx");
        if (nj.contains("Cu")) cp.Cu = mat_from(nj.at("Cu"), rows, o.nu, "neighbor.Cu");
        s.neighbors.push_back(std::move(cp));
      }
    }
    if (sj.contains("terminal_box")) {
      const json& tb = sj.at("terminal_box");
      s.terminal = Box{vec_from(field(tb, "lo"), "terminal_box.lo"), vec_from(field(tb, "hi"), "terminal_box.hi")};
    }
  }
  return sys;
}

json system_to_json(const NetworkedSystem& sys) {
  json subs = json::array();
  for (const auto& s : sys.subsystems) {
    json nbrs = json::array();
    for (const auto& cp : s.neighbors) {
      json n = {{"j", cp.j}};
      if (cp.A.size()) n["A"] = mat_json(cp.A);
      if (cp.B.size()) n["B"] = mat_json(cp.B);
      if (cp.Cx.size()) n["Cx"] = mat_json(cp.Cx);
      if (cp.Cu.size()) n["Cu"] = mat_json(cp.Cu);
      nbrs.push_back(std::move(n));
    }
    json o = {{"nx", s.nx}, {"nu", s.nu}, {"Q", mat_json(s.Q)}, {"R", mat_json(s.R)}, {"P", mat_json(s.P)},
              {"x0", vec_json(s.x0)}, {"c", vec_json(s.c)}, {"neighbors", nbrs}};
    if (s.terminal) o["terminal_box"] = {{"lo", vec_json(s.terminal->lo)}, {"hi", vec_json(s.terminal->hi)}};
    subs.push_back(std::move(o));
  }
  return {{"horizon", sys.horizon}, {"subsystems", subs}};
}

void write_trace_csv(std::ostream& out, const RunTrace<double>& trace) {
  out << kTraceHeader << "\n";
  for (const auto& r : trace.rows) {
    out << r.k << ',' << format_double(r.dual) << ',' << format_double(r.f) << ',' << format_double(r.dual_subopt)
        << ',' << format_double(r.primal_subopt) << ',' << format_double(r.infeas_w) << ','
        << format_double(r.dist_z) << ',' << format_double(r.step_w) << ',' << format_double(r.prox_w) << "\n";
  }
}

std::vector<TraceRow<double>> read_trace_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kTraceHeader) throw FormatError("trace: unexpected header");
  std::vector<TraceRow<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 9) throw FormatError("trace: expected 9 columns");
    auto num = [](const std::string& s) { return std::strtod(s.c_str(), nullptr); };
    rows.push_back({static_cast<Index>(std::stoll(cells[0])), num(cells[1]), num(cells[2]), num(cells[3]),
                    num(cells[4]), num(cells[5]), num(cells[6]), num(cells[7]), num(cells[8])});
  }
  return rows;
}

void write_message_log_csv(std::ostream& out, const MessageLog& log) {
  out << "round,direction,from,to,bytes\n";
  for (const auto& m : log.records) {
    out << m.round << ',' << to_string(m.direction) << ',' << m.from << ',' << m.to << ',' << m.bytes << "\n";
  }
}

}  // namespace dualdg::io
