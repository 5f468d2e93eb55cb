#include "resonet/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace resonet {

std::string fmt(double x) {
  if (x == 0) x = 0;  // drops the sign of -0
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

json num(double x) {
  if (!std::isfinite(x)) return nullptr;
  return x == 0 ? 0.0 : x;
}

json vec_json(const Vec& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(num(v[i]));
  return a;
}

json mode_json(const Mode& m) { return json(m); }

std::string hash_hex(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_atomic(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + tmp.string());
    f << content;
    f.flush();
    if (!f) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

CsvTable::CsvTable(const OutputHeader& h, std::vector<std::string> columns) : width_(columns.size()) {
  text_ = "# resonet " + std::string(kVersion) + "\n";
  text_ += "# command " + h.command + "\n";
  text_ += "# config_hash " + h.config_hash + "\n";
  text_ += "# seed " + std::to_string(h.seed) + "\n";
  for (std::size_t i = 0; i < columns.size(); ++i) text_ += (i ? "," : "") + columns[i];
  text_ += "\n";
}

void CsvTable::row(const std::vector<double>& values) {
  std::vector<std::string> cells;
  cells.reserve(values.size());
  for (double v : values) cells.push_back(fmt(v));
  row(cells);
}

void CsvTable::row(const std::vector<std::string>& cells) {
  if (cells.size() != width_) throw std::logic_error("csv row width mismatch");
  for (std::size_t i = 0; i < cells.size(); ++i) text_ += (i ? "," : "") + cells[i];
  text_ += "\n";
  ++rows_;
}

std::string CsvTable::str() const { return text_; }

json header_json(const OutputHeader& h) {
  return json{{"tool", "resonet"},
              {"version", kVersion},
              {"command", h.command},
              {"config_hash", h.config_hash},
              {"seed", h.seed}};
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json to_json(const Resonance& r) {
  json j{{"kl", mode_json(r.kl)}, {"order", r.order}, {"affine", r.affine}, {"equation", r.equation()}};
  if (r.affine) {
    j["normal"] = vec_json(r.normal);
    j["offset"] = num(r.offset);
  }
  return j;
}

json to_json(const CodimTwo& c) {
  json pts = json::array();
  for (const auto& p : c.points) pts.push_back(vec_json(p));
  json j{{"label", component_label(c)}, {"kind", c.kind}, {"a", mode_json(c.a)}};
  j["b"] = c.b.empty() ? json(nullptr) : mode_json(c.b);
  j["whole_surface"] = c.whole_surface;
  j["points"] = std::move(pts);
  return j;
}

json to_json(const HypothesisReport& r) {
  json checks = json::array();
  for (const auto& c : r.checks) {
    json w = json::array();
    for (const auto& x : c.witnesses) {
      json e{{"I", vec_json(x.I)}};
      if (x.theta.size()) e["theta"] = vec_json(x.theta);
      e["value"] = num(x.value);
      e["note"] = x.note;
      w.push_back(std::move(e));
    }
    json diag = json::object();
    for (const auto& [k, v] : c.diagnostics) diag[k] = num(v);
    checks.push_back(json{{"name", c.name},
                          {"status", status_name(c.status)},
                          {"detail", c.detail},
                          {"measured", num(c.measured)},
                          {"threshold", num(c.threshold)},
                          {"samples", c.samples},
                          {"witnesses", std::move(w)},
                          {"diagnostics", std::move(diag)}});
  }
  const auto& o = r.options;
  return json{{"passed", r.passed()},
              {"L", num(r.L)},
              {"options",
               {{"action_grid", o.action_grid},
                {"angle_grid", o.angle_grid},
                {"order", o.order},
                {"delta", num(o.delta)},
                {"m0", o.m0},
                {"rho", num(o.rho)}}},
              {"checks", std::move(checks)}};
}

json to_json(const Chain& c) {
  json path = json::array();
  for (const auto& p : c.path) path.push_back(vec_json(p));
  json levels = json::array();
  for (const auto& L : c.levels) {
    json j{{"chart", L.chart == Chart::Resonant ? "resonant" : "nonresonant"}, {"E", vec_json(L.E)}};
    if (L.chart == Chart::Resonant) {
      j["kl"] = mode_json(L.kl);
      j["order"] = L.order;
      j["branch"] = L.branch;
    }
    j["I"] = vec_json(L.I);
    j["arclength"] = num(L.arclength);
    levels.push_back(std::move(j));
  }
  json links = json::array();
  for (const auto& k : c.links) {
    if (k.relabel) {
      links.push_back(json{{"relabel", true}});
      continue;
    }
    links.push_back(json{{"relabel", false},
                         {"theta", vec_json(k.theta)},
                         {"residual", num(k.residual)},
                         {"det", num(k.det)},
                         {"sigma", k.sigma},
                         {"jump", num(k.jump)},
                         {"I", vec_json(k.I)}});
  }
  return json{{"eps", num(c.eps)},
              {"valid", c.valid()},
              {"L", num(c.L)},
              {"jump_cap", num(c.jump_cap)},
              {"max_residual", num(c.max_residual)},
              {"min_margin", num(c.min_margin)},
              {"path", std::move(path)},
              {"levels", std::move(levels)},
              {"links", std::move(links)}};
}

json to_json(const ScatteringMeasurement& s) {
  return json{{"I_minus", vec_json(s.I_minus)},
              {"I_plus", vec_json(s.I_plus)},
              {"measured", vec_json(s.measured)},
              {"predicted", vec_json(s.predicted)},
              {"discrepancy", num(s.discrepancy)},
              {"tau", vec_json(s.tau)}};
}

std::string gnuplot_script(const std::string& csv, const std::string& title, int xcol,
                           const std::vector<std::pair<int, std::string>>& ycols) {
  std::ostringstream o;
  o << "# resonet " << kVersion << "\n";
  o << "set datafile separator ','\n";
  o << "set datafile commentschars '#'\n";
  o << "set key autotitle columnhead\n";
  o << "set title '" << title << "'\n";
  o << "plot ";
  for (std::size_t i = 0; i < ycols.size(); ++i) {
    if (i) o << ", \\\n     ";
    o << "'" << csv << "' using " << xcol << ":" << ycols[i].first << " with lines title '" << ycols[i].second << "'";
  }
  o << "\npause -1\n";
  return o.str();
}

std::vector<Vec> read_path_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open path file " + path);
  std::vector<Vec> pts;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    for (char& c : line)
      if (c == ',' || c == ';' || c == '\t') c = ' ';
    std::istringstream in(line);
    std::vector<double> v;
    double x;
    while (in >> x) v.push_back(x);
    if (!in.eof()) throw std::runtime_error(path + ":" + std::to_string(lineno) + ": not a number");
    if (v.empty()) continue;
    if (!pts.empty() && static_cast<long>(v.size()) != pts.front().size())
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": inconsistent dimension");
    pts.push_back(Eigen::Map<Vec>(v.data(), static_cast<long>(v.size())));
  }
  if (pts.empty()) throw std::runtime_error("path file " + path + " has no points");
  return pts;
}

}  // namespace resonet
