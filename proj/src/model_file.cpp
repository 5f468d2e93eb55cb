#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "resonet/model.hpp"

namespace resonet {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::string unquote(const std::string& s, int line) {
  if (s.size() >= 1 && s.front() == '"') {
    if (s.size() < 2 || s.back() != '"') throw ModelFileError("unterminated quoted value", line);
    return s.substr(1, s.size() - 2);
  }
  return s;
}

double to_double(const std::string& s, int line) {
  std::string t = trim(s);
  char* end = nullptr;
  double v = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size()) throw ModelFileError("expected a number, got '" + t + "'", line);
  return v;
}

int to_int(const std::string& s, int line) {
  std::string t = trim(s);
  char* end = nullptr;
  long v = std::strtol(t.c_str(), &end, 10);
  if (t.empty() || end != t.c_str() + t.size()) throw ModelFileError("expected an integer, got '" + t + "'", line);
  return static_cast<int>(v);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

// key=value tokens separated by whitespace; values may be double-quoted.
std::vector<std::pair<std::string, std::string>> tokenize_term(const std::string& s, int line) {
  std::vector<std::pair<std::string, std::string>> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    if (i >= s.size()) break;
    std::size_t eq = s.find('=', i);
    if (eq == std::string::npos) throw ModelFileError("term field without '=': '" + s.substr(i) + "'", line);
    std::string key = trim(s.substr(i, eq - i));
    i = eq + 1;
    std::string val;
    if (i < s.size() && s[i] == '"') {
      std::size_t close = s.find('"', i + 1);
      if (close == std::string::npos) throw ModelFileError("unterminated quoted value", line);
      val = s.substr(i + 1, close - i - 1);
      i = close + 1;
    } else {
      std::size_t st = i;
      while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
      val = s.substr(st, i - st);
    }
    out.push_back({key, val});
  }
  return out;
}

}  // namespace

ModelConfig parse_model_text(const std::string& text) {
  ModelConfig cfg;
  cfg.box.lo.clear();
  std::istringstream in(text);
  std::string raw, section;
  int line = 0;
  int pendulum = -1;
  bool have_rotator = false, have_h = false;
  std::vector<int> pendulum_lines;
  int box_line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string s = raw;
    // strip comments outside quotes
    bool q = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] == '"') q = !q;
      if (!q && (s[i] == '#' || s[i] == ';')) {
        s = s.substr(0, i);
        break;
      }
    }
    s = trim(s);
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ModelFileError("malformed section header", line);
      section = trim(s.substr(1, s.size() - 2));
      if (section.rfind("pendulum.", 0) == 0) {
        int j = to_int(section.substr(9), line);
        if (j < 1) throw ModelFileError("pendulum index must be >= 1", line);
        if (static_cast<int>(cfg.pendula.size()) < j) {
          cfg.pendula.resize(j);
          pendulum_lines.resize(j, 0);
        }
        pendulum = j - 1;
        pendulum_lines[pendulum] = line;
        section = "pendulum";
      } else if (section == "rotator") {
        have_rotator = true;
      } else if (section != "perturbation" && section != "params" && section != "domain") {
        throw ModelFileError("unknown section [" + section + "]", line);
      }
      continue;
    }
    std::size_t eq = s.find('=');
    if (eq == std::string::npos) throw ModelFileError("expected 'key = value'", line);
    std::string key = trim(s.substr(0, eq));
    std::string val = trim(s.substr(eq + 1));
    if (section.empty()) throw ModelFileError("key outside of any section", line);
    if (section == "rotator") {
      if (key == "d")
        cfg.d = to_int(val, line);
      else if (key == "h") {
        cfg.h = unquote(val, line);
        have_h = true;
      } else
        throw ModelFileError("unknown key '" + key + "' in [rotator]", line);
    } else if (section == "pendulum") {
      if (key == "V")
        cfg.pendula[pendulum].V = unquote(val, line);
      else if (key == "sign") {
        int sg = to_int(val, line);
        if (sg != 1 && sg != -1) throw ModelFileError("sign must be +1 or -1", line);
        cfg.pendula[pendulum].sign = sg;
      } else
        throw ModelFileError("unknown key '" + key + "' in [pendulum]", line);
    } else if (section == "perturbation") {
      if (key != "term") throw ModelFileError("unknown key '" + key + "' in [perturbation]", line);
      TermSpec t;
      t.line = line;
      bool hk = false, hc = false;
      for (const auto& [k, v] : tokenize_term(val, line)) {
        if (k == "k") {
          for (const auto& e : split(v, ',')) t.k.push_back(to_int(e, line));
          hk = true;
        } else if (k == "l") {
          t.l = to_int(v, line);
        } else if (k == "basis") {
          if (v != "cos" && v != "sin") throw ModelFileError("basis must be cos or sin", line);
          t.basis = v;
        } else if (k == "coeff") {
          t.coeff = v;
          hc = true;
        } else if (k == "order") {
          t.order = to_int(v, line);
          if (t.order < 1) throw ModelFileError("order must be >= 1", line);
        } else {
          throw ModelFileError("unknown term field '" + k + "'", line);
        }
      }
      if (!hk || !hc) throw ModelFileError("term needs k and coeff", line);
      cfg.terms.push_back(t);
    } else if (section == "params") {
      if (key.empty() || !std::isalpha(static_cast<unsigned char>(key[0])))
        throw ModelFileError("bad parameter name '" + key + "'", line);
      if (is_state_variable(key)) throw ModelFileError("parameter '" + key + "' shadows a state variable", line);
      cfg.params[key] = to_double(val, line);
    } else if (section == "domain") {
      if (key == "box") {
        box_line = line;
        cfg.box.lo.clear();
        cfg.box.hi.clear();
        for (const auto& iv : split(val, ',')) {
          auto ab = split(iv, ':');
          if (ab.size() != 2) throw ModelFileError("box entries must be lo:hi", line);
          double lo = to_double(ab[0], line), hi = to_double(ab[1], line);
          if (!(lo < hi)) throw ModelFileError("box interval with lo >= hi", line);
          cfg.box.lo.push_back(lo);
          cfg.box.hi.push_back(hi);
        }
      } else if (key == "grid") {
        cfg.grid = to_int(val, line);
        if (cfg.grid < 2) throw ModelFileError("grid must be >= 2", line);
      } else {
        throw ModelFileError("unknown key '" + key + "' in [domain]", line);
      }
    }
  }
  if (!have_rotator || !have_h || cfg.d < 1) throw ModelFileError("missing [rotator] with d and h", line);
  if (cfg.pendula.empty()) throw ModelFileError("missing [pendulum.1]", line);
  for (std::size_t j = 0; j < cfg.pendula.size(); ++j)
    if (cfg.pendula[j].V.empty())
      throw ModelFileError("pendulum " + std::to_string(j + 1) + " has no V",
                           j < pendulum_lines.size() && pendulum_lines[j] ? pendulum_lines[j] : line);
  if (!cfg.box.lo.empty() && static_cast<int>(cfg.box.lo.size()) != cfg.d)
    throw ModelFileError("box has " + std::to_string(cfg.box.lo.size()) + " intervals, expected d", box_line);
  for (const auto& t : cfg.terms)
    if (static_cast<int>(t.k.size()) != cfg.d) throw ModelFileError("k must have d entries", t.line);
  return cfg;
}

ModelConfig load_model_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::ios_base::failure("cannot open model file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_model_text(ss.str());
}

std::string model_config_text(const ModelConfig& cfg) {
  std::ostringstream os;
  os.precision(17);
  os << "[rotator]\nd = " << cfg.d << "\nh = \"" << cfg.h << "\"\n";
  for (std::size_t j = 0; j < cfg.pendula.size(); ++j)
    os << "\n[pendulum." << j + 1 << "]\nV = \"" << cfg.pendula[j].V << "\"\nsign = " << cfg.pendula[j].sign << "\n";
  os << "\n[perturbation]\n";
  for (const auto& t : cfg.terms) {
    os << "term = k=";
    for (std::size_t i = 0; i < t.k.size(); ++i) os << (i ? "," : "") << t.k[i];
    os << " l=" << t.l << " basis=" << t.basis << " coeff=\"" << t.coeff << "\" order=" << t.order << "\n";
  }
  os << "\n[params]\n";
  for (const auto& [k, v] : cfg.params) os << k << " = " << v << "\n";
  os << "\n[domain]\n";
  if (!cfg.box.lo.empty()) {
    os << "box = ";
    for (std::size_t i = 0; i < cfg.box.lo.size(); ++i) os << (i ? ", " : "") << cfg.box.lo[i] << ":" << cfg.box.hi[i];
    os << "\n";
  }
  os << "grid = " << cfg.grid << "\n";
  return os.str();
}

}  // namespace resonet
