#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>

#include "resonet/averaging.hpp"
#include "resonet/chain.hpp"
#include "resonet/hypotheses.hpp"
#include "resonet/io.hpp"
#include "resonet/melnikov.hpp"
#include "resonet/parallel.hpp"
#include "resonet/resonance.hpp"
#include "resonet/scattering.hpp"
#include "resonet/simulate.hpp"

using namespace resonet;
namespace fs = std::filesystem;

namespace {

constexpr double kTwoPi = 2 * std::numbers::pi;

enum Exit { kOk = 0, kMissing = 1, kInvalid = 2, kClearance = 3 };

struct Failure {
  int code;
  std::string message;
};

struct Common {
  std::string model;
  std::string out = ".";
  std::uint64_t seed = 1;
  std::vector<std::string> params;
};

struct Outputs {
  std::vector<std::pair<std::string, std::string>> files;
  void add(std::string name, std::string content) { files.emplace_back(std::move(name), std::move(content)); }
};

std::string quote(const std::string& s) { return "\"" + s + "\""; }

std::string idx_name(const char* base, int i) { return base + std::to_string(i + 1); }

std::vector<std::string> names(const char* base, int n) {
  std::vector<std::string> v;
  for (int i = 0; i < n; ++i) v.push_back(idx_name(base, i));
  return v;
}

void append(std::vector<std::string>& a, const std::vector<std::string>& b) { a.insert(a.end(), b.begin(), b.end()); }

void append(std::vector<double>& a, const Vec& b) {
  for (int i = 0; i < b.size(); ++i) a.push_back(b[i]);
}

Vec to_vec(const std::vector<double>& v) {
  Vec x(static_cast<long>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) x[static_cast<long>(i)] = v[i];
  return x;
}

// "lo:hi" per axis, comma separated
ActionBox parse_box(const std::string& spec, int d) {
  ActionBox b;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    double lo, hi;
    char c;
    std::istringstream in(item);
    if (!(in >> lo >> c >> hi) || c != ':' || !(lo < hi)) throw Failure{kInvalid, "bad box axis '" + item + "'"};
    b.lo.push_back(lo);
    b.hi.push_back(hi);
  }
  if (static_cast<int>(b.lo.size()) == 1 && d > 1) {
    b.lo.assign(d, b.lo[0]);
    b.hi.assign(d, b.hi[0]);
  }
  if (static_cast<int>(b.lo.size()) != d) throw Failure{kInvalid, "box needs " + std::to_string(d) + " axes"};
  return b;
}

// "n" or "lo:hi:n" per axis (one n for all axes)
int parse_grid(const std::string& spec, int d, ActionBox* box) {
  if (spec.find(':') == std::string::npos) {
    int n = 0;
    try {
      n = std::stoi(spec);
    } catch (...) {
      throw Failure{kInvalid, "bad grid '" + spec + "'"};
    }
    if (n < 1) throw Failure{kInvalid, "grid must be positive"};
    return n;
  }
  std::stringstream ss(spec);
  std::string item;
  ActionBox b;
  int n = -1;
  while (std::getline(ss, item, ',')) {
    double lo, hi;
    int k;
    char c1, c2;
    std::istringstream in(item);
    if (!(in >> lo >> c1 >> hi >> c2 >> k) || c1 != ':' || c2 != ':' || !(lo < hi) || k < 1)
      throw Failure{kInvalid, "bad grid axis '" + item + "' (lo:hi:n)"};
    if (n >= 0 && k != n) throw Failure{kInvalid, "grid axes must share n"};
    n = k;
    b.lo.push_back(lo);
    b.hi.push_back(hi);
  }
  if (static_cast<int>(b.lo.size()) == 1 && d > 1) {
    b.lo.assign(d, b.lo[0]);
    b.hi.assign(d, b.hi[0]);
  }
  if (static_cast<int>(b.lo.size()) != d) throw Failure{kInvalid, "grid needs " + std::to_string(d) + " axes"};
  *box = b;
  return n;
}

Vec uniform_in(const ActionBox& b, std::mt19937_64& rng, double shrink = 0.0) {
  Vec I(static_cast<long>(b.lo.size()));
  for (std::size_t i = 0; i < b.lo.size(); ++i) {
    const double w = b.hi[i] - b.lo[i];
    std::uniform_real_distribution<double> u(b.lo[i] + shrink * w, b.hi[i] - shrink * w);
    I[static_cast<long>(i)] = u(rng);
  }
  return I;
}

Vec angles(int d, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0, kTwoPi);
  Vec a(d);
  for (int i = 0; i < d; ++i) a[i] = u(rng);
  return a;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = 0, my = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]) / n;
    my += std::log(y[i]) / n;
  }
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
    sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
  }
  return sxx > 0 ? sxy / sxx : std::nan("");
}

// Resonance meets the closed box: f changes sign (or vanishes) on the grid.
bool meets_box(const Model& m, const Resonance& r, const ActionBox& box, int grid) {
  const int d = static_cast<int>(box.lo.size());
  std::vector<int> idx(d, 0);
  bool neg = false, pos = false;
  while (true) {
    Vec I(d);
    for (int i = 0; i < d; ++i) I[i] = box.lo[i] + (box.hi[i] - box.lo[i]) * idx[i] / (grid - 1);
    const double f = resonance_function(m, r.kl, I);
    if (std::abs(f) <= 1e-14) return true;
    (f < 0 ? neg : pos) = true;
    if (neg && pos) return true;
    int i = 0;
    while (i < d && ++idx[i] == grid) idx[i++] = 0;
    if (i == d) break;
  }
  return false;
}

class Runner {
 public:
  Runner(const Common& c, std::string command, std::string canonical)
      : common_(c), command_(std::move(command)), canonical_(std::move(canonical)) {}

  // Missing file -> exit 1 before anything is written.
  void load() {
    if (common_.model.empty()) throw Failure{kInvalid, "--model is required"};
    if (!fs::exists(common_.model)) throw Failure{kMissing, "model file not found: " + common_.model};
    try {
      cfg_ = load_model_file(common_.model);
      for (const auto& p : common_.params) {
        const auto eq = p.find('=');
        if (eq == std::string::npos) throw Failure{kInvalid, "--param expects NAME=VALUE, got '" + p + "'"};
        cfg_.params[p.substr(0, eq)] = std::stod(p.substr(eq + 1));
      }
      model_ = std::make_unique<Model>(build_model(cfg_));
    } catch (const Failure&) {
      throw;
    } catch (const std::exception& e) {
      throw Failure{kInvalid, std::string("model: ") + e.what()};
    }
    header_.command = command_;
    header_.seed = common_.seed;
    header_.config_hash = hash_hex(model_config_text(cfg_) + "\n" + canonical_);
  }

  const Model& model() const { return *model_; }
  ModelConfig& config() { return cfg_; }
  void rebuild() { model_ = std::make_unique<Model>(build_model(cfg_)); }
  const OutputHeader& header() const { return header_; }
  json with_header(json body) const {
    json j{{"header", header_json(header_)}};
    for (auto& [k, v] : body.items()) j[k] = v;
    return j;
  }

  void commit(const Outputs& out, const std::vector<std::string>& argv, double seconds) const {
    const fs::path dir(common_.out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw Failure{kInvalid, "output directory not writable: " + common_.out};
    for (const auto& [name, content] : out.files) write_atomic(dir / name, content);
    const std::time_t now = std::time(nullptr);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    json meta{{"tool", "resonet"}, {"version", kVersion}, {"command", command_}, {"timestamp", stamp},
              {"seconds", seconds}, {"argv", argv}, {"threads", thread_count()}};
    json files = json::array();
    for (const auto& f : out.files) files.push_back(f.first);
    meta["files"] = files;
    write_atomic(dir / (command_ + ".meta.json"), dump(meta));
  }

 private:
  Common common_;
  std::string command_, canonical_;
  ModelConfig cfg_;
  std::unique_ptr<Model> model_;
  OutputHeader header_;
};

// ---------------------------------------------------------------- commands

struct WebArgs {
  int order = 2;
  std::string box;
  double delta = 0.05;
  double L = 0.0;
  int m0 = 3;
};

Outputs run_web(Runner& R, const WebArgs& a) {
  if (!a.box.empty()) {
    R.config().box = parse_box(a.box, R.config().d);
    R.rebuild();
  }
  const Model& m = R.model();
  WebOptions wo;
  wo.max_order = a.order;
  ResonanceWeb web = build_web(m, wo);
  const int d = m.d();
  std::vector<std::string> cols = names("k", d);
  append(cols, {"l", "order", "affine", "equation"});
  CsvTable csv(R.header(), cols);
  json lines = json::array();
  for (const auto& r : web.resonances()) {
    if (!meets_box(m, r, m.box(), 65)) continue;
    std::vector<std::string> row;
    for (int i = 0; i <= d; ++i) row.push_back(std::to_string(r.kl[i]));
    append(row, {std::to_string(r.order), r.affine ? "1" : "0", quote(r.equation())});
    csv.row(row);
  }
  json comps = json::array();
  double L = 0;
  if (!web.resonances().empty()) {
    ReducedDomain dom = build_reduced_domain(web, a.delta, a.m0, a.L);
    L = dom.L();
    for (const auto& c : dom.components()) {
      json j = to_json(c);
      json pts = json::array();
      for (const auto& p : j["points"])
        if (m.box().contains(to_vec(p.get<std::vector<double>>()), 1e-12)) pts.push_back(p);
      if (pts.empty() && !c.whole_surface) continue;
      j["points"] = pts;
      comps.push_back(j);
    }
  }
  Outputs out;
  out.add("web.csv", csv.str());
  out.add("web_bset.json", dump(R.with_header(json{{"order", a.order},
                                                   {"delta", num(a.delta)},
                                                   {"m0", a.m0},
                                                   {"L", num(L)},
                                                   {"box", {{"lo", m.box().lo}, {"hi", m.box().hi}}},
                                                   {"components", comps}})));
  return out;
}

struct VerifyArgs {
  std::string grid;
  int angle_grid = 32;
  int order = 2;
  double delta = 0.05;
  double L = 0.0;
  int m0 = 3;
  std::vector<double> eps;
};

Outputs run_verify(Runner& R, const VerifyArgs& a, int* exit_code) {
  HypothesisOptions ho;
  if (!a.grid.empty()) {
    ActionBox box;
    ho.action_grid = parse_grid(a.grid, R.config().d, &box);
    if (!box.lo.empty()) {
      R.config().box = box;
      R.rebuild();
    }
  }
  ho.angle_grid = a.angle_grid;
  ho.order = a.order;
  ho.delta = a.delta;
  ho.L = a.L;
  ho.m0 = a.m0;
  HypothesisReport rep = verify_hypotheses(R.model(), ho);
  json body = to_json(rep);
  body["eps"] = a.eps;
  Outputs out;
  out.add("hypotheses.json", dump(R.with_header(body)));
  *exit_code = rep.passed() ? kOk : kInvalid;
  return out;
}

struct MelnikovArgs {
  int samples = 200;
  double tau_range = 3.0;
  bool oracle = false;
};

Outputs run_melnikov(Runner& R, const MelnikovArgs& a, std::uint64_t seed) {
  const Model& m = R.model();
  const int d = m.d(), n = m.n();
  std::optional<std::vector<double>> fam;
  if (a.oracle) {
    fam = residue_family(m);
    if (!fam) throw Failure{kInvalid, "--oracle needs order-1 terms a cos(q1) trig(k.phi + l s) with V = cos q - 1"};
  }
  Melnikov M(m);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ut(-a.tau_range, a.tau_range), us(0, kTwoPi);
  struct Sample {
    Vec tau, I, phi;
    double s;
  };
  std::vector<Sample> pts(a.samples);
  for (auto& p : pts) {
    p.I = uniform_in(m.box(), rng);
    p.phi = angles(d, rng);
    p.s = us(rng);
    p.tau = Vec(n);
    for (int j = 0; j < n; ++j) p.tau[j] = ut(rng);
  }
  std::vector<double> Lq(a.samples), Lr(a.samples, 0.0), scale(a.samples, 0.0);
  parallel_for(a.samples, [&](int k) {
    const auto& p = pts[k];
    Lq[k] = M.L(p.tau, p.I, p.phi, p.s);
    if (fam) {
      Lr[k] = residue_L(m, *fam, p.tau[0], p.I, p.phi, p.s);
      const Vec om = m.frequency(p.I);
      for (std::size_t t = 0; t < fam->size(); ++t) {
        const auto& kl = m.terms()[t].kl;
        double nu = kl[d];
        for (int i = 0; i < d; ++i) nu += om[i] * kl[i];
        scale[k] += std::abs(residue_amplitude(nu, (*fam)[t]));
      }
    }
  });
  std::vector<std::string> cols = names("tau", n);
  append(cols, names("I", d));
  append(cols, names("phi", d));
  cols.push_back("s");
  cols.push_back("L_quadrature");
  if (fam) append(cols, {"L_residue", "abs_diff"});
  CsvTable csv(R.header(), cols);
  double max_abs = 0, max_rel = 0;
  for (int k = 0; k < a.samples; ++k) {
    std::vector<double> row;
    append(row, pts[k].tau);
    append(row, pts[k].I);
    append(row, pts[k].phi);
    row.push_back(pts[k].s);
    row.push_back(Lq[k]);
    if (fam) {
      const double diff = std::abs(Lq[k] - Lr[k]);
      row.push_back(Lr[k]);
      row.push_back(diff);
      max_abs = std::max(max_abs, diff);
      if (scale[k] > 0) max_rel = std::max(max_rel, diff / scale[k]);
    }
    csv.row(row);
  }
  Outputs out;
  out.add("melnikov.csv", csv.str());
  json summary{{"samples", a.samples}, {"tau_range", num(a.tau_range)}, {"oracle", a.oracle}};
  if (fam) {
    summary["max_abs_diff"] = num(max_abs);
    summary["max_rel_diff"] = num(max_rel);
  }
  out.add("melnikov_summary.json", dump(R.with_header(summary)));
  const int c0 = n + 2 * d + 2;
  std::vector<std::pair<int, std::string>> ys{{c0, "quadrature"}};
  if (fam) ys.push_back({c0 + 1, "residue"});
  out.add("melnikov.gp", gnuplot_script("melnikov.csv", "L along the samples", 0, ys));
  return out;
}

struct ScatterArgs {
  std::vector<double> eps{1e-2, 1e-3, 1e-4};
  int points = 5;
  bool measure = true;
  double window = 18.0;
};

Outputs run_scatter(Runner& R, const ScatterArgs& a, std::uint64_t seed) {
  const Model& m = R.model();
  const int d = m.d();
  if (a.eps.empty()) throw Failure{kInvalid, "--eps needs at least one value"};
  for (double e : a.eps)
    if (!(e >= 0)) throw Failure{kInvalid, "eps must be non-negative"};
  const bool measure = a.measure && m.n() == 1 && m.lambda_invariant();
  Melnikov M(m);
  std::mt19937_64 rng(seed);
  std::vector<std::pair<Vec, Vec>> pts;
  for (int tries = 0; tries < 50 * a.points && static_cast<int>(pts.size()) < a.points; ++tries) {
    Vec I = uniform_in(m.box(), rng, 0.1), th = angles(d, rng);
    if (M.reduced(I, th).ok) pts.emplace_back(I, th);
  }
  if (pts.empty()) throw Failure{kInvalid, "no sampled (I, theta) lies in the scattering domain"};
  const int np = static_cast<int>(pts.size()), ne = static_cast<int>(a.eps.size());
  std::vector<ScatterPoint> maps(np * ne);
  std::vector<ScatteringMeasurement> meas(np * ne);
  ScatteringOptions so;
  so.window = a.window;
  parallel_for(np * ne, [&](int k) {
    const auto& [I, th] = pts[k / ne];
    const double e = a.eps[k % ne];
    maps[k] = scattering_map(M, e, I, th);
    if (measure) meas[k] = measure_scattering(M, e, I, th, so);
  });
  std::vector<std::string> cols{"point", "eps"};
  append(cols, names("I", d));
  append(cols, names("theta", d));
  append(cols, names("I_out", d));
  append(cols, names("theta_out", d));
  append(cols, names("dI_predicted", d));
  if (measure) {
    append(cols, names("dI_measured", d));
    cols.push_back("discrepancy");
  }
  CsvTable csv(R.header(), cols);
  json per = json::array();
  double worst_exp = std::numeric_limits<double>::infinity();
  for (int p = 0; p < np; ++p) {
    std::vector<double> es, ds;
    for (int e = 0; e < ne; ++e) {
      const int k = p * ne + e;
      std::vector<double> row{static_cast<double>(p), a.eps[e]};
      append(row, pts[p].first);
      append(row, pts[p].second);
      append(row, maps[k].I);
      append(row, maps[k].theta);
      append(row, maps[k].I - pts[p].first);
      if (measure) {
        append(row, meas[k].measured);
        row.push_back(meas[k].discrepancy);
        if (a.eps[e] > 0 && meas[k].discrepancy > 0) {
          es.push_back(a.eps[e]);
          ds.push_back(meas[k].discrepancy);
        }
      }
      csv.row(row);
    }
    json j{{"I", vec_json(pts[p].first)}, {"theta", vec_json(pts[p].second)}};
    if (es.size() >= 2) {
      const double ex = loglog_slope(es, ds);
      j["exponent"] = num(ex);
      worst_exp = std::min(worst_exp, ex);
    }
    per.push_back(j);
  }
  Outputs out;
  out.add("scatter.csv", csv.str());
  json summary{{"eps", a.eps}, {"points", per}, {"measured", measure}};
  if (std::isfinite(worst_exp)) summary["min_exponent"] = num(worst_exp);
  out.add("scatter_summary.json", dump(R.with_header(summary)));
  return out;
}

struct ChainArgs {
  std::string path;
  std::vector<double> eps{1e-3};
  double delta = 0.05;
  double L = 0.0;
  int order = 2;
  int grid = 32;
  double dwell = kTwoPi;
  int direct = 0;
};

Outputs run_chain(Runner& R, const ChainArgs& a, int* exit_code) {
  const Model& m = R.model();
  if (a.eps.empty() || !(a.eps[0] > 0)) throw Failure{kInvalid, "chain needs a positive eps"};
  std::vector<Vec> path;
  try {
    path = read_path_file(a.path);
  } catch (const std::exception& e) {
    throw Failure{fs::exists(a.path) ? kInvalid : kMissing, e.what()};
  }
  for (const auto& p : path)
    if (p.size() != m.d()) throw Failure{kInvalid, "path points need " + std::to_string(m.d()) + " coordinates"};
  ChainOptions co;
  co.delta = a.delta;
  co.L = a.L;
  co.order = a.order;
  co.grid = a.grid;
  const double eps = a.eps[0];
  Chain c;
  try {
    c = build_chain(m, path, eps, co);
  } catch (const ChainError& e) {
    json j{{"error", e.kind}, {"message", e.what()}, {"witness", vec_json(e.witness)},
           {"path_point", vec_json(e.path_point)}, {"segment", e.segment}};
    std::cerr << j.dump() << "\n";
    throw Failure{e.kind == "clearance" ? kClearance : kInvalid, ""};
  }
  DriftOptions dopt;
  dopt.dwell = a.dwell;
  dopt.direct_stride = a.direct;
  DriftLog log = drift_demo(m, c, eps, dopt);
  const int d = m.d();
  std::vector<std::string> cols{"index", "chart", "branch", "arclength"};
  append(cols, names("I", d));
  append(cols, names("E", d));
  CsvTable lv(R.header(), cols);
  for (std::size_t i = 0; i < c.levels.size(); ++i) {
    const auto& L = c.levels[i];
    std::vector<double> row{static_cast<double>(i), L.chart == Chart::Resonant ? 1.0 : 0.0,
                            static_cast<double>(L.branch), L.arclength};
    append(row, L.I);
    append(row, L.E);
    lv.row(row);
  }
  std::vector<std::string> dcols{"t", "level"};
  append(dcols, names("I", d));
  append(dcols, {"distance", "jump"});
  CsvTable dr(R.header(), dcols);
  for (const auto& s : log.samples) {
    std::vector<double> row{s.t, static_cast<double>(s.level)};
    append(row, s.I);
    row.push_back(s.distance);
    row.push_back(s.jump ? 1.0 : 0.0);
    dr.row(row);
  }
  json direct = json::array();
  for (const auto& x : log.direct) direct.push_back(to_json(x));
  json body{{"chain", to_json(c)},
            {"drift",
             {{"max_distance", num(log.max_distance)},
              {"max_link_mismatch", num(log.max_link_mismatch)},
              {"flagged", log.flagged},
              {"samples", log.samples.size()},
              {"direct", direct}}}};
  Outputs out;
  out.add("chain.json", dump(R.with_header(body)));
  out.add("chain_levels.csv", lv.str());
  out.add("drift.csv", dr.str());
  if (d >= 2) out.add("drift.gp", gnuplot_script("drift.csv", "pseudo-orbit in action space", 3, {{4, "I2 vs I1"}}));
  *exit_code = log.flagged.empty() ? kOk : kInvalid;
  return out;
}

struct SimArgs {
  std::vector<double> eps{1e-3};
  double T = 100.0;
  std::vector<double> I, phi, p, q;
  double s = 0.0;
  std::string scheme = "rk8";
  double step = 1e-2;
  double sample = 0.0;
  bool no_F = false;
};

Outputs run_sim(Runner& R, const SimArgs& a) {
  const Model& m = R.model();
  const int d = m.d(), n = m.n();
  if (a.eps.empty() || !(a.eps[0] >= 0)) throw Failure{kInvalid, "sim needs eps >= 0"};
  const double eps = a.eps[0];
  auto fill = [](const std::vector<double>& v, int k, const char* what, const Vec& dflt) {
    if (v.empty()) return dflt;
    if (static_cast<int>(v.size()) != k)
      throw Failure{kInvalid, std::string(what) + " needs " + std::to_string(k) + " values"};
    return to_vec(v);
  };
  Vec center(d);
  for (int i = 0; i < d; ++i) center[i] = 0.5 * (m.box().lo[i] + m.box().hi[i]);
  ExtendedState x0;
  x0.I = fill(a.I, d, "--I", center);
  x0.phi = fill(a.phi, d, "--phi", Vec::Zero(d));
  x0.p = fill(a.p, n, "--p", Vec::Zero(n));
  x0.q = fill(a.q, n, "--q", Vec::Zero(n));
  x0.s = a.s;
  IntegrateOptions io;
  try {
    io.scheme = parse_scheme(a.scheme);
  } catch (const std::exception& e) {
    throw Failure{kInvalid, e.what()};
  }
  if (!(a.step > 0) || !(a.T != 0)) throw Failure{kInvalid, "--step must be positive and --T nonzero"};
  io.step = a.step;
  io.sample = a.sample;
  Trajectory tr;
  try {
    tr = integrate(m, x0, eps, a.T, io);
  } catch (const SimulationError& e) {
    throw Failure{kInvalid, e.what()};
  }
  const bool withF = !a.no_F;
  std::unique_ptr<ResonanceWeb> web;
  std::unique_ptr<Averager> avg;
  if (withF && eps != 0) {
    web = std::make_unique<ResonanceWeb>(build_web(m, {}));
    AveragingOptions ao;
    ao.m0 = 3;
    ao.L = web->resonances().empty() ? 0.05 : build_reduced_domain(*web, 0.05, 3, 0).L();
    ao.secular = web->secular_modes();
    avg = std::make_unique<Averager>(m, ao);
  }
  std::vector<Vec> F(tr.x.size());
  if (withF)
    parallel_for(static_cast<int>(tr.x.size()), [&](int k) {
      const auto& x = tr.x[k];
      if (!avg) {
        F[k] = x.I;
        return;
      }
      try {
        F[k] = FirstIntegral{avg.get()}(x.I, x.phi, x.s, eps);
      } catch (const std::exception&) {
        F[k] = Vec::Constant(d, std::nan(""));
      }
    });
  std::vector<std::string> cols{"t"};
  append(cols, names("I", d));
  append(cols, names("phi", d));
  append(cols, names("p", n));
  append(cols, names("q", n));
  append(cols, {"s", "E"});
  if (withF) append(cols, names("F", d));
  CsvTable csv(R.header(), cols);
  for (std::size_t k = 0; k < tr.x.size(); ++k) {
    const auto& x = tr.x[k];
    std::vector<double> row{tr.t[k]};
    append(row, x.I);
    append(row, x.phi);
    append(row, x.p);
    append(row, x.q);
    row.push_back(x.s);
    row.push_back(tr.E[k]);
    if (withF) append(row, F[k]);
    csv.row(row);
  }
  Vec dI = Vec::Zero(d), dF = Vec::Zero(d);
  for (std::size_t k = 0; k < tr.x.size(); ++k) {
    dI = dI.cwiseMax((tr.x[k].I - tr.x[0].I).cwiseAbs());
    if (withF) dF = dF.cwiseMax((F[k] - F[0]).cwiseAbs());
  }
  json summary{{"eps", num(eps)},      {"T", num(a.T)},       {"scheme", scheme_name(io.scheme)},
               {"step", num(io.step)}, {"steps", tr.steps},   {"energy_drift", num(tr.energy_drift)},
               {"samples", tr.x.size()}, {"I_variation", vec_json(dI)}};
  if (withF) summary["F_variation"] = vec_json(dF);
  Outputs out;
  out.add("trajectory.csv", csv.str());
  out.add("sim_summary.json", dump(R.with_header(summary)));
  std::vector<std::pair<int, std::string>> ys;
  for (int i = 0; i < d; ++i) ys.push_back({2 + i, idx_name("I", i)});
  out.add("trajectory.gp", gnuplot_script("trajectory.csv", "actions", 1, ys));
  return out;
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--model", c.model, "model file")->required();
  sub->add_option("--out", c.out, "output directory");
  sub->add_option("--seed", c.seed, "RNG seed");
  sub->add_option("--param", c.params, "override a model parameter, NAME=VALUE");
}

// Option values that shape the output, in declaration order.
std::string canonical(const CLI::App* sub) {
  std::string s = sub->get_name();
  for (const CLI::Option* o : sub->get_options()) {
    const std::string name = o->get_name();
    if (name == "--out" || name == "--help" || name == "--model") continue;
    s += " " + name + "=";
    for (const auto& r : o->results()) s += r + ";";
  }
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::string> args(argv, argv + argc);
  CLI::App app{"resonet: Arnold diffusion toolkit for rotator x pendulum Hamiltonians"};
  app.require_subcommand(1);
  Common common;

  WebArgs web;
  auto* s_web = app.add_subcommand("web", "resonance web and the codimension-two set B");
  add_common(s_web, common);
  s_web->add_option("--order", web.order, "averaging order of the web");
  s_web->add_option("--box", web.box, "action box, lo:hi per axis");
  s_web->add_option("--delta", web.delta, "radius of the balls around B");
  s_web->add_option("--L", web.L, "tube radius, 0 for automatic");
  s_web->add_option("--m0", web.m0, "resonance order used for B");

  VerifyArgs ver;
  auto* s_ver = app.add_subcommand("verify", "check the nondegeneracy hypotheses");
  add_common(s_ver, common);
  s_ver->add_option("--grid", ver.grid, "action grid, n or lo:hi:n per axis");
  s_ver->add_option("--angle-grid", ver.angle_grid, "angle grid per axis");
  s_ver->add_option("--order", ver.order, "averaging order of the web");
  s_ver->add_option("--delta", ver.delta, "radius of the balls around B");
  s_ver->add_option("--L", ver.L, "tube radius, 0 for automatic");
  s_ver->add_option("--m0", ver.m0, "resonance order used for B");
  s_ver->add_option("--eps", ver.eps, "eps values recorded with the report")->delimiter(',');

  MelnikovArgs mel;
  auto* s_mel = app.add_subcommand("melnikov", "sample the Melnikov potential");
  add_common(s_mel, common);
  s_mel->add_option("--samples", mel.samples, "number of random samples");
  s_mel->add_option("--tau-range", mel.tau_range, "tau drawn from [-range, range]");
  s_mel->add_flag("--oracle", mel.oracle, "compare with the residue closed form");

  ScatterArgs sca;
  auto* s_sca = app.add_subcommand("scatter", "scattering map, predicted and measured");
  add_common(s_sca, common);
  s_sca->add_option("--eps", sca.eps, "eps list")->delimiter(',');
  s_sca->add_option("--points", sca.points, "number of random (I, theta)");
  s_sca->add_option("--window", sca.window, "fibre-following time");
  s_sca->add_flag("!--no-measure", sca.measure, "skip the direct measurement");

  ChainArgs ch;
  auto* s_ch = app.add_subcommand("chain", "transition chain along a path, with a pseudo-orbit");
  add_common(s_ch, common);
  s_ch->add_option("--path", ch.path, "polyline file, one point per line")->required();
  s_ch->add_option("--eps", ch.eps, "eps (first value used)")->delimiter(',');
  s_ch->add_option("--delta", ch.delta, "radius of the balls around B");
  s_ch->add_option("--L", ch.L, "tube radius, 0 for automatic");
  s_ch->add_option("--order", ch.order, "averaging order of the web");
  s_ch->add_option("--grid", ch.grid, "angle scan per link");
  s_ch->add_option("--dwell", ch.dwell, "inner-flow time between links");
  s_ch->add_option("--direct", ch.direct, "measure every k-th jump directly, 0 for none");

  SimArgs sim;
  auto* s_sim = app.add_subcommand("sim", "integrate the full flow");
  add_common(s_sim, common);
  s_sim->add_option("--eps", sim.eps, "eps (first value used)")->delimiter(',');
  s_sim->add_option("--T", sim.T, "integration time, negative for backward");
  s_sim->add_option("--I", sim.I, "initial actions")->delimiter(',');
  s_sim->add_option("--phi", sim.phi, "initial angles")->delimiter(',');
  s_sim->add_option("--p", sim.p, "initial pendulum momenta")->delimiter(',');
  s_sim->add_option("--q", sim.q, "initial pendulum angles")->delimiter(',');
  s_sim->add_option("--s", sim.s, "initial time phase");
  s_sim->add_option("--scheme", sim.scheme, "split or rk8");
  s_sim->add_option("--step", sim.step, "splitting step, initial rk8 step");
  s_sim->add_option("--sample", sim.sample, "output spacing, 0 for |T|/1000");
  s_sim->add_flag("--no-F", sim.no_F, "skip the averaged first integral columns");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kInvalid;
  }

  CLI::App* sub = app.get_subcommands().front();
  try {
    Runner R(common, sub->get_name(), canonical(sub));
    R.load();
    Outputs out;
    int code = kOk;
    if (sub == s_web) out = run_web(R, web);
    else if (sub == s_ver) out = run_verify(R, ver, &code);
    else if (sub == s_mel) out = run_melnikov(R, mel, common.seed);
    else if (sub == s_sca) out = run_scatter(R, sca, common.seed);
    else if (sub == s_ch) out = run_chain(R, ch, &code);
    else out = run_sim(R, sim);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    R.commit(out, args, secs);
    if (code != kOk) std::cerr << "validation failed; see the report\n";
    return code;
  } catch (const Failure& f) {
    if (!f.message.empty()) std::cerr << "error: " << f.message << "\n";
    return f.code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  }
}
