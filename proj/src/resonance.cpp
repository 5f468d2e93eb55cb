#include "resonet/resonance.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "resonet/averaging.hpp"

namespace resonet {

namespace {

struct Rational {
  long long p = 0, q = 1;
};

// Continued-fraction approximation with bounded denominator.
std::optional<Rational> rationalize(double x, long long maxden = 1000000, double tol = 1e-11) {
  double a = x;
  long long h0 = 1, h1 = 0, k0 = 0, k1 = 1;
  for (int it = 0; it < 64; ++it) {
    double fl = std::floor(a);
    long long ai = static_cast<long long>(fl);
    long long h2 = ai * h0 + h1, k2 = ai * k0 + k1;
    if (k2 > maxden) break;
    h1 = h0;
    h0 = h2;
    k1 = k0;
    k0 = k2;
    if (std::abs(static_cast<double>(h0) / static_cast<double>(k0) - x) <= tol * std::max(1.0, std::abs(x)))
      return Rational{h0, k0};
    double frac = a - fl;
    if (frac < 1e-15) break;
    a = 1.0 / frac;
  }
  if (k0 > 0 && std::abs(static_cast<double>(h0) / static_cast<double>(k0) - x) <= tol * std::max(1.0, std::abs(x)))
    return Rational{h0, k0};
  return std::nullopt;
}

Vec kvec(const Mode& kl) {
  Vec k(static_cast<int>(kl.size()) - 1);
  for (int i = 0; i < k.size(); ++i) k[i] = kl[i];
  return k;
}

// d/dI of D^2h(I) k, i.e. the matrix (D^3h k)_{ij}.
Mat third_derivative_k(const Model& m, const Vec& I, const Mode& kl) {
  const int d = m.d();
  auto sp1 = JetSpace::get(d, 1);
  std::vector<RJet> X;
  for (int i = 0; i < d; ++i) X.push_back(RJet::variable(sp1, i, I[i]));
  Mat T = Mat::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    RJet gi(sp1, 0.0);
    for (int mm = 0; mm < d; ++mm)
      if (kl[mm]) gi += m.hess_of(i, mm, X) * static_cast<double>(kl[mm]);
    for (int j = 0; j < d; ++j) T(i, j) = gi.linear(j);
  }
  return T;
}

bool in_box(const ActionBox& box, const Vec& I, double pad = 0.0) { return box.contains(I, pad); }

}  // namespace

double resonance_function(const Model& m, const Mode& kl, const Vec& I) {
  const int d = m.d();
  Vec w = m.frequency(I);
  double f = kl[d];
  for (int i = 0; i < d; ++i) f += w[i] * kl[i];
  return f;
}

Vec resonance_gradient(const Model& m, const Mode& kl, const Vec& I) { return m.hessian_h(I) * kvec(kl); }

double resonance_distance(const Model& m, const Mode& kl, const Vec& I) {
  double g = resonance_gradient(m, kl, I).norm();
  double f = std::abs(resonance_function(m, kl, I));
  if (g == 0.0) return f == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return f / g;
}

std::string Resonance::equation() const {
  std::ostringstream os;
  const int d = static_cast<int>(kl.size()) - 1;
  if (affine) {
    std::vector<double> c(normal.data(), normal.data() + normal.size());
    c.push_back(offset);
    std::vector<Rational> r;
    bool ok = true;
    for (double x : c) {
      auto q = rationalize(x);
      if (!q) {
        ok = false;
        break;
      }
      r.push_back(*q);
    }
    if (ok) {
      long long L = 1;
      for (const auto& q : r) L = std::lcm(L, q.q);
      std::vector<long long> n;
      long long g = 0;
      for (const auto& q : r) {
        n.push_back(q.p * (L / q.q));
        g = std::gcd(g, std::llabs(n.back()));
      }
      if (g > 1)
        for (auto& x : n) x /= g;
      int sgn = 0;
      for (auto x : n)
        if (x) {
          sgn = x > 0 ? 1 : -1;
          break;
        }
      if (sgn < 0)
        for (auto& x : n) x = -x;
      bool first = true;
      for (int i = 0; i < d; ++i) {
        if (!n[i]) continue;
        long long a = n[i];
        if (!first) os << (a < 0 ? " - " : " + ");
        else if (a < 0) os << "-";
        long long aa = std::llabs(a);
        if (aa != 1) os << aa << "*";
        os << "I" << i + 1;
        first = false;
      }
      if (first) os << "0";
      if (n[d]) os << (n[d] < 0 ? " - " : " + ") << std::llabs(n[d]);
      os << " = 0";
      return os.str();
    }
  }
  os << "omega(I).(";
  for (int i = 0; i < d; ++i) os << (i ? "," : "") << kl[i];
  os << ") + " << kl[d] << " = 0";
  return os.str();
}

Projection project_k(const Model& m, const Vec& I, const Mode& kl) {
  Vec k = kvec(kl);
  if (k.norm() == 0.0) throw ProjectionError("projection along k = 0");
  Projection P;
  double t = 0.0;
  const double scale = k.squaredNorm() * std::max(1.0, m.hessian_h(I).norm());
  for (int it = 0; it < 60; ++it) {
    Vec x = I + t * k;
    double f = resonance_function(m, kl, x);
    double s = k.dot(m.hessian_h(x) * k);
    if (std::abs(s) <= 1e-12 * scale)
      throw ProjectionError("tangency: k^T D^2h k vanishes for " + mode_str(kl));
    double dt = f / s;
    t -= dt;
    P.iterations = it + 1;
    if (std::abs(dt) <= 1e-15 * std::max(1.0, std::abs(t))) break;
  }
  P.t = t;
  P.point = I + t * k;
  P.residual = std::abs(resonance_function(m, kl, P.point));
  if (!(P.residual <= 1e-10 * std::max(1.0, k.norm()))) throw ProjectionError("Newton did not converge onto " + mode_str(kl));
  double dist = resonance_distance(m, kl, I);
  double moved = (P.point - I).norm();
  P.comparability = dist > 0 ? std::max(1.0, moved / dist) : 1.0;
  return P;
}

Projection project_orth(const Model& m, const Vec& I, const Mode& kl) {
  const int d = m.d();
  Projection P;
  Vec g = resonance_gradient(m, kl, I);
  if (g.norm() == 0.0) throw ProjectionError("degenerate surface gradient for " + mode_str(kl));
  Vec X = I - resonance_function(m, kl, I) / g.squaredNorm() * g;
  double lam = 0.0;
  for (int it = 0; it < 60; ++it) {
    Vec gx = resonance_gradient(m, kl, X);
    lam = (I - X).dot(gx) / gx.squaredNorm();
    Mat J = Mat::Zero(d + 1, d + 1);
    Mat T = third_derivative_k(m, X, kl);
    J.topLeftCorner(d, d) = Mat::Identity(d, d) + lam * T;
    J.block(0, d, d, 1) = gx;
    J.block(d, 0, 1, d) = gx.transpose();
    Vec F(d + 1);
    F.head(d) = X - I + lam * gx;
    F[d] = resonance_function(m, kl, X);
    Vec del = J.partialPivLu().solve(F);
    X -= del.head(d);
    P.iterations = it + 1;
    if (del.head(d).norm() <= 1e-15 * std::max(1.0, X.norm())) break;
  }
  P.point = X;
  P.residual = std::abs(resonance_function(m, kl, X));
  if (!(P.residual <= 1e-10)) throw ProjectionError("orthogonal projection did not converge onto " + mode_str(kl));
  double dist = resonance_distance(m, kl, I);
  P.comparability = dist > 0 ? std::max(1.0, (X - I).norm() / dist) : 1.0;
  return P;
}

std::optional<Vec> project_constraints(const std::vector<Constraint>& cs, const Vec& I, double tol) {
  const int d = static_cast<int>(I.size());
  const int c = static_cast<int>(cs.size());
  Vec X = I;
  for (int it = 0; it < 100; ++it) {
    Mat J(c, d);
    Vec F(c);
    for (int r = 0; r < c; ++r) {
      F[r] = cs[r].f(X);
      J.row(r) = cs[r].grad(X).transpose();
    }
    Mat JJ = J * J.transpose();
    Eigen::FullPivLU<Mat> lu(JJ);
    if (lu.rank() < c) return std::nullopt;
    Vec step = J.transpose() * lu.solve(F);
    X -= step;
    if (step.norm() <= tol * std::max(1.0, X.norm())) {
      for (int r = 0; r < c; ++r)
        if (std::abs(cs[r].f(X)) > 1e-9) return std::nullopt;
      return X;
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// web

std::set<Mode> ResonanceWeb::indices_up_to(int N) const {
  std::set<Mode> out;
  for (int o = 1; o <= std::min(N, max_order()); ++o) out.insert(sets_[o - 1].begin(), sets_[o - 1].end());
  return out;
}

std::vector<Resonance> ResonanceWeb::of_order(int N) const {
  std::vector<Resonance> out;
  for (const auto& r : res_)
    if (r.order == N) out.push_back(r);
  return out;
}

std::vector<Resonance> ResonanceWeb::secular() const {
  std::vector<Resonance> out;
  for (const auto& r : res_)
    if (r.order <= 2) out.push_back(r);
  return out;
}

std::set<Mode> ResonanceWeb::secular_modes() const {
  std::set<Mode> out;
  for (const auto& r : res_)
    if (r.order <= 2) out.insert(r.kl);
  return out;
}

const Resonance* ResonanceWeb::find(const Mode& kl) const {
  Mode p = mode_primitive(kl);
  for (const auto& r : res_)
    if (r.kl == p) return &r;
  return nullptr;
}

namespace {

// Support of the order-o terms at p = q = 0 (coefficients not identically zero).
std::set<Mode> term_support(const Model& m, int order) {
  std::set<Mode> out;
  std::vector<std::string> slots;
  for (int i = 1; i <= m.d(); ++i) slots.push_back("I" + std::to_string(i));
  std::mt19937 rng(99);
  std::uniform_real_distribution<double> u(0, 1);
  for (const auto& t : m.inner_terms(order)) {
    if (mode_is_zero(t.kl)) continue;
    Compiled c(t.coeff, slots);
    bool nz = false;
    for (int s = 0; s < 8 && !nz; ++s) {
      Vec I(m.d());
      for (int i = 0; i < m.d(); ++i) I[i] = m.box().lo[i] + u(rng) * (m.box().hi[i] - m.box().lo[i]);
      if (c(I.data()) != 0.0) nz = true;
    }
    if (nz) out.insert(mode_canonical_sign(t.kl));
  }
  return out;
}

std::set<Mode> sumset(const std::set<Mode>& a, const std::set<Mode>& b) {
  std::set<Mode> out;
  for (const auto& x : a)
    for (const auto& y : b)
      for (int s : {1, -1}) {
        Mode z = s > 0 ? mode_add(x, y) : mode_add(x, mode_neg(y));
        if (!mode_is_zero(z)) out.insert(mode_canonical_sign(z));
      }
  return out;
}

}  // namespace

std::set<Mode> combinatorial_indices(const Model& m, int N) {
  std::vector<std::set<Mode>> sets(N + 1);
  for (int o = 1; o <= N; ++o) {
    sets[o] = term_support(m, o);
    for (int a = 1; a < o; ++a) {
      auto s = sumset(sets[a], sets[o - a]);
      sets[o].insert(s.begin(), s.end());
    }
  }
  return sets[N];
}

std::set<Mode> numeric_indices(const Model& m, int N, const WebOptions& opt) {
  if (N == 1) return term_support(m, 1);
  AveragingOptions ao;
  ao.m0 = std::max(1, N - 1);
  ao.jet_degree = std::max(opt.jet_degree, N);
  ao.L = 0.0;
  Averager avg(m, ao);
  // generic points: away from every candidate resonance of order <= N
  std::set<Mode> cand;
  for (int o = 1; o <= N; ++o) {
    auto s = combinatorial_indices(m, o);
    cand.insert(s.begin(), s.end());
  }
  std::mt19937 rng(opt.seed);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  std::vector<Vec> pts;
  for (int tries = 0; tries < 20000 && static_cast<int>(pts.size()) < opt.samples; ++tries) {
    Vec I(m.d());
    for (int i = 0; i < m.d(); ++i) I[i] = m.box().lo[i] + u(rng) * (m.box().hi[i] - m.box().lo[i]);
    bool ok = true;
    for (const auto& c : cand) {
      if (k_is_zero(c)) continue;
      if (resonance_distance(m, c, I) < 0.02) {
        ok = false;
        break;
      }
    }
    if (ok) pts.push_back(I);
  }
  if (pts.empty()) throw std::runtime_error("no generic sample points found in the action box");
  std::map<Mode, double> mag;
  double top = 0;
  for (const auto& I : pts) {
    auto ap = avg.average(I, N - 1);
    for (const auto& [mm, c] : ap->K[N].modes()) {
      if (mode_is_zero(mm)) continue;
      double a = std::abs(c.c0());
      Mode cm = mode_canonical_sign(mm);
      mag[cm] = std::max(mag[cm], a);
      top = std::max(top, a);
    }
  }
  std::set<Mode> out;
  for (const auto& [mm, a] : mag)
    if (a > opt.support_tol * top && a > 0) out.insert(mm);
  return out;
}

std::set<Mode> activated_indices(const Model& m, int N, const WebOptions& opt) {
  return opt.support == SupportMode::Numeric ? numeric_indices(m, N, opt) : combinatorial_indices(m, N);
}

ResonanceWeb build_web(const Model& m, const WebOptions& opt) {
  ResonanceWeb w;
  w.m_ = &m;
  w.opt_ = opt;
  for (int N = 1; N <= opt.max_order; ++N) w.sets_.push_back(activated_indices(m, N, opt));
  std::set<Mode> seen;
  for (int N = 1; N <= opt.max_order; ++N) {
    for (const auto& idx : w.sets_[N - 1]) {
      if (k_is_zero(idx)) continue;
      Mode p = mode_primitive(idx);
      if (!seen.insert(p).second) continue;
      Resonance r;
      r.kl = p;
      r.order = N;
      r.affine = m.h_quadratic();
      if (r.affine) {
        Vec z = Vec::Zero(m.d());
        r.normal = resonance_gradient(m, p, z);
        r.offset = resonance_function(m, p, z);
      }
      w.res_.push_back(r);
    }
  }
  std::stable_sort(w.res_.begin(), w.res_.end(), [](const Resonance& a, const Resonance& b) {
    if (a.order != b.order) return a.order < b.order;
    return a.kl > b.kl;
  });
  return w;
}

// ---------------------------------------------------------------------------
// ranks

int integer_rank(const std::vector<Mode>& rows) {
  if (rows.empty()) return 0;
  const int n = static_cast<int>(rows[0].size());
  std::vector<std::vector<long long>> a;
  for (const auto& r : rows) a.emplace_back(r.begin(), r.end());
  int rank = 0;
  for (int col = 0; col < n && rank < static_cast<int>(a.size()); ++col) {
    int piv = -1;
    for (int r = rank; r < static_cast<int>(a.size()); ++r)
      if (a[r][col] != 0 && (piv < 0 || std::llabs(a[r][col]) < std::llabs(a[piv][col]))) piv = r;
    if (piv < 0) continue;
    std::swap(a[rank], a[piv]);
    for (int r = rank + 1; r < static_cast<int>(a.size()); ++r) {
      if (a[r][col] == 0) continue;
      long long p = a[rank][col], q = a[r][col];
      long long g = 0;
      for (int c = 0; c < n; ++c) {
        a[r][c] = a[r][c] * p - a[rank][c] * q;
        g = std::gcd(g, std::llabs(a[r][c]));
      }
      if (g > 1)
        for (int c = 0; c < n; ++c) a[r][c] /= g;
    }
    ++rank;
  }
  return rank;
}

int float_rank(const std::vector<Mode>& rows, double tol) {
  if (rows.empty()) return 0;
  Mat A(rows.size(), rows[0].size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[0].size(); ++c) A(r, c) = rows[r][c];
  Eigen::FullPivLU<Mat> lu(A);
  lu.setThreshold(tol);
  return static_cast<int>(lu.rank());
}

std::vector<Mode> active_indices(const Vec& omega_ext, int N, const ResonanceWeb& web, double tol) {
  std::vector<Mode> out;
  for (const auto& idx : web.indices_up_to(N)) {
    if (k_is_zero(idx)) continue;
    double f = 0;
    for (int i = 0; i < omega_ext.size(); ++i) f += omega_ext[i] * idx[i];
    if (std::abs(f) <= tol) out.push_back(idx);
  }
  return out;
}

int multiplicity(const Vec& omega_ext, int N, const ResonanceWeb& web, double tol) {
  return integer_rank(active_indices(omega_ext, N, web, tol));
}

// ---------------------------------------------------------------------------
// reduced domain

std::string component_label(const CodimTwo& c) {
  if (c.kind == "degenerate") return "degenerate locus on " + mode_str(c.a);
  return "intersection " + mode_str(c.a) + " x " + mode_str(c.b);
}

namespace {

Constraint surface_constraint(const Model& m, const Mode& kl) {
  return {[&m, kl](const Vec& I) { return resonance_function(m, kl, I); },
          [&m, kl](const Vec& I) { return resonance_gradient(m, kl, I); }};
}

Constraint tangency_constraint(const Model& m, const Mode& kl) {
  return {[&m, kl](const Vec& I) {
            Vec k = kvec(kl);
            return k.dot(m.hessian_h(I) * k);
          },
          [&m, kl](const Vec& I) {
            Vec k = kvec(kl);
            return Vec(third_derivative_k(m, I, kl).transpose() * k);
          }};
}

}  // namespace

double ReducedDomain::clearance(const Vec& I, Vec* nearest, std::string* label) const {
  const Model& m = web_->model();
  double best = std::numeric_limits<double>::infinity();
  for (const auto& c : comps_) {
    double dist = best;
    Vec near;
    if (!c.points.empty()) {
      for (const auto& P : c.points) {
        double dd = (P - I).norm();
        if (dd < dist) {
          dist = dd;
          near = P;
        }
      }
    } else if (c.whole_surface) {
      try {
        near = project_orth(m, I, c.a).point;
        dist = (near - I).norm();
      } catch (const ProjectionError&) {
        continue;
      }
    } else {
      std::vector<Constraint> cs = {surface_constraint(m, c.a)};
      if (c.kind == "degenerate")
        cs.push_back(tangency_constraint(m, c.a));
      else
        cs.push_back(surface_constraint(m, c.b));
      auto X = project_constraints(cs, I);
      if (!X) continue;
      near = *X;
      dist = (near - I).norm();
    }
    if (dist < best) {
      best = dist;
      if (nearest) *nearest = near;
      if (label) *label = component_label(c);
    }
  }
  return best;
}

bool ReducedDomain::contains(const Vec& I) const {
  return web_->model().box().contains(I) && clearance(I) > delta_;
}

PathCheck ReducedDomain::check_path(const std::vector<Vec>& path) const {
  PathCheck pc;
  pc.min_clearance = std::numeric_limits<double>::infinity();
  if (path.empty()) return pc;
  auto visit = [&](const Vec& x) {
    Vec near;
    std::string lab;
    double c = clearance(x, &near, &lab);
    if (c < pc.min_clearance) {
      pc.min_clearance = c;
      pc.witness = near;
      pc.path_point = x;
      pc.component = lab;
    }
  };
  visit(path[0]);
  const double h = delta_ / 4.0;
  for (std::size_t s = 1; s < path.size(); ++s) {
    Vec a = path[s - 1], b = path[s];
    double len = (b - a).norm();
    int n = std::max(1, static_cast<int>(std::ceil(len / h)));
    for (int i = 1; i <= n; ++i) visit(a + (b - a) * (static_cast<double>(i) / n));
  }
  pc.accepted = pc.min_clearance > delta_;
  return pc;
}

double ReducedDomain::secular_separation(Mode* ma, Mode* mb) const {
  const Model& m = web_->model();
  const auto sec = web_->secular();
  const ActionBox& box = m.box();
  const int d = m.d();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < sec.size(); ++i) {
    // samples of R_a inside the box and outside the delta-balls
    std::vector<Vec> samples;
    if (d == 2 && sec[i].affine) {
      // exact: clip the line to the box, cut out delta-intervals around B, test interval ends
      const Vec& nrm = sec[i].normal;
      Vec dir(2);
      dir << -nrm[1], nrm[0];
      dir.normalize();
      Vec p0 = -sec[i].offset / nrm.squaredNorm() * nrm;
      double tlo = -std::numeric_limits<double>::infinity(), thi = std::numeric_limits<double>::infinity();
      bool empty = false;
      for (int c = 0; c < 2; ++c) {
        if (std::abs(dir[c]) < 1e-15) {
          if (p0[c] < box.lo[c] || p0[c] > box.hi[c]) empty = true;
          continue;
        }
        double t1 = (box.lo[c] - p0[c]) / dir[c], t2 = (box.hi[c] - p0[c]) / dir[c];
        tlo = std::max(tlo, std::min(t1, t2));
        thi = std::min(thi, std::max(t1, t2));
      }
      if (empty || tlo > thi) continue;
      std::vector<std::pair<double, double>> cut;
      for (const auto& c : comps_)
        for (const auto& P : c.points) {
          double t = (P - p0).dot(dir);
          double off = (P - p0 - t * dir).norm();
          if (off >= delta_) continue;
          double hw = std::sqrt(delta_ * delta_ - off * off);
          cut.push_back({t - hw, t + hw});
        }
      std::sort(cut.begin(), cut.end());
      std::vector<double> ends;
      double cur = tlo;
      for (const auto& [a, b] : cut) {
        if (b < cur) continue;
        if (a > thi) break;
        if (a > cur) {
          ends.push_back(cur);
          ends.push_back(a);
        }
        cur = std::max(cur, b);
      }
      if (cur <= thi) {
        ends.push_back(cur);
        ends.push_back(thi);
      }
      for (double t : ends) samples.push_back(p0 + t * dir);
    } else {
      int g = std::max(5, static_cast<int>(std::round(std::pow(4096.0, 1.0 / d))));
      std::vector<int> idx(d, 0);
      for (;;) {
        Vec I(d);
        for (int c = 0; c < d; ++c) I[c] = box.lo[c] + (box.hi[c] - box.lo[c]) * idx[c] / (g - 1);
        try {
          Vec X = project_orth(m, I, sec[i].kl).point;
          if (box.contains(X) && clearance(X) >= delta_) samples.push_back(X);
        } catch (const ProjectionError&) {
        }
        int c = 0;
        while (c < d && ++idx[c] == g) idx[c++] = 0;
        if (c == d) break;
      }
    }
    for (std::size_t j = 0; j < sec.size(); ++j) {
      if (j == i) continue;
      for (const auto& x : samples) {
        double dist = resonance_distance(m, sec[j].kl, x);
        if (!sec[j].affine) {
          try {
            dist = (project_orth(m, x, sec[j].kl).point - x).norm();
          } catch (const ProjectionError&) {
          }
        }
        if (dist < best) {
          best = dist;
          if (ma) *ma = sec[i].kl;
          if (mb) *mb = sec[j].kl;
        }
      }
    }
  }
  return best;
}

TubeCheck ReducedDomain::check_tube(double L) const {
  TubeCheck tc;
  tc.L = L;
  tc.min_separation = secular_separation(&tc.a, &tc.b);
  tc.ok = L > 0 && 2 * L <= tc.min_separation * (1 + 1e-12);
  return tc;
}

ReducedDomain build_reduced_domain(const ResonanceWeb& web, double delta, int m0, double L) {
  if (!(delta > 0)) throw std::invalid_argument("delta must be positive");
  if (web.max_order() < std::min(m0, 2)) throw std::invalid_argument("resonance web built below order 2");
  ReducedDomain D;
  D.web_ = &web;
  D.delta_ = delta;
  D.m0_ = m0;
  const Model& m = web.model();
  for (const auto& r : web.resonances())
    if (r.order <= m0) D.pool_.push_back(r);
  const auto sec = web.secular();
  const int d = m.d();
  for (std::size_t i = 0; i < sec.size(); ++i) {
    for (const auto& r : D.pool_) {
      if (r.kl == sec[i].kl) continue;
      // secular pairs once
      if (r.order <= 2) {
        auto it = std::find_if(sec.begin(), sec.end(), [&](const Resonance& s) { return s.kl == r.kl; });
        if (static_cast<std::size_t>(it - sec.begin()) < i) continue;
      }
      CodimTwo c;
      c.a = sec[i].kl;
      c.b = r.kl;
      c.kind = "intersection";
      if (sec[i].affine && r.affine) {
        if (d == 2) {
          Mat A(2, 2);
          A.row(0) = sec[i].normal.transpose();
          A.row(1) = r.normal.transpose();
          if (std::abs(A.determinant()) <= 1e-12 * A.norm() * A.norm()) continue;  // parallel
          Vec b(2);
          b << -sec[i].offset, -r.offset;
          c.points.push_back(A.lu().solve(b));
        } else {
          Mat A(2, d);
          A.row(0) = sec[i].normal.transpose();
          A.row(1) = r.normal.transpose();
          if (Eigen::FullPivLU<Mat>(A).rank() < 2) continue;
        }
      }
      D.comps_.push_back(c);
    }
    // degenerate locus {f = 0, k^T D^2h k = 0}
    Vec k = kvec(sec[i].kl);
    if (m.h_quadratic()) {
      Mat H = m.hessian_h(Vec::Zero(d));
      if (std::abs(k.dot(H * k)) <= 1e-12 * k.squaredNorm() * std::max(1.0, H.norm())) {
        CodimTwo c;
        c.a = sec[i].kl;
        c.kind = "degenerate";
        c.whole_surface = true;
        D.comps_.push_back(c);
      }
    } else {
      CodimTwo c;
      c.a = sec[i].kl;
      c.kind = "degenerate";
      // keep only if the locus is met somewhere in the box
      bool met = false;
      const ActionBox& box = m.box();
      int g = 5;
      std::vector<int> idx(d, 0);
      std::vector<Constraint> cs = {surface_constraint(m, c.a), tangency_constraint(m, c.a)};
      for (;;) {
        Vec I(d);
        for (int q = 0; q < d; ++q) I[q] = box.lo[q] + (box.hi[q] - box.lo[q]) * idx[q] / (g - 1);
        auto X = project_constraints(cs, I);
        if (X && box.contains(*X, 0.5)) {
          met = true;
          if (d == 2) c.points.push_back(*X);
        }
        int q = 0;
        while (q < d && ++idx[q] == g) idx[q++] = 0;
        if (q == d) break;
      }
      if (d == 2 && met) {
        // dedupe
        std::vector<Vec> u;
        for (const auto& P : c.points)
          if (std::none_of(u.begin(), u.end(), [&](const Vec& Q) { return (Q - P).norm() < 1e-8; })) u.push_back(P);
        c.points = u;
      }
      if (met) D.comps_.push_back(c);
    }
  }
  if (L > 0) {
    D.L_ = L;
  } else {
    double sep = D.secular_separation();
    if (!std::isfinite(sep)) {
      double w = std::numeric_limits<double>::infinity();
      for (int q = 0; q < d; ++q) w = std::min(w, m.box().hi[q] - m.box().lo[q]);
      sep = 0.2 * w;
    }
    D.L_ = 0.5 * sep;
    bool degenerate = std::any_of(D.comps_.begin(), D.comps_.end(), [](const CodimTwo& c) { return c.kind == "degenerate"; });
    if (degenerate) D.L_ *= 0.5;
  }
  return D;
}

}  // namespace resonet
