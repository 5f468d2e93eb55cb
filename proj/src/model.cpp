#include "resonet/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace resonet {

bool ActionBox::contains(const Vec& I, double pad) const {
  for (int i = 0; i < I.size(); ++i)
    if (I[i] < lo[i] - pad || I[i] > hi[i] + pad) return false;
  return true;
}

void ExtendedState::normalize() {
  const double tp = 2 * std::numbers::pi;
  for (int i = 0; i < phi.size(); ++i) {
    phi[i] = std::fmod(phi[i], tp);
    if (phi[i] < 0) phi[i] += tp;
  }
  s = std::fmod(s, tp);
  if (s < 0) s += tp;
}

std::vector<std::string> slot_names(int d, int n) {
  std::vector<std::string> s;
  for (int i = 1; i <= d; ++i) s.push_back("I" + std::to_string(i));
  for (int j = 1; j <= n; ++j) s.push_back("p" + std::to_string(j));
  for (int j = 1; j <= n; ++j) s.push_back("q" + std::to_string(j));
  return s;
}

std::vector<FourierTerm> canonicalize(const std::vector<FourierTerm>& terms) {
  std::vector<FourierTerm> out;
  for (const auto& t0 : terms) {
    FourierTerm t = t0;
    if (mode_sign(t.kl) < 0) {
      t.kl = mode_neg(t.kl);
      if (t.basis == Basis::Sin) t.coeff = -t.coeff;
    }
    if (mode_is_zero(t.kl) && t.basis == Basis::Sin) continue;
    bool merged = false;
    for (auto& o : out)
      if (o.kl == t.kl && o.basis == t.basis && o.order == t.order) {
        o.coeff = o.coeff + t.coeff;
        merged = true;
        break;
      }
    if (!merged) out.push_back(t);
  }
  std::sort(out.begin(), out.end(), [](const FourierTerm& a, const FourierTerm& b) {
    if (a.order != b.order) return a.order < b.order;
    if (a.kl != b.kl) return a.kl < b.kl;
    return a.basis < b.basis;
  });
  return out;
}

bool equivalent(const std::vector<FourierTerm>& a0, const std::vector<FourierTerm>& b0, int d, int n) {
  auto a = canonicalize(a0);
  auto b = canonicalize(b0);
  auto slots = slot_names(d, n);
  std::vector<std::vector<double>> pts;
  for (int s = 0; s < 7; ++s) {
    std::vector<double> x;
    for (std::size_t i = 0; i < slots.size(); ++i) x.push_back(0.37 + 0.61 * s - 0.29 * static_cast<double>(i) * (s % 3));
    pts.push_back(x);
  }
  auto nonzero = [&](const std::vector<FourierTerm>& v) {
    std::vector<FourierTerm> r;
    for (const auto& t : v) {
      Compiled c(t.coeff, slots);
      bool nz = false;
      for (const auto& x : pts)
        if (std::abs(c(std::span<const double>(x))) > 1e-13) nz = true;
      if (nz) r.push_back(t);
    }
    return r;
  };
  a = nonzero(a);
  b = nonzero(b);
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].kl != b[i].kl || a[i].basis != b[i].basis || a[i].order != b[i].order) return false;
    Compiled ca(a[i].coeff, slots), cb(b[i].coeff, slots);
    for (const auto& x : pts) {
      double u = ca(std::span<const double>(x)), v = cb(std::span<const double>(x));
      if (std::abs(u - v) > 1e-12 * (1 + std::abs(u))) return false;
    }
  }
  return true;
}

namespace {

bool numerically_zero(const Expr& e, const std::vector<std::string>& slots) {
  if (e.is_const()) return e.value() == 0.0;
  Compiled c(e, slots);
  std::vector<double> x(slots.size());
  for (int s = 0; s < 9; ++s) {
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = 0.3 + 0.71 * s + 0.13 * static_cast<double>(i);
    try {
      if (std::abs(c(std::span<const double>(x))) > 1e-13) return false;
    } catch (const EvalError&) {
      return false;
    }
  }
  return true;
}

std::vector<std::string> param_names(const ModelConfig& cfg) {
  std::vector<std::string> p;
  for (const auto& [k, v] : cfg.params) p.push_back(k);
  return p;
}

Expr parse_field(const std::string& text, const ModelConfig& cfg, const std::string& what) {
  try {
    return substitute(parse(text, param_names(cfg)), cfg.params);
  } catch (const ParseError& e) {
    throw ModelError("", what + ": " + e.what());
  }
}

}  // namespace

Model build_model(const ModelConfig& cfg) {
  Model m;
  if (cfg.d < 1) throw ModelError("", "rotator dimension d must be >= 1");
  if (cfg.pendula.empty()) throw ModelError("H2", "at least one pendulum is required");
  m.d_ = cfg.d;
  m.n_ = static_cast<int>(cfg.pendula.size());
  m.params_ = cfg.params;
  m.grid_ = cfg.grid;
  m.box_ = cfg.box;
  if (m.box_.lo.empty()) {
    m.box_.lo.assign(m.d_, 0.0);
    m.box_.hi.assign(m.d_, 1.0);
  }
  if (static_cast<int>(m.box_.lo.size()) != m.d_ || static_cast<int>(m.box_.hi.size()) != m.d_)
    throw ModelError("", "action box dimension does not match d");

  std::vector<std::string> Inames;
  for (int i = 1; i <= m.d_; ++i) Inames.push_back("I" + std::to_string(i));

  m.h_ = parse_field(cfg.h, cfg, "h");
  for (const auto& v : m.h_.variables())
    if (std::find(Inames.begin(), Inames.end(), v) == Inames.end())
      throw ModelError("", "h depends on '" + v + "'; only I1..Id are allowed");
  m.h_c_ = Compiled(m.h_, Inames);
  for (int i = 0; i < m.d_; ++i) {
    m.grad_.push_back(diff(m.h_, Inames[i]));
    m.grad_c_.emplace_back(m.grad_.back(), Inames);
  }
  bool quad = true;
  for (int i = 0; i < m.d_; ++i)
    for (int j = 0; j < m.d_; ++j) {
      m.hess_.push_back(diff(m.grad_[i], Inames[j]));
      m.hess_c_.emplace_back(m.hess_.back(), Inames);
      for (int k = 0; k < m.d_; ++k)
        if (!numerically_zero(diff(m.hess_.back(), Inames[k]), Inames)) quad = false;
    }
  m.h_quadratic_ = quad;

  for (int j = 0; j < m.n_; ++j) {
    const auto& ps = cfg.pendula[j];
    std::string qn = "q" + std::to_string(j + 1);
    Expr V = parse_field(ps.V, cfg, "V" + std::to_string(j + 1));
    for (const auto& v : V.variables())
      if (v != qn) throw ModelError("", "V" + std::to_string(j + 1) + " depends on '" + v + "'");
    if (ps.sign != 1 && ps.sign != -1) throw ModelError("", "pendulum sign must be +1 or -1");
    m.V_.push_back(V);
    Expr dV = diff(V, qn);
    Expr ddV = diff(dV, qn);
    m.V_c_.emplace_back(V, std::vector<std::string>{qn});
    m.dV_c_.emplace_back(dV, std::vector<std::string>{qn});
    m.ddV_c_.emplace_back(ddV, std::vector<std::string>{qn});
    m.sign_.push_back(ps.sign);
    double z = 0.0;
    double v1 = m.dV_c_.back()(&z), v2 = m.ddV_c_.back()(&z);
    if (std::abs(v1) > 1e-12)
      throw ModelError("H2", "V" + std::to_string(j + 1) + "'(0) = " + std::to_string(v1) + " != 0");
    if (!(v2 < 0))
      throw ModelError("H2", "V" + std::to_string(j + 1) + "''(0) = " + std::to_string(v2) +
                                 " >= 0; the origin is not a non-degenerate maximum");
  }

  // H3 on the verification grid
  {
    int g = std::max(2, m.grid_);
    std::vector<int> idx(m.d_, 0);
    Vec I(m.d_);
    for (;;) {
      for (int i = 0; i < m.d_; ++i)
        I[i] = m.box_.lo[i] + (m.box_.hi[i] - m.box_.lo[i]) * idx[i] / (g - 1);
      Mat H = m.hessian_h(I);
      double det = H.determinant();
      double scale = std::max(1e-300, std::pow(H.cwiseAbs().maxCoeff(), m.d_));
      if (!std::isfinite(det) || std::abs(det) <= 1e-12 * scale) {
        std::ostringstream os;
        os << "D^2h is singular at I = (" << I.transpose() << "), det = " << det;
        throw ModelError("H3", os.str());
      }
      int k = 0;
      while (k < m.d_ && ++idx[k] == g) idx[k++] = 0;
      if (k == m.d_) break;
    }
  }

  auto slots = slot_names(m.d_, m.n_);
  std::vector<FourierTerm> raw;
  for (const auto& ts : cfg.terms) {
    if (static_cast<int>(ts.k.size()) != m.d_)
      throw ModelError("H4", "malformed Fourier index at line " + std::to_string(ts.line) + ": k has " +
                                 std::to_string(ts.k.size()) + " entries, expected " + std::to_string(m.d_));
    FourierTerm t;
    t.kl = ts.k;
    t.kl.push_back(ts.l);
    if (ts.basis == "cos")
      t.basis = Basis::Cos;
    else if (ts.basis == "sin")
      t.basis = Basis::Sin;
    else
      throw ModelError("H4", "unknown basis '" + ts.basis + "' at line " + std::to_string(ts.line));
    if (ts.order < 1) throw ModelError("H4", "term order must be >= 1 at line " + std::to_string(ts.line));
    t.order = ts.order;
    t.coeff = parse_field(ts.coeff, cfg, "coefficient at line " + std::to_string(ts.line));
    for (const auto& v : t.coeff.variables())
      if (std::find(slots.begin(), slots.end(), v) == slots.end())
        throw ModelError("H4", "coefficient at line " + std::to_string(ts.line) + " depends on '" + v +
                                   "'; angles and time enter only through (k,l)");
    raw.push_back(t);
  }
  m.terms_ = canonicalize(raw);

  m.lambda_invariant_ = true;
  std::map<std::string, double> at_origin;
  for (int j = 1; j <= m.n_; ++j) {
    at_origin["p" + std::to_string(j)] = 0.0;
    at_origin["q" + std::to_string(j)] = 0.0;
  }
  for (const auto& t : m.terms_) {
    Model::TermCode tc;
    tc.c = Compiled(t.coeff, slots);
    for (int i = 0; i < m.d_; ++i) {
      Expr e = diff(t.coeff, slots[i]);
      tc.dI_e.push_back(e);
      tc.dI.emplace_back(e, slots);
      if (!e.is_const(0.0)) m.q_dep_I_ = true;
    }
    for (int j = 0; j < m.n_; ++j) {
      Expr ep = diff(t.coeff, slots[m.d_ + j]);
      Expr eq = diff(t.coeff, slots[m.d_ + m.n_ + j]);
      tc.dp.emplace_back(ep, slots);
      tc.dq.emplace_back(eq, slots);
      if (!ep.is_const(0.0)) {
        tc.has_p = true;
        m.q_dep_p_ = true;
      }
      if (!eq.is_const(0.0)) tc.has_q = true;
      if (!numerically_zero(substitute(ep, at_origin), slots) || !numerically_zero(substitute(eq, at_origin), slots))
        m.lambda_invariant_ = false;
    }
    m.tc_.push_back(std::move(tc));
  }
  return m;
}

int Model::max_order() const {
  int o = 0;
  for (const auto& t : terms_) o = std::max(o, t.order);
  return o;
}

double Model::h(const Vec& I) const { return h_c_(I.data()); }

Vec Model::frequency(const Vec& I) const {
  Vec w(d_);
  for (int i = 0; i < d_; ++i) w[i] = grad_c_[i](I.data());
  return w;
}

Mat Model::hessian_h(const Vec& I) const {
  Mat H(d_, d_);
  for (int i = 0; i < d_; ++i)
    for (int j = 0; j < d_; ++j) H(i, j) = hess_c_[i * d_ + j](I.data());
  return H;
}

double Model::V(int j, double q) const { return V_c_[j](&q); }
double Model::dV(int j, double q) const { return dV_c_[j](&q); }
double Model::ddV(int j, double q) const { return ddV_c_[j](&q); }
double Model::pendulum_energy(int j, double p, double q) const { return sign_[j] * (0.5 * p * p + V(j, q)); }

namespace {
inline double trig(Basis b, double th) { return b == Basis::Cos ? std::cos(th) : std::sin(th); }
inline double dtrig(Basis b, double th) { return b == Basis::Cos ? -std::sin(th) : std::cos(th); }
}  // namespace

double Model::Q(const ExtendedState& x, double eps) const {
  std::vector<double> slot(d_ + 2 * n_);
  for (int i = 0; i < d_; ++i) slot[i] = x.I[i];
  for (int j = 0; j < n_; ++j) {
    slot[d_ + j] = x.p[j];
    slot[d_ + n_ + j] = x.q[j];
  }
  double s = 0;
  for (std::size_t t = 0; t < terms_.size(); ++t) {
    const auto& ft = terms_[t];
    double th = ft.kl[d_] * x.s;
    for (int i = 0; i < d_; ++i) th += ft.kl[i] * x.phi[i];
    s += std::pow(eps, ft.order - 1) * tc_[t].c(slot.data()) * trig(ft.basis, th);
  }
  return s;
}

double Model::hamiltonian(const ExtendedState& x, double eps) const {
  double H = h(x.I);
  for (int j = 0; j < n_; ++j) H += pendulum_energy(j, x.p[j], x.q[j]);
  return H + eps * Q(x, eps);
}

void Model::rhs(const double* y, double s, double eps, double* dy) const {
  const double* I = y;
  const double* phi = y + d_;
  const double* p = y + 2 * d_;
  const double* q = y + 2 * d_ + n_;
  double* dI = dy;
  double* dphi = dy + d_;
  double* dp = dy + 2 * d_;
  double* dq = dy + 2 * d_ + n_;
  double& dE = dy[2 * d_ + 2 * n_];
  double slot[64];
  std::vector<double> big;
  double* sl = slot;
  if (d_ + 2 * n_ > 64) {
    big.resize(d_ + 2 * n_);
    sl = big.data();
  }
  for (int i = 0; i < d_; ++i) sl[i] = I[i];
  for (int j = 0; j < n_; ++j) {
    sl[d_ + j] = p[j];
    sl[d_ + n_ + j] = q[j];
  }
  for (int i = 0; i < d_; ++i) {
    dI[i] = 0;
    dphi[i] = grad_c_[i](sl);
  }
  for (int j = 0; j < n_; ++j) {
    dp[j] = -sign_[j] * dV_c_[j](&q[j]);
    dq[j] = sign_[j] * p[j];
  }
  dE = 0;
  if (eps == 0.0) return;
  for (std::size_t t = 0; t < terms_.size(); ++t) {
    const auto& ft = terms_[t];
    const auto& tc = tc_[t];
    const double w = std::pow(eps, ft.order);
    double th = ft.kl[d_] * s;
    for (int i = 0; i < d_; ++i) th += ft.kl[i] * phi[i];
    const double c = tc.c(sl);
    const double tr = trig(ft.basis, th), dtr = dtrig(ft.basis, th);
    for (int i = 0; i < d_; ++i) {
      if (ft.kl[i]) dI[i] -= w * c * ft.kl[i] * dtr;
      if (!tc.dI[i].is_constant() || tc.dI[i].constant_value() != 0) dphi[i] += w * tc.dI[i](sl) * tr;
    }
    for (int j = 0; j < n_; ++j) {
      if (tc.has_q) dp[j] -= w * tc.dq[j](sl) * tr;
      if (tc.has_p) dq[j] += w * tc.dp[j](sl) * tr;
    }
    if (ft.kl[d_]) dE -= w * c * ft.kl[d_] * dtr;
  }
}

StateDerivative Model::vector_field(const ExtendedState& x, double eps) const {
  std::vector<double> y(flat_size()), dy(flat_size());
  for (int i = 0; i < d_; ++i) {
    y[i] = x.I[i];
    y[d_ + i] = x.phi[i];
  }
  for (int j = 0; j < n_; ++j) {
    y[2 * d_ + j] = x.p[j];
    y[2 * d_ + n_ + j] = x.q[j];
  }
  rhs(y.data(), x.s, eps, dy.data());
  StateDerivative r;
  r.I = Eigen::Map<Vec>(dy.data(), d_);
  r.phi = Eigen::Map<Vec>(dy.data() + d_, d_);
  r.p = Eigen::Map<Vec>(dy.data() + 2 * d_, n_);
  r.q = Eigen::Map<Vec>(dy.data() + 2 * d_ + n_, n_);
  r.s = 1.0;
  return r;
}

std::vector<FourierTerm> Model::inner_terms(int order) const {
  std::map<std::string, double> origin;
  for (int j = 1; j <= n_; ++j) {
    origin["p" + std::to_string(j)] = 0.0;
    origin["q" + std::to_string(j)] = 0.0;
  }
  std::vector<FourierTerm> out;
  for (const auto& t : terms_) {
    if (order > 0 && t.order != order) continue;
    FourierTerm r = t;
    r.coeff = substitute(t.coeff, origin);
    out.push_back(r);
  }
  return out;
}

double Model::inner_hamiltonian_k1(const Vec& I, const Vec& phi, double s) const {
  std::vector<double> slot(d_ + 2 * n_, 0.0);
  for (int i = 0; i < d_; ++i) slot[i] = I[i];
  double r = 0;
  for (std::size_t t = 0; t < terms_.size(); ++t) {
    const auto& ft = terms_[t];
    if (ft.order != 1) continue;
    double th = ft.kl[d_] * s;
    for (int i = 0; i < d_; ++i) th += ft.kl[i] * phi[i];
    r += tc_[t].c(slot.data()) * trig(ft.basis, th);
  }
  return r;
}

std::string Model::describe() const {
  std::ostringstream os;
  os << "d=" << d_ << " n=" << n_ << " h=" << h_.str();
  for (int j = 0; j < n_; ++j) os << " V" << j + 1 << "=" << V_[j].str() << " sign=" << sign_[j];
  for (const auto& t : terms_)
    os << " [" << mode_str(t.kl) << " " << (t.basis == Basis::Cos ? "cos" : "sin") << " " << t.coeff.str()
       << " order=" << t.order << "]";
  return os.str();
}

ModelConfig three_mode_config(double Omega1, double Omega2, double a1, double a2, double a3) {
  ModelConfig c;
  c.d = 2;
  c.h = "0.5*Omega1*I1^2 + 0.5*Omega2*I2^2";
  c.pendula.push_back({"cos(q1) - 1", +1});
  c.terms.push_back({{1, 0}, 0, "cos", "a1*cos(q1)", 1, 0});
  c.terms.push_back({{0, 1}, 0, "cos", "a2*cos(q1)", 1, 0});
  c.terms.push_back({{1, 1}, -1, "cos", "a3*cos(q1)", 1, 0});
  c.params = {{"Omega1", Omega1}, {"Omega2", Omega2}, {"a1", a1}, {"a2", a2}, {"a3", a3}};
  c.box.lo = {0.0, 0.0};
  c.box.hi = {2.0, 2.0};
  c.grid = 33;
  return c;
}

}  // namespace resonet
