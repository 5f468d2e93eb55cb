#pragma once

#include <cmath>
#include <complex>
#include <memory>
#include <stdexcept>
#include <type_traits>
#include <vector>

namespace resonet {

// Monomial table for truncated Taylor polynomials in nv variables, total degree <= deg.
// Monomials are graded: index 0 is the constant, 1..nv the linear terms.
class JetSpace {
 public:
  static std::shared_ptr<const JetSpace> get(int nv, int deg);

  int nv() const { return nv_; }
  int deg() const { return deg_; }
  int size() const { return static_cast<int>(exps_.size()); }
  const std::vector<int>& exps(int i) const { return exps_[i]; }
  int degree(int i) const { return degs_[i]; }
  int index(const std::vector<int>& e) const;
  // mul[i] lists (j, r) with monomial i * monomial j = monomial r
  const std::vector<std::pair<int, int>>& mul(int i) const { return mul_[i]; }
  // dmap[v][i] = (r, factor): d/dx_v of monomial i is factor * monomial r (r < 0 if zero)
  const std::vector<std::pair<int, int>>& dmap(int v) const { return dmap_[v]; }

 private:
  JetSpace(int nv, int deg);
  int nv_, deg_;
  std::vector<std::vector<int>> exps_;
  std::vector<int> degs_;
  std::vector<std::vector<std::pair<int, int>>> mul_;
  std::vector<std::vector<std::pair<int, int>>> dmap_;
  std::vector<int> lookup_;
  std::vector<int> stride_;
};

using SpacePtr = std::shared_ptr<const JetSpace>;

template <class T>
class Jet {
 public:
  using value_type = T;

  Jet() = default;
  explicit Jet(SpacePtr sp, T c0 = T(0)) : sp_(std::move(sp)), c_(sp_->size(), T(0)) { c_[0] = c0; }
  Jet(SpacePtr sp, std::vector<T> coeffs) : sp_(std::move(sp)), c_(std::move(coeffs)) {}

  static Jet variable(SpacePtr sp, int v, T base) {
    Jet j(sp, base);
    j.c_[1 + v] = T(1);
    return j;
  }

  template <class U>
  static Jet from(const Jet<U>& o) {
    std::vector<T> c(o.coeffs().begin(), o.coeffs().end());
    return Jet(o.space(), std::move(c));
  }

  const SpacePtr& space() const { return sp_; }
  bool valid() const { return static_cast<bool>(sp_); }
  const std::vector<T>& coeffs() const { return c_; }
  std::vector<T>& coeffs() { return c_; }
  T operator[](int i) const { return c_[i]; }
  T& operator[](int i) { return c_[i]; }
  T c0() const { return c_[0]; }
  T linear(int v) const { return c_[1 + v]; }

  Jet& operator+=(const Jet& o) {
    for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += o.c_[i];
    return *this;
  }
  Jet& operator-=(const Jet& o) {
    for (std::size_t i = 0; i < c_.size(); ++i) c_[i] -= o.c_[i];
    return *this;
  }
  Jet& operator*=(T s) {
    for (auto& x : c_) x *= s;
    return *this;
  }
  Jet& operator+=(T s) {
    c_[0] += s;
    return *this;
  }

  Jet nilpotent() const {
    Jet r = *this;
    r.c_[0] = T(0);
    return r;
  }

  // d/dx_v; the top-degree part of the result is lost.
  Jet derivative(int v) const {
    Jet r(sp_);
    const auto& dm = sp_->dmap(v);
    for (int i = 0; i < sp_->size(); ++i)
      if (dm[i].first >= 0) r.c_[dm[i].first] += T(static_cast<double>(dm[i].second)) * c_[i];
    return r;
  }

  // Polynomial value at base + dx.
  template <class V>
  T eval_offset(const V& dx) const {
    T s(0);
    for (int i = 0; i < sp_->size(); ++i) {
      if (c_[i] == T(0)) continue;
      T m = c_[i];
      const auto& e = sp_->exps(i);
      for (int v = 0; v < sp_->nv(); ++v)
        for (int p = 0; p < e[v]; ++p) m *= dx[v];
      s += m;
    }
    return s;
  }

  // Substitute x_v - x_v0 -> sub[v] (jets with zero constant term, possibly in another space).
  template <class U>
  Jet<std::common_type_t<T, U>> compose(const std::vector<Jet<U>>& sub) const;

  // Q with this = (x_v + a) * Q + R, R independent of x_v. Returns Q; remainder stored in rem.
  Jet divide_linear(int v, T a, Jet* rem = nullptr) const;

  double max_abs() const {
    double m = 0;
    for (const auto& x : c_) m = std::max(m, std::abs(x));
    return m;
  }

 private:
  SpacePtr sp_;
  std::vector<T> c_;
};

using RJet = Jet<double>;
using CJet = Jet<std::complex<double>>;

template <class T>
inline T constant_term(const Jet<T>& j) {
  return j.c0();
}

template <class T>
Jet<T> operator+(Jet<T> a, const Jet<T>& b) {
  return a += b;
}
template <class T>
Jet<T> operator-(Jet<T> a, const Jet<T>& b) {
  return a -= b;
}
template <class T>
Jet<T> operator-(Jet<T> a) {
  for (auto& x : a.coeffs()) x = -x;
  return a;
}
template <class T, class S, class = std::enable_if_t<std::is_arithmetic_v<S> || std::is_same_v<S, T>>>
Jet<T> operator+(Jet<T> a, S s) {
  a[0] += T(s);
  return a;
}
template <class T, class S, class = std::enable_if_t<std::is_arithmetic_v<S> || std::is_same_v<S, T>>>
Jet<T> operator+(S s, Jet<T> a) {
  a[0] += T(s);
  return a;
}
template <class T, class S, class = std::enable_if_t<std::is_arithmetic_v<S> || std::is_same_v<S, T>>>
Jet<T> operator-(Jet<T> a, S s) {
  a[0] -= T(s);
  return a;
}
template <class T, class S, class = std::enable_if_t<std::is_arithmetic_v<S> || std::is_same_v<S, T>>>
Jet<T> operator-(S s, Jet<T> a) {
  a = -a;
  a[0] += T(s);
  return a;
}
template <class T, class S, class = std::enable_if_t<std::is_arithmetic_v<S> || std::is_same_v<S, T>>>
Jet<T> operator*(Jet<T> a, S s) {
  a *= T(s);
  return a;
}
template <class T, class S, class = std::enable_if_t<std::is_arithmetic_v<S> || std::is_same_v<S, T>>>
Jet<T> operator*(S s, Jet<T> a) {
  a *= T(s);
  return a;
}

template <class T>
Jet<T> operator*(const Jet<T>& a, const Jet<T>& b) {
  const auto& sp = a.space();
  Jet<T> r(sp);
  auto& rc = r.coeffs();
  const auto& ac = a.coeffs();
  const auto& bc = b.coeffs();
  for (int i = 0; i < sp->size(); ++i) {
    if (ac[i] == T(0)) continue;
    const T ai = ac[i];
    for (const auto& [j, k] : sp->mul(i))
      if (bc[j] != T(0)) rc[k] += ai * bc[j];
  }
  return r;
}

// f(u0 + n) = sum_k d[k]/k! n^k, d[k] = f^(k)(u0).
template <class T>
Jet<T> apply_series(const Jet<T>& u, const std::vector<T>& d) {
  const int D = u.space()->deg();
  Jet<T> n = u.nilpotent();
  std::vector<T> t(D + 1);
  double fact = 1.0;
  for (int k = 0; k <= D; ++k) {
    if (k > 0) fact *= k;
    t[k] = d[k] / T(fact);
  }
  Jet<T> r(u.space(), t[D]);
  for (int k = D - 1; k >= 0; --k) {
    r = r * n;
    r[0] += t[k];
  }
  return r;
}

template <class T>
Jet<T> reciprocal(const Jet<T>& u) {
  const int D = u.space()->deg();
  const T u0 = u.c0();
  if (u0 == T(0)) throw std::domain_error("jet reciprocal of zero constant term");
  std::vector<T> d(D + 1);
  T inv = T(1) / u0;
  T p = inv;
  double sgn = 1.0, fact = 1.0;
  for (int k = 0; k <= D; ++k) {
    if (k > 0) fact *= k;
    d[k] = T(sgn * fact) * p;
    p *= inv;
    sgn = -sgn;
  }
  return apply_series(u, d);
}

template <class T>
Jet<T> operator/(const Jet<T>& a, const Jet<T>& b) {
  return a * reciprocal(b);
}
template <class T, class S, class = std::enable_if_t<std::is_arithmetic_v<S> || std::is_same_v<S, T>>>
Jet<T> operator/(Jet<T> a, S s) {
  a *= T(1) / T(s);
  return a;
}
template <class T, class S, class = std::enable_if_t<std::is_arithmetic_v<S> || std::is_same_v<S, T>>>
Jet<T> operator/(S s, const Jet<T>& a) {
  return reciprocal(a) * T(s);
}

template <class T>
Jet<T> sin(const Jet<T>& u) {
  const int D = u.space()->deg();
  using std::cos;
  using std::sin;
  T s = sin(u.c0()), c = cos(u.c0());
  std::vector<T> d(D + 1);
  const T cyc[4] = {s, c, -s, -c};
  for (int k = 0; k <= D; ++k) d[k] = cyc[k % 4];
  return apply_series(u, d);
}

template <class T>
Jet<T> cos(const Jet<T>& u) {
  const int D = u.space()->deg();
  using std::cos;
  using std::sin;
  T s = sin(u.c0()), c = cos(u.c0());
  std::vector<T> d(D + 1);
  const T cyc[4] = {c, -s, -c, s};
  for (int k = 0; k <= D; ++k) d[k] = cyc[k % 4];
  return apply_series(u, d);
}

template <class T>
Jet<T> exp(const Jet<T>& u) {
  using std::exp;
  std::vector<T> d(u.space()->deg() + 1, exp(u.c0()));
  return apply_series(u, d);
}

template <class T>
Jet<T> sqrt(const Jet<T>& u) {
  using std::sqrt;
  const int D = u.space()->deg();
  std::vector<T> d(D + 1);
  T base = sqrt(u.c0());
  T inv = T(1) / u.c0();
  T coef(1);
  T p = base;
  for (int k = 0; k <= D; ++k) {
    d[k] = coef * p;
    coef *= T(0.5 - k);
    p *= inv;
  }
  return apply_series(u, d);
}

template <class T>
template <class U>
Jet<std::common_type_t<T, U>> Jet<T>::compose(const std::vector<Jet<U>>& sub) const {
  using R = std::common_type_t<T, U>;
  const auto& osp = sub.at(0).space();
  const int D = osp->deg();
  const int nv = sp_->nv();
  // powers of each substitute
  std::vector<std::vector<Jet<R>>> pw(nv);
  for (int v = 0; v < nv; ++v) {
    Jet<R> s = Jet<R>::from(sub[v]);
    s[0] = R(0);
    pw[v].push_back(Jet<R>(osp, R(1)));
    for (int k = 1; k <= std::min(D, sp_->deg()); ++k) pw[v].push_back(pw[v].back() * s);
  }
  Jet<R> out(osp);
  for (int i = 0; i < sp_->size(); ++i) {
    if (c_[i] == T(0)) continue;
    const auto& e = sp_->exps(i);
    if (sp_->degree(i) > D) continue;
    Jet<R> m(osp, R(c_[i]));
    bool first = true;
    for (int v = 0; v < nv; ++v) {
      if (e[v] == 0) continue;
      if (first) {
        m = pw[v][e[v]] * R(c_[i]);
        first = false;
      } else {
        m = m * pw[v][e[v]];
      }
    }
    out += m;
  }
  return out;
}

template <class T>
Jet<T> Jet<T>::divide_linear(int v, T a, Jet* rem) const {
  // group monomials by the exponents of the other variables
  const int D = sp_->deg();
  Jet q(sp_);
  Jet r(sp_);
  std::vector<int> e;
  for (int i = 0; i < sp_->size(); ++i) {
    const auto& ei = sp_->exps(i);
    if (ei[v] != 0) continue;
    int rest = sp_->degree(i);
    int top = D - rest;
    std::vector<T> n(top + 1);
    std::vector<int> idx(top + 1);
    e = ei;
    for (int j = 0; j <= top; ++j) {
      e[v] = j;
      idx[j] = sp_->index(e);
      n[j] = c_[idx[j]];
    }
    // synthetic division by (x + a)
    T carry(0);
    for (int j = top; j >= 1; --j) {
      carry = n[j] - a * carry;
      q.c_[idx[j - 1]] = carry;
    }
    r.c_[idx[0]] = n[0] - a * carry;
  }
  if (rem) *rem = r;
  return q;
}

}  // namespace resonet
