#pragma once

#include <cstdlib>
#include <numeric>
#include <string>
#include <vector>

namespace resonet {

// Fourier index (k_1..k_d, l) of e^{i(k.phi + l s)}.
using Mode = std::vector<int>;

inline Mode mode_neg(const Mode& m) {
  Mode r(m);
  for (auto& x : r) x = -x;
  return r;
}

inline Mode mode_add(const Mode& a, const Mode& b) {
  Mode r(a);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] += b[i];
  return r;
}

inline bool mode_is_zero(const Mode& m) {
  for (int x : m)
    if (x) return false;
  return true;
}

inline bool k_is_zero(const Mode& m) {
  for (std::size_t i = 0; i + 1 < m.size(); ++i)
    if (m[i]) return false;
  return true;
}

inline int mode_l(const Mode& m) { return m.back(); }

// +1 if the first nonzero entry is positive, -1 if negative, 0 for the zero mode.
inline int mode_sign(const Mode& m) {
  for (int x : m)
    if (x) return x > 0 ? 1 : -1;
  return 0;
}

inline Mode mode_canonical_sign(const Mode& m) { return mode_sign(m) < 0 ? mode_neg(m) : m; }

inline int mode_gcd(const Mode& m) {
  int g = 0;
  for (int x : m) g = std::gcd(g, std::abs(x));
  return g;
}

// Primitive representative with canonical sign: indexes the resonance surface.
inline Mode mode_primitive(const Mode& m) {
  int g = mode_gcd(m);
  if (g == 0) return m;
  Mode r(m);
  for (auto& x : r) x /= g;
  return mode_canonical_sign(r);
}

inline std::string mode_str(const Mode& m) {
  std::string s = "(";
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(m[i]);
  }
  return s + ")";
}

}  // namespace resonet
