#pragma once

#include <functional>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "resonet/mode.hpp"
#include "resonet/model.hpp"

namespace resonet {

class ProjectionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Surface {I : omega(I).k + l = 0} for a primitive canonical (k,l).
struct Resonance {
  Mode kl;
  int order = 0;  // activation order
  bool affine = false;
  // affine surfaces: normal . I + offset = 0, normal = D^2h k
  Vec normal;
  double offset = 0.0;
  std::string equation() const;  // exact rational form when affine
};

double resonance_function(const Model& m, const Mode& kl, const Vec& I);
Vec resonance_gradient(const Model& m, const Mode& kl, const Vec& I);
// |f| / |grad f|, exact for affine surfaces
double resonance_distance(const Model& m, const Mode& kl, const Vec& I);

struct Projection {
  Vec point;
  double t = 0.0;  // I* = I + t k for the k-projection
  int iterations = 0;
  double residual = 0.0;
  // |I - I*| / (first-order distance to the surface); >= 1
  double comparability = 1.0;
};

// I* = I + t k on the surface, by Newton in t.
Projection project_k(const Model& m, const Vec& I, const Mode& kl);
// Closest point of the surface (Newton on the Lagrange system).
Projection project_orth(const Model& m, const Vec& I, const Mode& kl);
// Closest point of {f_a = 0} intersected with further constraints (Gauss-Newton, min-norm steps).
struct Constraint {
  std::function<double(const Vec&)> f;
  std::function<Vec(const Vec&)> grad;
};
std::optional<Vec> project_constraints(const std::vector<Constraint>& cs, const Vec& I, double tol = 1e-13);

enum class SupportMode { Numeric, Combinatorial };

struct WebOptions {
  int max_order = 2;
  SupportMode support = SupportMode::Numeric;
  int samples = 6;
  unsigned seed = 1234567u;
  double support_tol = 1e-9;  // relative to the largest coefficient
  int jet_degree = 6;
};

class ResonanceWeb {
 public:
  const Model& model() const { return *m_; }
  int max_order() const { return static_cast<int>(sets_.size()); }
  // N_N (canonical sign, all indices including k = 0)
  const std::set<Mode>& indices(int N) const { return sets_.at(N - 1); }
  std::set<Mode> indices_up_to(int N) const;
  const std::vector<Resonance>& resonances() const { return res_; }
  std::vector<Resonance> of_order(int N) const;
  std::vector<Resonance> secular() const;
  std::set<Mode> secular_modes() const;
  const Resonance* find(const Mode& kl) const;
  const WebOptions& options() const { return opt_; }

  friend ResonanceWeb build_web(const Model& m, const WebOptions& opt);

 private:
  const Model* m_ = nullptr;
  WebOptions opt_;
  std::vector<std::set<Mode>> sets_;
  std::vector<Resonance> res_;
};

std::set<Mode> combinatorial_indices(const Model& m, int N);
// Support of the order-N remainder after N-1 averaging steps at generic sample points.
std::set<Mode> numeric_indices(const Model& m, int N, const WebOptions& opt);
std::set<Mode> activated_indices(const Model& m, int N, const WebOptions& opt = {});
ResonanceWeb build_web(const Model& m, const WebOptions& opt = {});

int integer_rank(const std::vector<Mode>& rows);
int float_rank(const std::vector<Mode>& rows, double tol = 1e-9);
// Indices of order <= N with |omega.k + l| <= tol at the extended frequency (omega, 1).
std::vector<Mode> active_indices(const Vec& omega_ext, int N, const ResonanceWeb& web, double tol = 1e-9);
int multiplicity(const Vec& omega_ext, int N, const ResonanceWeb& web, double tol = 1e-9);

// Codimension-two pieces removed from the action domain.
struct CodimTwo {
  Mode a, b;          // b empty for a degenerate locus
  std::string kind;   // "intersection" or "degenerate"
  std::vector<Vec> points;  // explicit points (planar affine case) or samples
  bool whole_surface = false;  // degenerate everywhere along a
};

struct PathCheck {
  bool accepted = true;
  double min_clearance = 0.0;
  Vec witness;           // nearest violating point of B (or nearest point overall)
  Vec path_point;        // where along the path it happened
  std::string component;
};

struct TubeCheck {
  bool ok = true;
  double L = 0.0;
  double min_separation = 0.0;  // between distinct secular surfaces outside the delta-balls
  Mode a, b;
};

class ReducedDomain {
 public:
  double delta() const { return delta_; }
  double L() const { return L_; }
  int m0() const { return m0_; }
  const std::vector<CodimTwo>& components() const { return comps_; }
  const ResonanceWeb& web() const { return *web_; }

  // Distance to B; optionally the nearest point and a label of its component.
  double clearance(const Vec& I, Vec* nearest = nullptr, std::string* label = nullptr) const;
  bool contains(const Vec& I) const;
  // Sampled at resolution delta/4.
  PathCheck check_path(const std::vector<Vec>& path) const;
  TubeCheck check_tube(double L) const;
  double secular_separation(Mode* a = nullptr, Mode* b = nullptr) const;

  friend ReducedDomain build_reduced_domain(const ResonanceWeb& web, double delta, int m0, double L);

 private:
  const ResonanceWeb* web_ = nullptr;
  double delta_ = 0.05, L_ = 0.0;
  int m0_ = 3;
  std::vector<CodimTwo> comps_;
  std::vector<Resonance> pool_;  // resonances of order <= m0 used for B
};

// L <= 0 selects the automatic tube radius.
ReducedDomain build_reduced_domain(const ResonanceWeb& web, double delta, int m0 = 3, double L = 0.0);

std::string component_label(const CodimTwo& c);

}  // namespace resonet
