#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "resonet/chain.hpp"
#include "resonet/melnikov.hpp"
#include "resonet/model.hpp"

namespace resonet {

enum class Scheme { Split, RK8 };
Scheme parse_scheme(const std::string& name);
const char* scheme_name(Scheme s);

class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct IntegrateOptions {
  Scheme scheme = Scheme::RK8;
  double step = 1e-2;    // splitting step; initial step for rk8
  double tol = 1e-12;    // rk8 absolute and relative tolerance
  double sample = 0.0;   // output spacing, 0 for |T| / 1000
};

// s(t) = s0 + t is advanced analytically; E is the momentum conjugate to s.
struct Trajectory {
  std::vector<double> t;
  std::vector<ExtendedState> x;
  std::vector<double> E;
  Scheme scheme = Scheme::RK8;
  double step = 0.0;
  double eps = 0.0;
  double energy_drift = 0.0;  // max |H + E - (H + E)(0)|
  int steps = 0;
};

Trajectory integrate(const Model& m, const ExtendedState& x0, double eps, double T, const IntegrateOptions& opt = {});
// Final state only, no sampling.
ExtendedState flow(const Model& m, const ExtendedState& x0, double eps, double T, const IntegrateOptions& opt = {},
                   double* E = nullptr);

struct ScatteringMeasurement {
  Vec I_minus, I_plus;  // base points on Lambda of the unstable and stable fibres
  Vec measured;         // I_plus - I_minus
  Vec predicted;        // eps dL*/dtheta
  double discrepancy = 0.0;
  Vec tau;
  double p_stable = 0.0, p_unstable = 0.0;
};

struct ScatteringOptions {
  double window = 18.0;   // time spent following the fibre before projecting on Lambda
  double horizon = 60.0;  // longest excursion used to classify a shot
  double tol = 1e-12;
};

// Shoots on p at q = q*(tau*) forward onto W^s and backward onto W^u, follows each fibre for the window,
// projects on Lambda and flows back along Lambda to t = 0.
ScatteringMeasurement measure_scattering(const Melnikov& M, double eps, const Vec& I, const Vec& theta,
                                         const ScatteringOptions& opt = {});

struct DriftResult {
  Vec sup;            // max_t |F(x(t)) - F(x(0))| per component
  bool exited = false;
  double exit_time = 0.0;
};
DriftResult first_integral_drift(const Trajectory& traj, const std::function<Vec(const ExtendedState&)>& F,
                                 const std::function<bool(const ExtendedState&)>& region = {});

struct DriftSample {
  double t = 0.0;
  int level = 0;
  Vec I;
  double distance = 0.0;  // to the path
  bool jump = false;
};

struct DriftOptions {
  double dwell = 2 * 3.141592653589793;  // inner-flow time between links (one period of s)
  int samples_per_dwell = 4;
  int direct_stride = 0;  // measure every k-th scattering link directly, 0 for none
  double link_tol = 1e-6; // largest |I' - I_next| at a non-resonant link
  double direct_tol = 0.1;  // largest direct discrepancy relative to |eps dL*/dtheta|
};

struct DriftLog {
  std::vector<DriftSample> samples;
  double max_distance = 0.0;
  double max_link_mismatch = 0.0;
  std::vector<int> flagged;  // links whose jump missed the next level or failed the direct check
  std::vector<ScatteringMeasurement> direct;
};

// Pseudo-orbit: inner flow on Lambda between links, scattering-map jumps at the link witnesses.
DriftLog drift_demo(const Model& m, const Chain& chain, double eps, const DriftOptions& opt = {});

}  // namespace resonet
