#pragma once

#include <map>
#include <string>
#include <vector>

#include "resonet/melnikov.hpp"
#include "resonet/model.hpp"
#include "resonet/resonance.hpp"

namespace resonet {

enum class Status { Pass, Fail, NotApplicable };
const char* status_name(Status s);

struct Witness {
  Vec I;
  Vec theta;  // empty when the check is on actions only
  double value = 0.0;
  std::string note;
};

struct HypothesisCheck {
  std::string name;
  Status status = Status::Pass;
  std::string detail;
  double measured = 0.0;   // the quantity compared with the threshold
  double threshold = 0.0;
  int samples = 0;
  std::vector<Witness> witnesses;  // failures first, capped
  std::map<std::string, double> diagnostics;
};

struct HypothesisOptions {
  int action_grid = 17;  // per axis
  int angle_grid = 32;   // per angle
  int order = 2;         // resonance web order
  double delta = 0.05;
  int m0 = 3;
  double L = 0.0;        // tube radius, 0 for automatic
  double rho = 0.2;      // saddle exclusion in theta_m
  double a_tol = 1e-10;  // |a| relative to |k|^2 |D^2h|
  double nondeg_tol = 1e-6;  // |det| relative to scale^d
  int resonance_samples = 17;
  int max_witnesses = 8;
  int threads = 0;
};

struct HypothesisReport {
  std::vector<HypothesisCheck> checks;
  HypothesisOptions options;
  double L = 0.0;
  const HypothesisCheck& operator[](const std::string& name) const;
  bool passed() const;  // no check failed
};

HypothesisReport verify_hypotheses(const Model& m, const HypothesisOptions& opt = {});

// Points of a resonance inside the box, from orthogonal projections of the action grid.
std::vector<Vec> resonance_samples(const Model& m, const Resonance& r, int grid, int max_samples);

}  // namespace resonet
