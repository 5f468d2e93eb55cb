#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <vector>

#include "resonet/field.hpp"
#include "resonet/model.hpp"
#include "resonet/resonance.hpp"

namespace resonet {

// Smooth cutoff: 1 on |x| <= 1, 0 on |x| >= 2.
double bump(double x);
RJet bump(const RJet& x);

struct AveragingOptions {
  int m0 = 3;            // graded fields keep eps^1 .. eps^(m0+1)
  int jet_degree = 8;
  double L = 0.0;        // tube radius; 0 treats every k != 0 mode as non-resonant
  std::set<Mode> secular;  // primitive indices projected along k; others orthogonally
};

struct HomologicalSolution {
  LocalField Kbar, G;
  // max |Kbar - K - {h~,G}| over coefficients at the base point, and over all jet coefficients
  double residual = 0.0;
  double residual_jet = 0.0;
  std::set<Mode> resonant;  // modes treated inside their tube
};

struct AveragedPoint {
  Vec I0;
  int steps = 0;
  std::vector<LocalField> K;  // K[o] for o = 1..m0+1 (K[0] unused)
  std::vector<HomologicalSolution> step;  // step[N-1]
  std::vector<LocalField> K_before;       // K_before[N-1] = order-N field entering step N
};

class Averager {
 public:
  Averager(const Model& m, AveragingOptions opt);

  const Model& model() const { return *m_; }
  const AveragingOptions& options() const { return opt_; }
  const SpacePtr& space() const { return sp_; }
  int top() const { return opt_.m0 + 1; }

  // Graded inner Hamiltonian K[o] = order-o part of Q at p = q = 0.
  std::vector<LocalField> initial(const Vec& I0) const;
  // Steps 1..steps of the recursive scheme, memoized per base point.
  std::shared_ptr<const AveragedPoint> average(const Vec& I0, int steps) const;
  HomologicalSolution solve_homological(const LocalField& K, int N) const;
  // K o exp(eps^N G) by iterated brackets, truncated at top().
  std::vector<LocalField> lie_step(const std::vector<LocalField>& K, const std::vector<CJet>& omega,
                                   const LocalField& G, int N) const;

  // Jets of the projection onto the surface of kl about I0.
  std::vector<RJet> projection_jet(const Vec& I0, const Mode& kl) const;
  // Jet of |omega.k + l| / |D^2h k|.
  RJet distance_jet(const Vec& I0, const Mode& kl) const;

 private:
  const Model* m_;
  AveragingOptions opt_;
  SpacePtr sp_;
  std::vector<std::vector<FourierTerm>> inner_;
  mutable std::mutex mu_;
  mutable std::map<std::pair<std::vector<double>, int>, std::shared_ptr<const AveragedPoint>> memo_;
};

// N / D where N vanishes (to truncation) on {D = 0}; D must have a nonzero linear part.
CJet divide_vanishing(const CJet& N, const RJet& D, CJet* remainder = nullptr);

// F = I + eps dG1/dphi: averaged first integral at first order (non-resonant region).
struct FirstIntegral {
  const Averager* avg;
  Vec operator()(const Vec& I, const Vec& phi, double s, double eps) const;
};

enum class RegionCase { NonResonant, Resonant, Annulus };

struct AveragedHamiltonian {
  RegionCase region = RegionCase::NonResonant;
  Mode resonance;       // for the resonant case
  int order = 0;        // its activation order
  Vec I;
  Vec gamma;            // projection onto the resonance
  double K00 = 0.0;     // angle-independent part at order eps (value)
  // resonant potential U(theta) = sum_p c_p e^{i p theta}, theta = k0.phi + l0 s
  std::map<int, cplx> U;
  double U_at(double theta) const;
};

// Classify I against the secular resonances and read off the averaged Hamiltonian.
AveragedHamiltonian average_to_order(const Averager& avg, const ResonanceWeb& web, const Vec& I, int order);

}  // namespace resonet
