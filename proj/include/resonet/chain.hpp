#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "resonet/melnikov.hpp"
#include "resonet/model.hpp"
#include "resonet/normal_form.hpp"
#include "resonet/resonance.hpp"

namespace resonet {

enum class Chart { NonResonant, Resonant };

// Level of a torus. Non-resonant: E = I. Resonant: E = (Ehat, E_m), branch = sign y on rotational tori,
// 0 on librational ones.
struct ChainLevel {
  Chart chart = Chart::NonResonant;
  Vec E;
  Mode kl;        // resonant chart only
  int order = 0;  // activation order of kl
  int branch = 0;
  Vec I;          // representative action: E, or B*(Ehat) + y k0 with a y^2/2 = E_m - E*
  double arclength = 0.0;  // of I projected on the path
};

struct ChainLink {
  bool relabel = false;  // chart switch at a tube boundary, no jump
  Vec theta;             // phi at s = 0 solving the intersection equations
  double residual = 0.0;
  double det = 0.0;
  int sigma = 0;         // branch sign used in the resonant equations
  double jump = 0.0;     // |E' - E| in units of eps (E_m in units of eps^{1+j/2})
  Vec I;                 // action on the source torus at theta
};

struct ChainOptions {
  double spacing = 0.8;   // fraction of the scanned jump actually taken
  double delta = 0.05;
  int order = 2;
  int m0 = 3;
  double L = 0.0;         // tube radius, 0 for automatic
  int grid = 32;          // angle scan per link
  double rho = 0.2;
  double gap_floor = 2.0;
  double accept = 1e-8;   // largest link residual
  double margin = 1e-6;   // smallest |det| relative to scale^d
  int max_links = 20000;
};

struct Chain {
  double eps = 0.0;
  std::vector<Vec> path;
  std::vector<ChainLevel> levels;
  std::vector<ChainLink> links;  // links[i] joins levels[i] and levels[i + 1]
  double jump_cap = 0.0;         // largest scanned |grad L*| (scaled) over the links
  double max_residual = 0.0;
  double min_margin = 0.0;
  double L = 0.0;
  bool valid() const;
};

class ChainError : public std::runtime_error {
 public:
  ChainError(const std::string& what, std::string kind, Vec witness, Vec path_point, int segment = -1)
      : std::runtime_error(what),
        kind(std::move(kind)),
        witness(std::move(witness)),
        path_point(std::move(path_point)),
        segment(segment) {}
  std::string kind;  // "clearance", "link" or "model"
  Vec witness;
  Vec path_point;
  int segment;
};

// Polyline helpers.
double path_length(const std::vector<Vec>& path);
Vec path_point(const std::vector<Vec>& path, double s);
double path_arclength(const std::vector<Vec>& path, const Vec& I, double* distance = nullptr);

Chain build_chain(const Model& m, const std::vector<Vec>& path, double eps, const ChainOptions& opt = {});

// Representative action of a resonant level.
Vec resonant_representative(const NormalForm& nf, double Em, int branch, double eps);

}  // namespace resonet
