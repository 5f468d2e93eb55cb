#include "resonet/chain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>

#include "resonet/averaging.hpp"
#include "resonet/scattering.hpp"

namespace resonet {

namespace {

constexpr double kTwoPi = 2 * std::numbers::pi;

int sgn(double x) { return x > 0 ? 1 : (x < 0 ? -1 : 0); }

struct Candidate {
  double score = 0.0;
  Vec theta;  // phi
  Vec E2;
  int branch2 = 0;
  int sigma = 0;
  double jump = 0.0;
};

int segment_of(const std::vector<Vec>& path, double s) {
  double acc = 0;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    acc += (path[i + 1] - path[i]).norm();
    if (s <= acc) return static_cast<int>(i);
  }
  return std::max(0, static_cast<int>(path.size()) - 2);
}

std::string vec_text(const Vec& v) {
  std::ostringstream os;
  os << "(";
  for (int i = 0; i < v.size(); ++i) os << (i ? ", " : "") << (v[i] == 0 ? 0.0 : v[i]);
  os << ")";
  return os.str();
}

}  // namespace

double path_length(const std::vector<Vec>& path) {
  double L = 0;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) L += (path[i + 1] - path[i]).norm();
  return L;
}

Vec path_point(const std::vector<Vec>& path, double s) {
  if (path.size() == 1 || s <= 0) return path.front();
  double acc = 0;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    const double l = (path[i + 1] - path[i]).norm();
    if (s <= acc + l && l > 0) return path[i] + (s - acc) / l * (path[i + 1] - path[i]);
    acc += l;
  }
  return path.back();
}

double path_arclength(const std::vector<Vec>& path, const Vec& I, double* distance) {
  if (path.size() == 1) {
    if (distance) *distance = (I - path.front()).norm();
    return 0.0;
  }
  double best = std::numeric_limits<double>::infinity(), s_best = 0, acc = 0;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    const Vec seg = path[i + 1] - path[i];
    const double l2 = seg.squaredNorm();
    const double t = l2 > 0 ? std::clamp((I - path[i]).dot(seg) / l2, 0.0, 1.0) : 0.0;
    const double dist = (path[i] + t * seg - I).norm();
    if (dist < best) {
      best = dist;
      s_best = acc + t * std::sqrt(l2);
    }
    acc += std::sqrt(l2);
  }
  if (distance) *distance = best;
  return s_best;
}

Vec resonant_representative(const NormalForm& nf, double Em, int branch, double eps) {
  if (branch == 0) return nf.Bstar;
  const double r = 2 * (Em - nf.E_star(eps)) / nf.a;
  return nf.point(branch * std::sqrt(std::max(0.0, r)));
}

bool Chain::valid() const {
  if (levels.empty() || links.size() + 1 != levels.size()) return false;
  for (std::size_t i = 0; i < links.size(); ++i) {
    if (levels[i + 1].arclength < levels[i].arclength - 1e-12) return false;
    if (!links[i].relabel && !(links[i].residual <= 1e-8)) return false;
    if (!links[i].relabel && links[i].jump > jump_cap * (1 + 1e-12)) return false;
  }
  return true;
}

Chain build_chain(const Model& m, const std::vector<Vec>& path, double eps, const ChainOptions& opt) {
  if (path.empty()) throw std::invalid_argument("empty path");
  const int d = m.d();
  if (!m.lambda_invariant())
    throw ChainError("Lambda = {p = q = 0} is not invariant for this model", "model", path.front(), path.front());
  Chain c;
  c.eps = eps;
  c.path = path;
  WebOptions wo;
  wo.max_order = opt.order;
  ResonanceWeb web = build_web(m, wo);
  ReducedDomain dom = build_reduced_domain(web, opt.delta, opt.m0, opt.L);
  c.L = dom.L();
  PathCheck pc = dom.check_path(path);
  if (!pc.accepted)
    throw ChainError("path comes within " + std::to_string(pc.min_clearance) + " of " + pc.component + " at " +
                         vec_text(pc.witness),
                     "clearance", pc.witness, pc.path_point);

  ChainLevel start;
  start.E = path.front();
  start.I = path.front();
  c.levels.push_back(start);
  const double total = path_length(path);
  if (total == 0.0) return c;

  Melnikov M(m);
  AveragingOptions ao;
  ao.m0 = opt.m0;
  ao.L = dom.L();
  ao.secular = web.secular_modes();
  Averager avg(m, ao);
  const auto secular = web.secular();
  const double Lt = dom.L();
  const auto angles = torus_grid(d, opt.grid);
  c.min_margin = std::numeric_limits<double>::infinity();

  auto normal_form_at = [&](const Mode& kl, const Vec& Ehat, const Vec& where) {
    const Resonance* R = web.find(kl);
    try {
      return resonant_normal_form(avg, *R, Ehat);
    } catch (const std::exception& e) {
      throw ChainError(std::string("normal form failed on ") + mode_str(kl) + ": " + e.what(), "link", where,
                       where);
    }
  };
  std::optional<NormalForm> nf;

  while (true) {
    if (static_cast<int>(c.links.size()) >= opt.max_links)
      throw ChainError("link budget exhausted", "link", c.levels.back().I, c.levels.back().I);
    const ChainLevel cur = c.levels.back();
    const double s = cur.arclength;

    // chart switches at tube boundaries
    if (cur.chart == Chart::NonResonant) {
      const Resonance* hit = nullptr;
      double best = Lt;
      for (const auto& R : secular) {
        const double r = resonance_distance(m, R.kl, cur.I);
        if (r < best) {
          best = r;
          hit = &R;
        }
      }
      if (hit) {
        const int slot = resonant_slot(hit->kl);
        nf = normal_form_at(hit->kl, resonant_hat(hit->kl, slot, cur.I), cur.I);
        const double y = nf->y_of(cur.I);
        const double gap = opt.gap_floor * std::pow(eps, 1.5 + nf->order / 2.0);
        ChainLevel L;
        L.chart = Chart::Resonant;
        L.kl = hit->kl;
        L.order = nf->order;
        L.branch = y >= 0 ? 1 : -1;
        L.E.resize(d);
        L.E.head(d - 1) = nf->Ehat;
        L.E[d - 1] = nf->E_star(eps) + 0.5 * nf->a * y * y;
        if (std::abs(L.E[d - 1] - nf->E_star(eps)) < gap) L.E[d - 1] = nf->E_star(eps) + sgn(nf->a) * 1.5 * gap;
        L.I = resonant_representative(*nf, L.E[d - 1], L.branch, eps);
        L.arclength = std::max(s, path_arclength(path, L.I));
        ChainLink k;
        k.relabel = true;
        k.I = cur.I;
        c.links.push_back(k);
        c.levels.push_back(L);
        continue;
      }
    } else if (cur.branch != 0 && resonance_distance(m, cur.kl, cur.I) >= Lt) {
      ChainLevel L;
      L.E = cur.I;
      L.I = cur.I;
      L.arclength = s;
      ChainLink k;
      k.relabel = true;
      k.I = cur.I;
      c.links.push_back(k);
      c.levels.push_back(L);
      nf.reset();
      continue;
    }

    // scan the achievable jumps
    std::vector<Candidate> cands;
    double cap = 0;
    HeteroclinicOptions ho;
    ho.accept = opt.accept;
    if (cur.chart == Chart::NonResonant) {
      std::vector<ReducedPoincare> vals(angles.size());
      for (std::size_t k = 0; k < angles.size(); ++k) {
        vals[k] = M.reduced(cur.E, angles[k]);
        if (vals[k].ok) cap = std::max(cap, vals[k].grad_theta.norm());
      }
      if (total - s <= opt.spacing * eps * cap) break;
      const Vec target = path_point(path, std::min(total, s + eps * cap));
      for (std::size_t k = 0; k < angles.size(); ++k) {
        if (!vals[k].ok) continue;
        Candidate cd;
        cd.theta = angles[k];
        cd.E2 = cur.E + opt.spacing * eps * vals[k].grad_theta;
        cd.jump = opt.spacing * vals[k].grad_theta.norm();
        if (path_arclength(path, cd.E2) < s) continue;
        cd.score = (cd.E2 - target).norm();
        cands.push_back(cd);
      }
    } else {
      const int j = nf->order;
      const double ej = std::pow(eps, j), esc = eps * std::sqrt(ej);
      const double Em = cur.E[d - 1], em = Em / ej, Es = nf->E_star(eps);
      const double gap = opt.gap_floor * std::pow(eps, 1.5 + j / 2.0);
      const double sa = nf->a > 0 ? 1.0 : -1.0;
      double bottom = std::numeric_limits<double>::infinity();
      for (int i = 0; i < 256; ++i) bottom = std::min(bottom, sa * nf->U_at(kTwoPi * i / 256));
      const Vec Ehat = cur.E.head(d - 1);
      ResonantAngles A{&*nf};
      struct Raw {
        Vec Th, g;
        double lb;
      };
      std::vector<Raw> raw;
      for (const Vec& Th : angles) {
        if (std::abs(std::remainder(Th[d - 1] - nf->saddle, kTwoPi)) < opt.rho) continue;
        const double lb = nf->ell_bar(Th[d - 1], em);
        if (!std::isfinite(lb) || lb == 0.0) continue;
        auto RR = resonant_reduced(M, *nf, Th);
        if (!RR.ok) continue;
        raw.push_back({Th, RR.grad, lb});
        cap = std::max({cap, RR.grad.head(d - 1).norm(), std::abs(nf->a * lb * RR.grad[d - 1])});
      }
      if (total - s <= opt.spacing * eps * cap) break;
      const Vec target = path_point(path, std::min(total, s + eps * cap));
      const std::vector<int> signs = cur.branch == 0 ? std::vector<int>{1, -1} : std::vector<int>{cur.branch};
      for (const Raw& r : raw)
        for (int sigma : signs) {
          Candidate cd;
          cd.sigma = sigma;
          cd.theta = A.phi(r.Th);
          const Vec gh = r.g.head(d - 1);
          const double gm = sigma * nf->a * r.lb * r.g[d - 1];
          cd.E2.resize(d);
          cd.E2.head(d - 1) = Ehat + opt.spacing * eps * gh;
          cd.E2[d - 1] = Em + opt.spacing * esc * gm;
          const double lev = sa * (cd.E2[d - 1] - Es);
          if (std::abs(lev) < gap) continue;
          if (lev < 0 && sa * cd.E2[d - 1] / ej < bottom) continue;
          cd.branch2 = lev > 0 ? (cur.branch == 0 ? sigma : cur.branch) : 0;
          cd.jump = opt.spacing * std::max(gh.norm(), std::abs(gm));
          // representative with B* moved along the resonance to the new Ehat
          Vec rep;
          try {
            NormalForm moved = *nf;
            moved.Bstar = project_k(m, resonant_embed(cur.kl, nf->slot, cd.E2.head(d - 1)), cur.kl).point;
            rep = resonant_representative(moved, cd.E2[d - 1], cd.branch2, eps);
          } catch (const ProjectionError&) {
            continue;
          }
          if (path_arclength(path, rep) < s) continue;
          cd.score = (rep - target).norm();
          cands.push_back(cd);
        }
    }
    c.jump_cap = std::max(c.jump_cap, cap);
    std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) { return a.score < b.score; });

    // validate the best candidates by Newton from their scan angle
    bool done = false;
    const double sc = std::max(1.0, M.at(cur.chart == Chart::NonResonant ? cur.E : nf->Bstar)->scale());
    for (std::size_t k = 0; k < cands.size() && k < 12 && !done; ++k) {
      const Candidate& cd = cands[k];
      ho.starts = {cd.theta};
      ChainLevel next;
      ChainLink link;
      std::optional<NormalForm> nf2;
      if (cur.chart == Chart::NonResonant) {
        auto sols = heteroclinic_solve(M, cur.E, cd.E2, eps, ho);
        if (sols.empty()) continue;
        link.theta = sols.front().theta;
        link.residual = sols.front().residual;
        link.det = sols.front().det;
        link.I = cur.E;
        next.E = cd.E2;
        next.I = cd.E2;
      } else {
        ResonantTorus from{cur.E.head(d - 1), cur.E[d - 1], cur.branch};
        ResonantTorus to{cd.E2.head(d - 1), cd.E2[d - 1], cd.branch2};
        auto sols = heteroclinic_solve_resonant(M, *nf, from, to, eps, opt.rho, ho);
        const HeteroclinicSolution* hit = nullptr;
        for (const auto& sl : sols)
          if (sl.branch == cd.sigma) hit = &sl;
        if (!hit) continue;
        link.theta = hit->theta;
        link.residual = hit->residual;
        link.det = hit->det;
        link.sigma = hit->branch;
        const double tm = nf->k0.dot(hit->theta);
        link.I = nf->point(hit->branch * nf->ell(tm, cur.E[d - 1], eps));
        try {
          nf2 = resonant_normal_form(avg, *web.find(cur.kl), cd.E2.head(d - 1));
        } catch (const std::exception&) {
          continue;
        }
        next.chart = Chart::Resonant;
        next.kl = cur.kl;
        next.order = cur.order;
        next.branch = cd.branch2;
        next.E = cd.E2;
        next.I = resonant_representative(*nf2, cd.E2[d - 1], cd.branch2, eps);
      }
      if (!(link.residual <= opt.accept) || std::abs(link.det) < opt.margin * std::pow(sc, d)) continue;
      next.arclength = path_arclength(path, next.I);
      if (next.arclength < s) continue;
      link.jump = cd.jump;
      c.max_residual = std::max(c.max_residual, link.residual);
      c.min_margin = std::min(c.min_margin, std::abs(link.det) / std::pow(sc, d));
      c.links.push_back(link);
      c.levels.push_back(next);
      if (nf2) nf = nf2;
      done = true;
    }
    if (!done) {
      const int seg = segment_of(path, s);
      throw ChainError("no admissible link from " + vec_text(cur.I) + " on segment " + std::to_string(seg), "link",
                       cur.I, path_point(path, s), seg);
    }
  }
  if (!std::isfinite(c.min_margin)) c.min_margin = 0;
  return c;
}

}  // namespace resonet
