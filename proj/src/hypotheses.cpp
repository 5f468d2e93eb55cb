#include "resonet/hypotheses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numbers>
#include <sstream>

#include "resonet/averaging.hpp"
#include "resonet/normal_form.hpp"
#include "resonet/parallel.hpp"
#include "resonet/scattering.hpp"

namespace resonet {

namespace {

constexpr double kTwoPi = 2 * std::numbers::pi;

std::vector<Vec> action_grid(const ActionBox& box, int n) {
  const int d = static_cast<int>(box.lo.size());
  std::vector<Vec> out;
  std::vector<int> idx(d, 0);
  while (true) {
    Vec I(d);
    for (int i = 0; i < d; ++i) I[i] = n == 1 ? box.lo[i] : box.lo[i] + (box.hi[i] - box.lo[i]) * idx[i] / (n - 1);
    out.push_back(I);
    int i = 0;
    while (i < d && ++idx[i] == n) idx[i++] = 0;
    if (i == d) break;
  }
  return out;
}

HypothesisCheck make_check(std::string name, std::string detail) {
  HypothesisCheck c;
  c.name = std::move(name);
  c.detail = std::move(detail);
  return c;
}

void add_witness(HypothesisCheck& c, Witness w, int cap) {
  if (static_cast<int>(c.witnesses.size()) < cap) c.witnesses.push_back(std::move(w));
}

}  // namespace

const char* status_name(Status s) {
  switch (s) {
    case Status::Pass:
      return "pass";
    case Status::Fail:
      return "fail";
    default:
      return "not-applicable";
  }
}

const HypothesisCheck& HypothesisReport::operator[](const std::string& name) const {
  for (const auto& c : checks)
    if (c.name == name) return c;
  throw std::out_of_range("no check named " + name);
}

bool HypothesisReport::passed() const {
  return std::none_of(checks.begin(), checks.end(), [](const HypothesisCheck& c) { return c.status == Status::Fail; });
}

std::vector<Vec> resonance_samples(const Model& m, const Resonance& r, int grid, int max_samples) {
  const auto& box = m.box();
  const int d = m.d();
  double w = std::numeric_limits<double>::infinity();
  for (int i = 0; i < d; ++i) w = std::min(w, box.hi[i] - box.lo[i]);
  const double sep = w / std::max(1, 2 * (grid - 1));
  std::vector<Vec> pts;
  for (const Vec& I : action_grid(box, grid)) {
    Vec p;
    try {
      p = project_orth(m, I, r.kl).point;
    } catch (const ProjectionError&) {
      continue;
    }
    if (!box.contains(p, 1e-12)) continue;
    if (std::abs(resonance_function(m, r.kl, p)) > 1e-9) continue;
    bool dup = std::any_of(pts.begin(), pts.end(), [&](const Vec& q) { return (q - p).norm() < sep; });
    if (!dup) pts.push_back(p);
  }
  // order along the first free direction and thin out evenly
  Vec dir = Vec::Zero(d);
  for (int i = 0; i < d; ++i) dir[i] = (i == 0 ? 1.0 : 0.37 * i);
  std::sort(pts.begin(), pts.end(), [&](const Vec& a, const Vec& b) { return a.dot(dir) < b.dot(dir); });
  if (static_cast<int>(pts.size()) <= max_samples) return pts;
  std::vector<Vec> out;
  for (int i = 0; i < max_samples; ++i)
    out.push_back(pts[static_cast<std::size_t>(std::llround(double(i) * (pts.size() - 1) / (max_samples - 1)))]);
  return out;
}

HypothesisReport verify_hypotheses(const Model& m, const HypothesisOptions& opt) {
  HypothesisReport rep;
  rep.options = opt;
  const int d = m.d();
  const int cap = opt.max_witnesses;
  const auto Igrid = action_grid(m.box(), opt.action_grid);

  // H1-H4 hold for every model that builds; report the measured quantities.
  {
    HypothesisCheck c = make_check("H1", "h, V_j and Q are built from analytic primitives");
    c.diagnostics["lambda_invariant"] = m.lambda_invariant() ? 1 : 0;
    rep.checks.push_back(c);
  }
  {
    HypothesisCheck c = make_check("H2", "nondegenerate maxima of every V_j at q = 0");
    double worst = std::numeric_limits<double>::infinity();
    for (int j = 0; j < m.n(); ++j) {
      worst = std::min(worst, -m.ddV(j, 0.0));
      c.diagnostics["alpha" + std::to_string(j + 1)] = std::sqrt(std::max(0.0, -m.ddV(j, 0.0)));
    }
    c.measured = worst;
    c.samples = m.n();
    rep.checks.push_back(c);
  }
  {
    HypothesisCheck c = make_check("H3", "min |det D^2h| over the action grid");
    double worst = std::numeric_limits<double>::infinity();
    for (const Vec& I : Igrid) worst = std::min(worst, std::abs(m.hessian_h(I).determinant()));
    c.measured = worst;
    c.samples = static_cast<int>(Igrid.size());
    if (!(worst > 0)) {
      c.status = Status::Fail;
      c.detail = "D^2h is singular on the action grid";
    }
    rep.checks.push_back(c);
  }
  {
    HypothesisCheck c = make_check("H4", "Q is a trigonometric polynomial in (phi, s)");
    c.measured = static_cast<double>(m.terms().size());
    c.samples = static_cast<int>(m.terms().size());
    rep.checks.push_back(c);
  }

  WebOptions wo;
  wo.max_order = opt.order;
  ResonanceWeb web = build_web(m, wo);
  ReducedDomain dom = build_reduced_domain(web, opt.delta, opt.m0, opt.L);
  rep.L = dom.L();
  const auto secular = web.secular();

  // H5: a = k0^T D^2h k0 along each secular resonance.
  HypothesisCheck h5 = make_check("H5", "min |a| over samples of the secular resonances");
  h5.threshold = opt.a_tol;
  h5.measured = std::numeric_limits<double>::infinity();
  std::vector<bool> tangent(secular.size(), false);
  std::vector<std::vector<Vec>> samples(secular.size());
  for (std::size_t r = 0; r < secular.size(); ++r) {
    samples[r] = resonance_samples(m, secular[r], opt.action_grid, opt.resonance_samples);
    for (const Vec& p : samples[r]) {
      ++h5.samples;
      const double a = quasiconvexity(m, secular[r].kl, p);
      Vec k(d);
      for (int i = 0; i < d; ++i) k[i] = secular[r].kl[i];
      const double sc = std::max(1e-300, k.squaredNorm() * m.hessian_h(p).norm());
      h5.measured = std::min(h5.measured, std::abs(a) / sc);
      if (std::abs(a) <= opt.a_tol * sc) {
        tangent[r] = true;
        h5.status = Status::Fail;
        add_witness(h5, {p, Vec(), a, "a = 0 on " + mode_str(secular[r].kl) + ": " + secular[r].equation()}, cap);
      }
    }
  }
  if (secular.empty()) {
    h5.status = Status::NotApplicable;
    h5.detail = "no secular resonances";
    h5.measured = 0;
  }
  rep.checks.push_back(h5);

  // H6: unique nondegenerate saddle of the resonant potential; H8 resonant alongside.
  HypothesisCheck h6 = make_check("H6", "unique nondegenerate maximum of a U* at every resonance sample");
  h6.measured = std::numeric_limits<double>::infinity();
  h6.threshold = NormalFormOptions{}.beta_min;
  HypothesisCheck h8r = make_check("H8-resonant", "critical points of L*_{k0,l0} with |theta_m - saddle| >= rho are nondegenerate and "
                      "the resonant determinant is nonzero there");
  h8r.measured = std::numeric_limits<double>::infinity();
  h8r.threshold = opt.nondeg_tol;
  Melnikov M(m);
  const bool degenerate = M.degenerate();
  AveragingOptions ao;
  ao.m0 = opt.m0;
  ao.L = dom.L();
  ao.secular = web.secular_modes();
  Averager avg(m, ao);
  std::mutex mu;
  struct ResJob {
    std::size_t r;
    Vec p;
  };
  std::vector<ResJob> jobs;
  for (std::size_t r = 0; r < secular.size(); ++r) {
    if (tangent[r]) continue;
    for (const Vec& p : samples[r])
      if (dom.clearance(p) >= opt.delta) jobs.push_back({r, p});
  }
  const auto angles = torus_grid(d, opt.angle_grid);
  parallel_for(
      static_cast<int>(jobs.size()),
      [&](int jb) {
        const Resonance& R = secular[jobs[jb].r];
        const Vec& p = jobs[jb].p;
        const int slot = resonant_slot(R.kl);
        NormalForm nf;
        try {
          nf = resonant_normal_form(avg, R, resonant_hat(R.kl, slot, p));
        } catch (const ModelError& e) {
          std::lock_guard<std::mutex> lk(mu);
          ++h6.samples;
          h6.status = Status::Fail;
          add_witness(h6, {p, Vec(), 0.0, mode_str(R.kl) + ": " + e.what()}, cap);
          return;
        }
        {
          std::lock_guard<std::mutex> lk(mu);
          ++h6.samples;
          h6.measured = std::min(h6.measured, std::abs(nf.U2_saddle));
        }
        if (degenerate) return;
        // critical points of L*(B*, .) away from the saddle of U*
        auto P = M.at(nf.Bstar);
        const double sc = std::max(1e-300, P->scale());
        std::vector<ReducedPoincare> vals(angles.size());
        for (std::size_t k = 0; k < angles.size(); ++k) vals[k] = M.reduced(nf.Bstar, angles[k]);
        auto cr = critical_points_scan(M, nf.Bstar, opt.angle_grid, &vals);
        ResonantAngles A{&nf};
        double Umin = std::numeric_limits<double>::infinity(), Umax = -Umin;
        for (int i = 0; i < 256; ++i) {
          double u = nf.U_at(kTwoPi * i / 256);
          Umin = std::min(Umin, u);
          Umax = std::max(Umax, u);
        }
        const double sg = nf.a > 0 ? 1.0 : -1.0;
        const double osc = std::max(Umax - Umin, 1e-300);
        std::lock_guard<std::mutex> lk(mu);
        for (const Vec& z : cr.degenerate) {
          h8r.status = Status::Fail;
          add_witness(h8r, {nf.Bstar, z, 0.0, "degenerate critical set on " + mode_str(R.kl)}, cap);
        }
        for (std::size_t c = 0; c < cr.points.size(); ++c) {
          const Vec Th = A.Theta(cr.points[c].theta);
          const double tm = Th[d - 1];
          if (std::abs(std::remainder(tm - nf.saddle, kTwoPi)) < opt.rho) continue;
          ++h8r.samples;
          auto RR = resonant_reduced(M, nf, Th);
          if (!RR.ok) continue;
          const double hd = std::abs(RR.hess.determinant()) / std::pow(sc, d);
          double cond = std::numeric_limits<double>::infinity();
          for (double f : {0.0, 0.5, 2.0}) {
            const double em = nf.U_saddle + sg * f * osc;
            cond = std::min(cond, std::abs(resonant_condition(nf, RR, tm, em)) / (osc * std::pow(sc, d)));
          }
          const double q = std::min(hd, cond);
          h8r.measured = std::min(h8r.measured, q);
          if (q <= opt.nondeg_tol) {
            h8r.status = Status::Fail;
            add_witness(h8r, {nf.Bstar, cr.points[c].theta, q, "on " + mode_str(R.kl)}, cap);
          }
        }
      },
      opt.threads);
  if (h6.samples == 0) {
    h6.status = Status::NotApplicable;
    h6.detail = secular.empty() ? "no secular resonances" : "no admissible resonance samples";
    h6.measured = 0;
  }
  rep.checks.push_back(h6);

  // H7 and non-resonant H8 over the (I, theta) grid.
  HypothesisCheck h7 = make_check("H7", "first-crest tau* exists with nondegenerate d2L/dtau2 for some theta at every I");
  HypothesisCheck h8 = make_check("H8", "critical points of theta -> L*(I, theta) are nondegenerate");
  h8.threshold = opt.nondeg_tol;
  if (degenerate) {
    h7.status = h8.status = h8r.status = Status::NotApplicable;
    h7.detail = h8.detail = h8r.detail = "Q does not depend on (p, q): the Poincare function vanishes identically";
  } else {
    h7.measured = 1.0;
    h8.measured = std::numeric_limits<double>::infinity();
    double covered = 0, tested = 0;
    parallel_for(
        static_cast<int>(Igrid.size()),
        [&](int ii) {
          const Vec& I = Igrid[ii];
          std::vector<ReducedPoincare> vals(angles.size());
          int ok = 0;
          for (std::size_t k = 0; k < angles.size(); ++k) {
            vals[k] = M.reduced(I, angles[k]);
            ok += vals[k].ok;
          }
          const double frac = double(ok) / angles.size();
          bool inside = false;
          for (const auto& R : secular)
            if (resonance_distance(m, R.kl, I) < dom.L()) inside = true;
          CriticalScan cr;
          const double sc = std::max(1e-300, M.at(I)->scale());
          if (!inside && ok > 0) cr = critical_points_scan(M, I, opt.angle_grid, &vals);
          std::lock_guard<std::mutex> lk(mu);
          ++h7.samples;
          covered += frac;
          h7.measured = std::min(h7.measured, frac);
          if (ok == 0) {
            h7.status = Status::Fail;
            add_witness(h7, {I, Vec(), 0.0, "no theta with a nondegenerate first crest"}, cap);
          }
          if (inside || ok == 0) return;
          ++tested;
          for (const Vec& z : cr.degenerate) {
            h8.status = Status::Fail;
            add_witness(h8, {I, z, 0.0, "degenerate critical set"}, cap);
            h8.measured = 0;
          }
          for (std::size_t c = 0; c < cr.points.size(); ++c) {
            ++h8.samples;
            const double q = std::abs(cr.points[c].det) / std::pow(sc, d);
            h8.measured = std::min(h8.measured, q);
            if (q <= opt.nondeg_tol) {
              h8.status = Status::Fail;
              add_witness(h8, {I, cr.points[c].theta, q, "degenerate critical point"}, cap);
            }
          }
          if (cr.points.empty() && cr.degenerate.empty()) {
            h8.status = Status::Fail;
            add_witness(h8, {I, Vec(), 0.0, "no critical point found"}, cap);
          }
        },
        opt.threads);
    h7.diagnostics["coverage"] = h7.samples ? covered / h7.samples : 0.0;
    h8.diagnostics["actions_tested"] = tested;
    if (h8r.samples == 0 && h8r.status == Status::Pass) {
      h8r.status = Status::NotApplicable;
      h8r.detail = "no admissible resonance samples";
      h8r.measured = 0;
    }
  }
  rep.checks.push_back(h7);
  rep.checks.push_back(h8);
  rep.checks.push_back(h8r);
  return rep;
}

}  // namespace resonet
