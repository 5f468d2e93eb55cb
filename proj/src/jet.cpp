#include "resonet/jet.hpp"

#include <map>
#include <mutex>

namespace resonet {

namespace {
void enumerate(int nv, int total, int v, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
  if (v == nv - 1) {
    cur[v] = total;
    out.push_back(cur);
    return;
  }
  for (int k = total; k >= 0; --k) {
    cur[v] = k;
    enumerate(nv, total - k, v + 1, cur, out);
  }
}
}  // namespace

JetSpace::JetSpace(int nv, int deg) : nv_(nv), deg_(deg) {
  if (nv < 1 || deg < 0) throw std::invalid_argument("bad jet space");
  std::vector<int> cur(nv, 0);
  for (int t = 0; t <= deg; ++t) enumerate(nv, t, 0, cur, exps_);
  for (const auto& e : exps_) {
    int s = 0;
    for (int x : e) s += x;
    degs_.push_back(s);
  }
  stride_.assign(nv, 1);
  for (int v = nv - 2; v >= 0; --v) stride_[v] = stride_[v + 1] * (deg + 1);
  lookup_.assign(static_cast<std::size_t>(stride_[0]) * (deg + 1), -1);
  for (int i = 0; i < size(); ++i) {
    int key = 0;
    for (int v = 0; v < nv; ++v) key += exps_[i][v] * stride_[v];
    lookup_[key] = i;
  }
  mul_.resize(size());
  std::vector<int> e(nv);
  for (int i = 0; i < size(); ++i)
    for (int j = 0; j < size(); ++j) {
      if (degs_[i] + degs_[j] > deg) continue;
      for (int v = 0; v < nv; ++v) e[v] = exps_[i][v] + exps_[j][v];
      mul_[i].push_back({j, index(e)});
    }
  dmap_.assign(nv, std::vector<std::pair<int, int>>(size(), {-1, 0}));
  for (int v = 0; v < nv; ++v)
    for (int i = 0; i < size(); ++i) {
      if (exps_[i][v] == 0) continue;
      e = exps_[i];
      e[v] -= 1;
      dmap_[v][i] = {index(e), exps_[i][v]};
    }
}

int JetSpace::index(const std::vector<int>& e) const {
  int key = 0, tot = 0;
  for (int v = 0; v < nv_; ++v) {
    if (e[v] < 0) return -1;
    tot += e[v];
    key += e[v] * stride_[v];
  }
  if (tot > deg_) return -1;
  return lookup_[key];
}

std::shared_ptr<const JetSpace> JetSpace::get(int nv, int deg) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, std::shared_ptr<const JetSpace>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[{nv, deg}];
  if (!slot) slot = std::shared_ptr<const JetSpace>(new JetSpace(nv, deg));
  return slot;
}

}  // namespace resonet
