#include "spellforge/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "spellforge/util.hpp"

namespace spellforge {

std::string linkage_name(Linkage l) {
  switch (l) {
    case Linkage::kWard: return "ward";
    case Linkage::kAverage: return "average";
    case Linkage::kComplete: return "complete";
  }
  return "?";
}

Linkage linkage_from_name(const std::string& s) {
  if (s == "ward") return Linkage::kWard;
  if (s == "average") return Linkage::kAverage;
  if (s == "complete") return Linkage::kComplete;
  throw std::invalid_argument("unknown linkage: '" + s + "'");
}

RescaleResult rescale_unit(const FeatureMatrix& X) {
  RescaleResult out;
  out.values.resize(X.rows(), X.cols());
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    double lo = X.values.col(j).minCoeff();
    double hi = X.values.col(j).maxCoeff();
    if (!std::isfinite(lo) || !std::isfinite(hi))
      throw std::invalid_argument("rescale_unit: non-finite column '" +
                                  X.names[static_cast<std::size_t>(j)] + "'");
    if (hi - lo <= 0.0) {
      out.values.col(j).setZero();
      out.constant_columns.push_back(X.names[static_cast<std::size_t>(j)]);
    } else {
      out.values.col(j) = (X.values.col(j).array() - lo) / (hi - lo);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Agglomeration
// ---------------------------------------------------------------------------

Dendrogram agglomerate(const Eigen::MatrixXd& X, Linkage linkage, int threads) {
  const int n = static_cast<int>(X.rows());
  if (n < 2) throw std::invalid_argument("agglomerate: need at least 2 rows");

  // slot s initially holds singleton s; a merge reuses the lower slot
  std::vector<int> group_id(static_cast<std::size_t>(n));
  std::iota(group_id.begin(), group_id.end(), 0);
  std::vector<int> size(static_cast<std::size_t>(n), 1);
  std::vector<char> active(static_cast<std::size_t>(n), 1);

  Eigen::MatrixXd D(n, n);
  parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t i) {
    for (int j = 0; j < n; ++j) {
      double d2 = (X.row(static_cast<Eigen::Index>(i)) - X.row(j)).squaredNorm();
      D(static_cast<Eigen::Index>(i), j) =
          linkage == Linkage::kWard ? d2 : std::sqrt(d2);
    }
  });

  Dendrogram dg;
  dg.n = n;
  dg.linkage = linkage;
  dg.merges.reserve(static_cast<std::size_t>(n - 1));

  for (int step = 0; step < n - 1; ++step) {
    // closest active pair; ties break to the lowest slot indices
    double best = std::numeric_limits<double>::infinity();
    int bi = -1, bj = -1;
    for (int i = 0; i < n; ++i) {
      if (!active[static_cast<std::size_t>(i)]) continue;
      for (int j = i + 1; j < n; ++j) {
        if (!active[static_cast<std::size_t>(j)]) continue;
        if (D(i, j) < best) {
          best = D(i, j);
          bi = i;
          bj = j;
        }
      }
    }
    dg.merges.push_back({group_id[static_cast<std::size_t>(bi)],
                         group_id[static_cast<std::size_t>(bj)], best});

    const double ni = size[static_cast<std::size_t>(bi)];
    const double nj = size[static_cast<std::size_t>(bj)];
    for (int k = 0; k < n; ++k) {
      if (!active[static_cast<std::size_t>(k)] || k == bi || k == bj) continue;
      double dik = D(bi, k), djk = D(bj, k), dij = D(bi, bj);
      double nk = size[static_cast<std::size_t>(k)];
      double d;
      switch (linkage) {
        case Linkage::kWard:
          d = ((ni + nk) * dik + (nj + nk) * djk - nk * dij) / (ni + nj + nk);
          break;
        case Linkage::kAverage:
          d = (ni * dik + nj * djk) / (ni + nj);
          break;
        case Linkage::kComplete:
          d = std::max(dik, djk);
          break;
      }
      D(bi, k) = D(k, bi) = d;
    }
    active[static_cast<std::size_t>(bj)] = 0;
    size[static_cast<std::size_t>(bi)] = static_cast<int>(ni + nj);
    group_id[static_cast<std::size_t>(bi)] = n + step;
  }
  return dg;
}

namespace {

// Rows of every group after applying the first n-k merges.
std::vector<std::vector<int>> partition_rows(const Dendrogram& d, int k) {
  const int n = d.n;
  if (k < 1 || k > n) throw std::invalid_argument("cut: k out of range");
  std::vector<std::vector<int>> members(static_cast<std::size_t>(2 * n - 1));
  for (int i = 0; i < n; ++i) members[static_cast<std::size_t>(i)] = {i};
  std::vector<char> alive(static_cast<std::size_t>(2 * n - 1), 0);
  for (int i = 0; i < n; ++i) alive[static_cast<std::size_t>(i)] = 1;
  const int applied = n - k;
  for (int t = 0; t < applied; ++t) {
    const Merge& m = d.merges[static_cast<std::size_t>(t)];
    auto& dst = members[static_cast<std::size_t>(n + t)];
    dst = members[static_cast<std::size_t>(m.a)];
    dst.insert(dst.end(), members[static_cast<std::size_t>(m.b)].begin(),
               members[static_cast<std::size_t>(m.b)].end());
    std::sort(dst.begin(), dst.end());
    alive[static_cast<std::size_t>(m.a)] = 0;
    alive[static_cast<std::size_t>(m.b)] = 0;
    alive[static_cast<std::size_t>(n + t)] = 1;
  }
  std::vector<std::vector<int>> groups;
  for (std::size_t g = 0; g < alive.size(); ++g)
    if (alive[g]) groups.push_back(members[g]);
  // order groups by their smallest row
  std::sort(groups.begin(), groups.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return groups;
}

double within_ss(const Eigen::MatrixXd& X, const std::vector<int>& rows) {
  if (rows.empty()) return 0.0;
  Eigen::RowVectorXd c = Eigen::RowVectorXd::Zero(X.cols());
  for (int i : rows) c += X.row(i);
  c /= static_cast<double>(rows.size());
  double ss = 0.0;
  for (int i : rows) ss += (X.row(i) - c).squaredNorm();
  return ss;
}

}  // namespace

std::vector<int> cut(const Dendrogram& d, int k) {
  auto groups = partition_rows(d, k);
  std::vector<int> labels(static_cast<std::size_t>(d.n), 0);
  for (std::size_t g = 0; g < groups.size(); ++g)
    for (int i : groups[g]) labels[static_cast<std::size_t>(i)] = static_cast<int>(g) + 1;
  return labels;
}

PseudoF calinski_harabasz(const Eigen::MatrixXd& X, const std::vector<int>& labels) {
  const int n = static_cast<int>(X.rows());
  int k = 0;
  for (int l : labels) k = std::max(k, l);
  if (k < 2 || k > n - 1)
    throw std::invalid_argument("calinski_harabasz: need 2 <= k <= n-1");

  Eigen::RowVectorXd overall = X.colwise().mean();
  std::vector<Eigen::RowVectorXd> centroids(static_cast<std::size_t>(k),
                                            Eigen::RowVectorXd::Zero(X.cols()));
  std::vector<int> sizes(static_cast<std::size_t>(k), 0);
  for (int i = 0; i < n; ++i) {
    centroids[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)] - 1)] +=
        X.row(i);
    ++sizes[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)] - 1)];
  }
  double between = 0.0;
  for (int g = 0; g < k; ++g) {
    if (sizes[static_cast<std::size_t>(g)] == 0) continue;
    centroids[static_cast<std::size_t>(g)] /= sizes[static_cast<std::size_t>(g)];
    between += sizes[static_cast<std::size_t>(g)] *
               (centroids[static_cast<std::size_t>(g)] - overall).squaredNorm();
  }
  double within = 0.0;
  for (int i = 0; i < n; ++i)
    within +=
        (X.row(i) -
         centroids[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)] - 1)])
            .squaredNorm();

  PseudoF out;
  if (within <= 0.0) {
    out.infinite = between > 0.0;
    out.value = out.infinite ? 0.0 : 0.0;
    return out;
  }
  out.value = (between / (k - 1)) / (within / (n - k));
  return out;
}

std::vector<DudaHart> duda_hart(const Eigen::MatrixXd& X, const Dendrogram& d, int k) {
  const int n = d.n;
  if (k < 1 || k >= n) throw std::invalid_argument("duda_hart: k out of range");
  // moving from k to k+1 groups undoes merge n-k-1 (0-based)
  const Merge& m = d.merges[static_cast<std::size_t>(n - k - 1)];

  // recover the two children's rows
  auto groups_k1 = partition_rows(d, k + 1);
  auto groups_k = partition_rows(d, k);

  // parent is the group of the k-partition absent from the (k+1)-partition
  std::vector<int> parent;
  std::vector<int> child_a, child_b;
  for (const auto& g : groups_k) {
    bool found = false;
    for (const auto& h : groups_k1)
      if (h == g) {
        found = true;
        break;
      }
    if (!found) {
      parent = g;
      break;
    }
  }
  for (const auto& h : groups_k1) {
    if (std::includes(parent.begin(), parent.end(), h.begin(), h.end()) &&
        h.size() < parent.size()) {
      if (child_a.empty())
        child_a = h;
      else
        child_b = h;
    }
  }

  DudaHart out;
  out.group = 0;
  for (std::size_t g = 0; g < groups_k.size(); ++g)
    if (groups_k[g] == parent) out.group = static_cast<int>(g) + 1;
  out.parent_size = static_cast<int>(parent.size());
  if (parent.size() < 2) {
    out.defined = false;
    return {out};
  }
  out.je1 = within_ss(X, parent);
  out.je2 = within_ss(X, child_a) + within_ss(X, child_b);
  if (out.je1 <= 0.0) {
    out.ratio = 0.0;
    out.pseudo_t2 = 0.0;
    return {out};
  }
  out.ratio = out.je2 / out.je1;
  if (out.je2 <= 0.0) {
    out.pseudo_t2 = std::numeric_limits<double>::infinity();
  } else if (parent.size() == 2) {
    out.pseudo_t2 = std::numeric_limits<double>::infinity();
  } else {
    out.pseudo_t2 = (out.je1 - out.je2) /
                    (out.je2 / (static_cast<double>(parent.size()) - 2.0));
  }
  (void)m;
  return {out};
}

KSelection select_k(const Dendrogram& d, const Eigen::MatrixXd& X, int k_max) {
  if (k_max > d.n - 1) throw std::invalid_argument("select_k: k_max too large");
  KSelection sel;
  double best = -1.0;
  bool best_inf = false;
  for (int k = 2; k <= k_max; ++k) {
    auto labels = cut(d, k);
    PseudoF pf = calinski_harabasz(X, labels);
    sel.k_values.push_back(k);
    sel.pseudo_f.push_back(pf);
    sel.duda.push_back(duda_hart(X, d, k));
    bool better = pf.infinite ? !best_inf : (!best_inf && pf.value > best);
    if (sel.k_values.size() == 1 || better) {
      if (pf.infinite)
        best_inf = true;
      else
        best = pf.value;
      sel.recommended = k;
    }
  }
  // confidence: the maximum must sit inside the grid and rise sharply out of
  // its left neighbor (or fall into the right one when the peak is at k=2)
  if (sel.recommended == k_max) {
    sel.low_confidence = true;
  } else if (!best_inf) {
    std::size_t idx = static_cast<std::size_t>(sel.recommended - 2);
    const PseudoF& ref =
        sel.recommended > 2 ? sel.pseudo_f[idx - 1] : sel.pseudo_f[idx + 1];
    double neighbor = ref.infinite ? std::numeric_limits<double>::infinity()
                                   : ref.value;
    if (!(best >= 1.5 * neighbor)) sel.low_confidence = true;
  }
  return sel;
}

ClusterReport group_summary(const Eigen::MatrixXd& X,
                            const std::vector<std::string>& variables,
                            const std::vector<int>& labels, int min_size) {
  if (static_cast<Eigen::Index>(labels.size()) != X.rows())
    throw std::invalid_argument("group_summary: label count mismatch");
  int k = 0;
  for (int l : labels) k = std::max(k, l);
  ClusterReport rep;
  rep.k = k;
  rep.labels = labels;
  rep.variables = variables;
  for (int g = 1; g <= k; ++g) {
    std::vector<int> rows;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == g) rows.push_back(static_cast<int>(i));
    GroupProfile p;
    p.group = g;
    p.size = static_cast<int>(rows.size());
    if (p.size < min_size) {
      p.suppressed = true;
    } else {
      for (Eigen::Index j = 0; j < X.cols(); ++j) {
        double mean = 0.0;
        for (int i : rows) mean += X(i, j);
        mean /= p.size;
        double ss = 0.0;
        for (int i : rows) ss += (X(i, j) - mean) * (X(i, j) - mean);
        double sd = p.size > 1 ? std::sqrt(ss / (p.size - 1)) : 0.0;
        p.mean.push_back(mean);
        p.sd.push_back(sd);
      }
    }
    rep.groups.push_back(std::move(p));
  }
  return rep;
}

}  // namespace spellforge
