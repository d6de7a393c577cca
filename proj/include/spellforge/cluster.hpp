#pragma once

#include <optional>
#include <string>
#include <vector>

#include "spellforge/features.hpp"

namespace spellforge {

enum class Linkage { kWard, kAverage, kComplete };
std::string linkage_name(Linkage l);
Linkage linkage_from_name(const std::string& s);

// Per-column (x - min)/(max - min); constant columns map to 0 and are listed.
struct RescaleResult {
  Eigen::MatrixXd values;
  std::vector<std::string> constant_columns;
};
RescaleResult rescale_unit(const FeatureMatrix& X);

struct Merge {
  // Group ids: 0..n-1 are singletons, n+t is the group formed by merge t.
  int a = 0, b = 0;
  double height = 0.0;
};

struct Dendrogram {
  int n = 0;
  Linkage linkage = Linkage::kWard;
  std::vector<Merge> merges;  // n-1 entries
};

// Agglomerative clustering with Euclidean distances and Lance-Williams
// updates. Ward heights are the squared-distance merge costs.
Dendrogram agglomerate(const Eigen::MatrixXd& X, Linkage linkage, int threads = 1);

// Labels 1..k induced by undoing the last k-1 merges; numbered by first row.
std::vector<int> cut(const Dendrogram& d, int k);

// Pseudo-F. Within-SS of zero with real between-SS yields the +infinity
// sentinel (has_value false in `value`, infinite flag set).
struct PseudoF {
  double value = 0.0;
  bool infinite = false;
};
PseudoF calinski_harabasz(const Eigen::MatrixXd& X, const std::vector<int>& labels);

struct DudaHart {
  int group = 0;        // label of the parent group in the k-partition
  int parent_size = 0;
  double je1 = 0.0, je2 = 0.0;
  double ratio = 0.0;       // Je(2)/Je(1)
  double pseudo_t2 = 0.0;
  bool defined = true;      // false for singleton parents or zero Je values
};

// For the k-partition, evaluates the dendrogram split of each group that the
// (k+1)-partition would divide. Returns entries for the one group that splits.
std::vector<DudaHart> duda_hart(const Eigen::MatrixXd& X, const Dendrogram& d, int k);

struct KSelection {
  int recommended = 2;
  bool low_confidence = false;  // no pronounced interior maximum
  std::vector<int> k_values;
  std::vector<PseudoF> pseudo_f;
  std::vector<std::vector<DudaHart>> duda;  // per k
};
KSelection select_k(const Dendrogram& d, const Eigen::MatrixXd& X, int k_max);

struct GroupProfile {
  int group = 0;
  int size = 0;
  bool suppressed = false;  // below the minimum size: stats withheld
  std::vector<double> mean, sd;  // empty when suppressed
};

struct ClusterReport {
  int k = 0;
  std::vector<int> labels;
  std::vector<std::string> variables;
  std::vector<GroupProfile> groups;
};

ClusterReport group_summary(const Eigen::MatrixXd& X,
                            const std::vector<std::string>& variables,
                            const std::vector<int>& labels, int min_size = 6);

}  // namespace spellforge
