#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "rlcc_lab/common.hpp"
#include "rlcc_lab/policy.hpp"

namespace rlcc {

// Dense row-major feature matrix plus regression labels.
struct Dataset {
  int n_features = 0;
  std::vector<double> x;  // rows * n_features
  std::vector<double> y;

  std::size_t rows() const { return y.size(); }
  std::span<const double> row(std::size_t i) const {
    return {x.data() + i * static_cast<std::size_t>(n_features), static_cast<std::size_t>(n_features)};
  }
  void add(std::span<const double> features, double label) {
    if (n_features == 0) n_features = static_cast<int>(features.size());
    if (static_cast<int>(features.size()) != n_features) throw ContractViolation("dataset: feature width mismatch");
    x.insert(x.end(), features.begin(), features.end());
    y.push_back(label);
  }
};

struct TreeNode {
  bool leaf = true;
  int feature = -1;
  double threshold = 0.0;  // x[feature] <= threshold goes left
  int left = -1;
  int right = -1;
  double value = 0.0;
};

// Binary regression tree; node 0 is the root, nodes are stored in preorder.
class RegressionTree {
 public:
  std::vector<TreeNode> nodes;

  double predict(std::span<const double> x) const {
    int i = 0;
    while (!nodes[static_cast<std::size_t>(i)].leaf) {
      const auto& n = nodes[static_cast<std::size_t>(i)];
      i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(i)].value;
  }

  // Number of comparisons on the longest root-to-leaf path.
  int depth() const { return nodes.empty() ? 0 : depth_from(0); }

 private:
  int depth_from(int i) const {
    const auto& n = nodes[static_cast<std::size_t>(i)];
    if (n.leaf) return 0;
    return 1 + std::max(depth_from(n.left), depth_from(n.right));
  }
};

struct FitConfig {
  int trees = 10;       // boosting rounds
  int max_depth = 4;
  double eta = 0.3;     // shrinkage
  int min_leaf = 20;
  int n_thresholds = 32;

  void validate() const {
    if (trees < 1) throw ConfigError("fit: trees must be >= 1");
    if (max_depth < 0) throw ConfigError("fit: max_depth must be >= 0");
    if (!(eta > 0.0 && eta <= 1.0)) throw ConfigError("fit: eta must be in (0, 1]");
    if (min_leaf < 1) throw ConfigError("fit: min_leaf must be >= 1");
    if (n_thresholds < 1) throw ConfigError("fit: n_thresholds must be >= 1");
  }
};

inline constexpr int kOpBudget = 150;

struct TreeEnsemble {
  int n_features = 0;
  int max_depth = 0;
  double base = 0.0;
  double eta = 1.0;
  std::vector<RegressionTree> trees;
  std::vector<double> train_rmse;  // after each round (index 0: base only)

  // F0 + eta * sum of leaf values, accumulated in tree order.
  double predict(std::span<const double> x) const {
    double acc = 0.0;
    for (const auto& t : trees) acc += t.predict(x);
    return base + eta * acc;
  }
};

inline double ensemble_predict(const TreeEnsemble& e, std::span<const double> x) {
  if (static_cast<int>(x.size()) != e.n_features && !e.trees.empty())
    throw ContractViolation("ensemble_predict: feature width mismatch");
  return e.predict(x);
}

// Worst-case comparisons plus one leaf addition per tree plus the base add.
inline int count_ops(const TreeEnsemble& e) {
  int ops = 1;
  for (const auto& t : e.trees) ops += t.depth() + 1;
  return ops;
}

namespace detail {

// Candidate thresholds: midpoints between consecutive distinct values, thinned
// to at most `k` at evenly spaced quantile positions.
inline std::vector<double> split_candidates(std::vector<double> values, int k) {
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  std::vector<double> mids;
  for (std::size_t i = 0; i + 1 < values.size(); ++i) mids.push_back(0.5 * (values[i] + values[i + 1]));
  if (static_cast<int>(mids.size()) <= k) return mids;
  std::vector<double> out;
  for (int j = 0; j < k; ++j) {
    const std::size_t idx = (static_cast<std::size_t>(2 * j + 1) * mids.size()) / static_cast<std::size_t>(2 * k);
    if (out.empty() || mids[idx] != out.back()) out.push_back(mids[idx]);
  }
  return out;
}

struct Binned {
  std::vector<std::vector<double>> thresholds;  // per feature
  std::vector<std::uint8_t> bins;               // rows * features, bin = #thresholds strictly below x
  int n_features = 0;

  int bin(std::size_t row, int f) const { return bins[row * static_cast<std::size_t>(n_features) + static_cast<std::size_t>(f)]; }
};

inline Binned bin_dataset(const Dataset& d, int n_thresholds) {
  Binned b;
  b.n_features = d.n_features;
  b.thresholds.resize(static_cast<std::size_t>(d.n_features));
  b.bins.resize(d.rows() * static_cast<std::size_t>(d.n_features));
  std::vector<double> col(d.rows());
  for (int f = 0; f < d.n_features; ++f) {
    for (std::size_t i = 0; i < d.rows(); ++i) col[i] = d.row(i)[static_cast<std::size_t>(f)];
    auto& th = b.thresholds[static_cast<std::size_t>(f)];
    th = split_candidates(col, std::min(n_thresholds, 255));
    for (std::size_t i = 0; i < d.rows(); ++i) {
      // first threshold with x <= t; rows in bins <= j satisfy x <= th[j]
      const auto it = std::lower_bound(th.begin(), th.end(), col[i]);
      b.bins[i * static_cast<std::size_t>(d.n_features) + static_cast<std::size_t>(f)] =
          static_cast<std::uint8_t>(it - th.begin());
    }
  }
  return b;
}

struct TreeBuilder {
  const Binned& binned;
  const std::vector<double>& residual;
  const FitConfig& cfg;
  RegressionTree tree;

  int build(std::vector<std::size_t>& rows, int depth) {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    double sum = 0.0;
    for (auto r : rows) sum += residual[r];
    const double n = static_cast<double>(rows.size());
    const double mean = rows.empty() ? 0.0 : sum / n;
    tree.nodes[static_cast<std::size_t>(id)].value = mean;
    if (depth >= cfg.max_depth || static_cast<int>(rows.size()) < 2 * cfg.min_leaf) return id;

    // histogram search; ties keep the first (feature, threshold) in scan order
    double best_gain = 1e-12 * std::max(1.0, sum * sum / std::max(n, 1.0));
    int best_f = -1;
    int best_j = -1;
    const double parent = sum * sum / n;
    for (int f = 0; f < binned.n_features; ++f) {
      const auto& th = binned.thresholds[static_cast<std::size_t>(f)];
      if (th.empty()) continue;
      std::vector<double> hs(th.size() + 1, 0.0);
      std::vector<std::size_t> hc(th.size() + 1, 0);
      for (auto r : rows) {
        const int b = binned.bin(r, f);
        hs[static_cast<std::size_t>(b)] += residual[r];
        hc[static_cast<std::size_t>(b)] += 1;
      }
      double ls = 0.0;
      std::size_t lc = 0;
      for (std::size_t j = 0; j < th.size(); ++j) {
        ls += hs[j];
        lc += hc[j];
        const std::size_t rc = rows.size() - lc;
        if (static_cast<int>(lc) < cfg.min_leaf || static_cast<int>(rc) < cfg.min_leaf) continue;
        const double rs = sum - ls;
        const double gain = ls * ls / static_cast<double>(lc) + rs * rs / static_cast<double>(rc) - parent;
        if (gain > best_gain) {
          best_gain = gain;
          best_f = f;
          best_j = static_cast<int>(j);
        }
      }
    }
    if (best_f < 0) return id;

    std::vector<std::size_t> left_rows, right_rows;
    for (auto r : rows) (binned.bin(r, best_f) <= best_j ? left_rows : right_rows).push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    auto& node = tree.nodes[static_cast<std::size_t>(id)];
    node.leaf = false;
    node.feature = best_f;
    node.threshold = binned.thresholds[static_cast<std::size_t>(best_f)][static_cast<std::size_t>(best_j)];
    const int l = build(left_rows, depth + 1);
    const int r = build(right_rows, depth + 1);
    tree.nodes[static_cast<std::size_t>(id)].left = l;
    tree.nodes[static_cast<std::size_t>(id)].right = r;
    return id;
  }
};

inline double rmse(std::span<const double> a, std::span<const double> b) {
  if (a.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s / static_cast<double>(a.size()));
}

}  // namespace detail

// Least-squares gradient boosting with depth-limited CART base learners.
inline TreeEnsemble fit_gbt(const Dataset& data, const FitConfig& cfg) {
  cfg.validate();
  if (data.rows() == 0) throw ConfigError("fit_gbt: empty training set");
  for (double v : data.x) require_finite(v, "training features");
  for (double v : data.y) require_finite(v, "training labels");

  TreeEnsemble ens;
  ens.n_features = data.n_features;
  ens.max_depth = cfg.max_depth;
  ens.eta = cfg.eta;
  ens.base = std::accumulate(data.y.begin(), data.y.end(), 0.0) / static_cast<double>(data.rows());

  const auto binned = detail::bin_dataset(data, cfg.n_thresholds);
  std::vector<double> pred(data.rows(), ens.base);
  std::vector<double> leaf_sum(data.rows(), 0.0);
  std::vector<double> residual(data.rows());
  ens.train_rmse.push_back(detail::rmse(pred, data.y));
  for (int t = 0; t < cfg.trees; ++t) {
    for (std::size_t i = 0; i < data.rows(); ++i) residual[i] = data.y[i] - pred[i];
    detail::TreeBuilder builder{binned, residual, cfg, {}};
    std::vector<std::size_t> rows(data.rows());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    builder.build(rows, 0);
    ens.trees.push_back(std::move(builder.tree));
    const auto& tree = ens.trees.back();
    for (std::size_t i = 0; i < data.rows(); ++i) {
      leaf_sum[i] += tree.predict(data.row(i));
      pred[i] = ens.base + ens.eta * leaf_sum[i];
    }
    ens.train_rmse.push_back(detail::rmse(pred, data.y));
  }
  const int ops = count_ops(ens);
  if (cfg.trees <= 10 && cfg.max_depth <= 4 && ops > kOpBudget)
    throw ContractViolation("fit_gbt: op budget exceeded (" + std::to_string(ops) + ")");
  return ens;
}

// ---------------------------------------------------------------------------
// Structured description
//
//   rlcc-gbt 1
//   trees <T> depth <D> eta <eta> base <F0> ops <count> features <m>
//   tree,node,kind,feature,threshold|value
//   0,0,split,3,0.5
//   0,1,leaf,-1,-0.25
//   ...
// Nodes are listed in preorder per tree; a split's left subtree follows it
// immediately, then its right subtree.
// ---------------------------------------------------------------------------

inline void save_ensemble(std::ostream& os, const TreeEnsemble& e) {
  os << "rlcc-gbt 1\n";
  os << "trees " << e.trees.size() << " depth " << e.max_depth << " eta " << fmt17(e.eta) << " base "
     << fmt17(e.base) << " ops " << count_ops(e) << " features " << e.n_features << "\n";
  os << "tree,node,kind,feature,threshold|value\n";
  for (std::size_t t = 0; t < e.trees.size(); ++t) {
    const auto& nodes = e.trees[t].nodes;
    // emit in preorder regardless of storage order
    std::vector<int> stack{0};
    int k = 0;
    while (!stack.empty()) {
      const int i = stack.back();
      stack.pop_back();
      const auto& n = nodes[static_cast<std::size_t>(i)];
      if (n.leaf) {
        os << t << ',' << k << ",leaf,-1," << fmt17(n.value) << "\n";
      } else {
        os << t << ',' << k << ",split," << n.feature << ',' << fmt17(n.threshold) << "\n";
        stack.push_back(n.right);
        stack.push_back(n.left);
      }
      ++k;
    }
  }
}

inline TreeEnsemble load_ensemble(std::istream& is) {
  std::string line;
  auto next_line = [&]() -> bool {
    while (std::getline(is, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) return true;
    }
    return false;
  };
  if (!next_line() || line != "rlcc-gbt 1") throw ConfigError("ensemble: bad magic line '" + line + "'");
  if (!next_line()) throw ConfigError("ensemble: missing header");
  TreeEnsemble e;
  std::size_t n_trees = 0;
  int ops = 0;
  {
    std::istringstream hs(line);
    std::string k1, k2, k3, k4, k5, k6;
    if (!(hs >> k1 >> n_trees >> k2 >> e.max_depth >> k3 >> e.eta >> k4 >> e.base >> k5 >> ops >> k6 >> e.n_features) ||
        k1 != "trees" || k2 != "depth" || k3 != "eta" || k4 != "base" || k5 != "ops" || k6 != "features")
      throw ConfigError("ensemble: malformed header '" + line + "'");
  }
  if (!next_line() || line != "tree,node,kind,feature,threshold|value")
    throw ConfigError("ensemble: missing column header");

  struct Row {
    std::size_t tree;
    bool leaf;
    int feature;
    double v;
  };
  std::vector<std::vector<Row>> per_tree(n_trees);
  while (next_line()) {
    std::istringstream ls(line);
    std::string cell[5];
    for (int c = 0; c < 5; ++c)
      if (!std::getline(ls, cell[c], ',')) throw ConfigError("ensemble: malformed node line '" + line + "'");
    Row r{};
    try {
      r.tree = std::stoul(cell[0]);
      r.leaf = cell[2] == "leaf";
      if (!r.leaf && cell[2] != "split") throw ConfigError("ensemble: bad node kind '" + cell[2] + "'");
      r.feature = std::stoi(cell[3]);
      r.v = std::strtod(cell[4].c_str(), nullptr);
    } catch (const std::logic_error&) {
      throw ConfigError("ensemble: malformed node line '" + line + "'");
    }
    if (r.tree >= n_trees) throw ConfigError("ensemble: node references tree beyond header count");
    per_tree[r.tree].push_back(r);
  }
  for (auto& rows : per_tree) {
    RegressionTree t;
    std::size_t pos = 0;
    auto build = [&](auto&& self) -> int {
      if (pos >= rows.size()) throw ConfigError("ensemble: truncated tree");
      const Row r = rows[pos++];
      const int id = static_cast<int>(t.nodes.size());
      t.nodes.emplace_back();
      if (r.leaf) {
        t.nodes[static_cast<std::size_t>(id)].value = r.v;
        return id;
      }
      if (r.feature < 0 || r.feature >= e.n_features) throw ConfigError("ensemble: split feature out of range");
      const int l = self(self);
      const int rr = self(self);
      auto& n = t.nodes[static_cast<std::size_t>(id)];
      n.leaf = false;
      n.feature = r.feature;
      n.threshold = r.v;
      n.left = l;
      n.right = rr;
      return id;
    };
    build(build);
    if (pos != rows.size()) throw ConfigError("ensemble: trailing nodes in tree");
    e.trees.push_back(std::move(t));
  }
  if (count_ops(e) != ops) throw ConfigError("ensemble: op count in header does not match the trees");
  return e;
}

// Nested if/else pseudocode accumulating leaf values into one scalar:
//
//   acc = 0
//   if x[3] <= 0.5 {
//     acc += -0.25
//   } else {
//     acc += 0.25
//   }
//   return 0.1 + 0.3 * acc
inline std::string export_tree_source(const TreeEnsemble& e) {
  std::ostringstream os;
  os << "# rlcc-gbt pseudocode: trees=" << e.trees.size() << " ops=" << count_ops(e) << "\n";
  if (e.trees.empty()) {
    os << "return " << fmt17(e.base) << "\n";
    return os.str();
  }
  os << "acc = 0\n";
  for (std::size_t t = 0; t < e.trees.size(); ++t) {
    os << "# tree " << t << "\n";
    const auto& nodes = e.trees[t].nodes;
    auto emit = [&](auto&& self, int i, int indent) -> void {
      const auto& n = nodes[static_cast<std::size_t>(i)];
      const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
      if (n.leaf) {
        os << pad << "acc += " << fmt17(n.value) << "\n";
        return;
      }
      os << pad << "if x[" << n.feature << "] <= " << fmt17(n.threshold) << " {\n";
      self(self, n.left, indent + 1);
      os << pad << "} else {\n";
      self(self, n.right, indent + 1);
      os << pad << "}\n";
    };
    emit(emit, 0, 0);
  }
  os << "return " << fmt17(e.base) << " + " << fmt17(e.eta) << " * acc\n";
  return os.str();
}

}  // namespace rlcc
