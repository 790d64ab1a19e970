#include "coorddelay/classify.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "coorddelay/util/parallel.hpp"

namespace coorddelay {

using Eigen::Index;
using Eigen::MatrixXd;

std::size_t SplitLabels::low_count() const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), kLow));
}
std::size_t SplitLabels::high_count() const { return labels.size() - low_count(); }

SplitLabels median_split(std::span<const double> y) {
  if (y.size() < 2) throw std::invalid_argument("median split needs at least two observations");
  std::vector<double> sorted(y.begin(), y.end());
  std::sort(sorted.begin(), sorted.end());
  std::size_t n = sorted.size();
  SplitLabels out;
  out.threshold = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  out.labels.reserve(n);
  for (double v : y) out.labels.push_back(v <= out.threshold ? kLow : kHigh);
  return out;
}

namespace {

struct Grower {
  const MatrixXd& X;
  std::span<const int> labels;
  const std::vector<char>& binary;
  const ForestOptions& opt;
  int mtry;
  std::mt19937_64& rng;
  RandomForest::Tree tree;
  std::vector<int> features;
  std::vector<std::pair<double, int>> buffer;

  static int majority(int c0, int c1) { return c1 > c0 ? 1 : 0; }

  int grow(std::vector<std::size_t>& rows, int depth) {
    int c1 = 0;
    for (auto r : rows) c1 += labels[r];
    int c0 = static_cast<int>(rows.size()) - c1;
    int id = static_cast<int>(tree.size());
    tree.push_back({});
    tree[static_cast<std::size_t>(id)].label = majority(c0, c1);
    bool stop = c0 == 0 || c1 == 0 || static_cast<int>(rows.size()) < 2 * opt.min_leaf ||
                (opt.max_depth > 0 && depth >= opt.max_depth);
    if (stop) return id;

    // Partial Fisher-Yates draw of mtry features.
    const int k = static_cast<int>(features.size());
    for (int i = 0; i < mtry; ++i) {
      std::uniform_int_distribution<int> pick(i, k - 1);
      std::swap(features[static_cast<std::size_t>(i)], features[static_cast<std::size_t>(pick(rng))]);
    }
    const double n = static_cast<double>(rows.size());
    const double parent = (double(c0) * c0 + double(c1) * c1) / n;
    double best_score = parent + 1e-12;
    int best_feature = -1;
    double best_threshold = 0.0;
    for (int fi = 0; fi < mtry; ++fi) {
      int f = features[static_cast<std::size_t>(fi)];
      if (binary[static_cast<std::size_t>(f)]) {
        int l0 = 0, l1 = 0;
        for (auto r : rows) {
          if (X(static_cast<Index>(r), f) == 0.0) (labels[r] ? l1 : l0)++;
        }
        int nl = l0 + l1;
        int nr = static_cast<int>(rows.size()) - nl;
        if (nl < opt.min_leaf || nr < opt.min_leaf) continue;
        int r0 = c0 - l0, r1 = c1 - l1;
        double score = (double(l0) * l0 + double(l1) * l1) / nl + (double(r0) * r0 + double(r1) * r1) / nr;
        if (score > best_score) {
          best_score = score;
          best_feature = f;
          best_threshold = 0.5;
        }
        continue;
      }
      buffer.clear();
      for (auto r : rows) buffer.emplace_back(X(static_cast<Index>(r), f), labels[r]);
      std::sort(buffer.begin(), buffer.end());
      int l0 = 0, l1 = 0;
      for (std::size_t i = 0; i + 1 < buffer.size(); ++i) {
        (buffer[i].second ? l1 : l0)++;
        if (buffer[i].first == buffer[i + 1].first) continue;
        int nl = static_cast<int>(i + 1);
        int nr = static_cast<int>(buffer.size()) - nl;
        if (nl < opt.min_leaf || nr < opt.min_leaf) continue;
        int r0 = c0 - l0, r1 = c1 - l1;
        double score = (double(l0) * l0 + double(l1) * l1) / nl + (double(r0) * r0 + double(r1) * r1) / nr;
        if (score > best_score) {
          best_score = score;
          best_feature = f;
          best_threshold = 0.5 * (buffer[i].first + buffer[i + 1].first);
        }
      }
    }
    if (best_feature < 0) return id;

    std::vector<std::size_t> left, right;
    for (auto r : rows) (X(static_cast<Index>(r), best_feature) <= best_threshold ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    int l = grow(left, depth + 1);
    int rgt = grow(right, depth + 1);
    auto& node = tree[static_cast<std::size_t>(id)];
    node.feature = best_feature;
    node.threshold = best_threshold;
    node.left = l;
    node.right = rgt;
    return id;
  }
};

int predict_tree(const RandomForest::Tree& tree, const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  std::size_t i = 0;
  while (tree[i].feature >= 0) {
    i = static_cast<std::size_t>(x(tree[i].feature) <= tree[i].threshold ? tree[i].left : tree[i].right);
  }
  return tree[i].label;
}

}  // namespace

void RandomForest::fit(const MatrixXd& X, std::span<const int> labels, const ForestOptions& options,
                       std::uint64_t seed) {
  const Index n = X.rows();
  const int k = static_cast<int>(X.cols());
  if (n == 0 || k == 0) throw std::invalid_argument("random forest needs a non-empty design");
  if (static_cast<Index>(labels.size()) != n) throw std::invalid_argument("random forest: label count differs");
  if (options.trees < 1 || options.min_leaf < 1) throw std::invalid_argument("random forest: invalid options");
  int mtry = options.mtry > 0 ? std::min(options.mtry, k) : std::max(1, static_cast<int>(std::sqrt(double(k))));

  std::vector<char> binary(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) {
    binary[static_cast<std::size_t>(j)] = (X.col(j).array() == 0.0 || X.col(j).array() == 1.0).all();
  }
  trees_.assign(static_cast<std::size_t>(options.trees), {});
  parallel_for(static_cast<std::size_t>(options.trees), [&](std::size_t t) {
    std::mt19937_64 rng(stream_seed(seed, t));
    std::uniform_int_distribution<Index> pick(0, n - 1);
    std::vector<std::size_t> rows(static_cast<std::size_t>(n));
    for (auto& r : rows) r = static_cast<std::size_t>(pick(rng));
    Grower g{X, labels, binary, options, mtry, rng, {}, {}, {}};
    g.features.resize(static_cast<std::size_t>(k));
    std::iota(g.features.begin(), g.features.end(), 0);
    g.grow(rows, 0);
    trees_[t] = std::move(g.tree);
  });
}

int RandomForest::predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  std::size_t votes = 0;
  for (const auto& t : trees_) votes += static_cast<std::size_t>(predict_tree(t, x));
  return 2 * votes > trees_.size() ? kHigh : kLow;
}

std::vector<int> RandomForest::predict_all(const MatrixXd& X) const {
  std::vector<int> out(static_cast<std::size_t>(X.rows()));
  for (Index i = 0; i < X.rows(); ++i) out[static_cast<std::size_t>(i)] = predict(X.row(i));
  return out;
}

TestSplit make_test_split(std::span<const int> labels, double test_fraction, std::uint64_t seed, bool stratified) {
  if (!(test_fraction > 0.0 && test_fraction < 0.5)) throw std::invalid_argument("test fraction must lie in (0, 0.5)");
  std::mt19937_64 rng(stream_seed(seed, 0x7e57));
  std::vector<std::vector<std::size_t>> groups(stratified ? 2 : 1);
  for (std::size_t i = 0; i < labels.size(); ++i) groups[stratified ? static_cast<std::size_t>(labels[i] != 0) : 0].push_back(i);
  TestSplit split;
  for (auto& g : groups) {
    std::shuffle(g.begin(), g.end(), rng);
    auto take = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(g.size())));
    split.test.insert(split.test.end(), g.begin(), g.begin() + static_cast<std::ptrdiff_t>(take));
    split.train.insert(split.train.end(), g.begin() + static_cast<std::ptrdiff_t>(take), g.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

std::vector<int> mtry_grid(int k) {
  int root = static_cast<int>(std::sqrt(static_cast<double>(k)));
  std::vector<int> grid;
  for (int m : {root / 2, root, 2 * root}) {
    m = std::clamp(m, 1, std::max(k, 1));
    if (std::find(grid.begin(), grid.end(), m) == grid.end()) grid.push_back(m);
  }
  return grid;
}

namespace {

MatrixXd take_rows(const MatrixXd& X, std::span<const std::size_t> rows) {
  MatrixXd out(static_cast<Index>(rows.size()), X.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = X.row(static_cast<Index>(rows[i]));
  return out;
}

std::vector<int> take_labels(std::span<const int> labels, std::span<const std::size_t> rows) {
  std::vector<int> out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(labels[r]);
  return out;
}

}  // namespace

ClassificationResult train_and_evaluate(const MatrixXd& X_in, std::span<const int> labels, const TestSplit& split,
                                        const ClassifyOptions& options, Diagnostics* diag) {
  if (options.folds < 2) throw std::invalid_argument("cross-validation needs at least two folds");
  if (split.train.empty() || split.test.empty()) throw std::invalid_argument("empty training or test set");
  std::vector<Index> keep;
  for (Index j = 0; j < X_in.cols(); ++j) {
    if (!(X_in.col(j).array() == 1.0).all()) keep.push_back(j);
  }
  if (keep.empty()) throw std::invalid_argument("no features left after dropping the intercept");
  MatrixXd X(X_in.rows(), static_cast<Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j) X.col(static_cast<Index>(j)) = X_in.col(keep[j]);

  MatrixXd Xtr = take_rows(X, split.train);
  std::vector<int> ytr = take_labels(labels, split.train);

  // Stratified fold assignment over the training rows.
  std::mt19937_64 rng(stream_seed(options.seed, 0xf01d));
  std::vector<int> fold(ytr.size());
  for (int cls : {kLow, kHigh}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < ytr.size(); ++i) {
      if (ytr[i] == cls) idx.push_back(i);
    }
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t i = 0; i < idx.size(); ++i) fold[idx[i]] = static_cast<int>(i % static_cast<std::size_t>(options.folds));
  }

  ClassificationResult result;
  result.cv_accuracy = -1.0;
  // A fixed mtry skips tuning.
  const auto grid = options.forest.mtry > 0
                        ? std::vector<int>{std::min(options.forest.mtry, static_cast<int>(X.cols()))}
                        : mtry_grid(static_cast<int>(X.cols()));
  for (std::size_t g = 0; g < grid.size(); ++g) {
    std::size_t correct = 0;
    std::size_t total = 0;
    for (int f = 0; f < options.folds; ++f) {
      std::vector<std::size_t> in, out;
      for (std::size_t i = 0; i < ytr.size(); ++i) (fold[i] == f ? out : in).push_back(i);
      if (out.empty() || in.empty()) continue;
      auto yin = take_labels(ytr, in);
      if (std::all_of(yin.begin(), yin.end(), [&](int v) { return v == yin.front(); }) && diag) {
        diag->count("single_class_fold");
        diag->warn("cross-validation fold " + std::to_string(f) + " trains on a single class");
      }
      ForestOptions fo = options.forest;
      fo.mtry = grid[g];
      RandomForest rf;
      rf.fit(take_rows(Xtr, in), yin, fo, stream_seed(options.seed, 1000 * (g + 1) + static_cast<std::size_t>(f)));
      auto pred = rf.predict_all(take_rows(Xtr, out));
      for (std::size_t i = 0; i < out.size(); ++i) correct += pred[i] == ytr[out[i]];
      total += out.size();
    }
    double acc = total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
    if (acc > result.cv_accuracy) {
      result.cv_accuracy = acc;
      result.mtry = grid[g];
    }
  }

  ForestOptions fo = options.forest;
  fo.mtry = result.mtry;
  RandomForest rf;
  rf.fit(Xtr, ytr, fo, stream_seed(options.seed, 0xf1a1));
  auto pred = rf.predict_all(take_rows(X, split.test));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < split.test.size(); ++i) correct += pred[i] == labels[split.test[i]];
  result.test_accuracy = static_cast<double>(correct) / static_cast<double>(split.test.size());
  return result;
}

}  // namespace coorddelay
