#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "coorddelay/util/diagnostics.hpp"

namespace coorddelay {

inline constexpr int kLow = 0;
inline constexpr int kHigh = 1;

struct SplitLabels {
  double threshold = 0.0;  // sample median
  std::vector<int> labels; // kLow iff y <= threshold
  std::size_t low_count() const;
  std::size_t high_count() const;
};

// Throws std::invalid_argument for fewer than two observations.
SplitLabels median_split(std::span<const double> y);

struct ForestOptions {
  int trees = 500;
  int mtry = 0;      // features tried per split; 0 selects floor(sqrt(k))
  int min_leaf = 1;
  int max_depth = 0; // 0 = unlimited
};

// Binary-label random forest of CART trees grown on bootstrap samples with
// Gini splits over `mtry` random features per node.
class RandomForest {
 public:
  void fit(const Eigen::MatrixXd& X, std::span<const int> labels, const ForestOptions& options, std::uint64_t seed);
  int predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
  std::vector<int> predict_all(const Eigen::MatrixXd& X) const;
  std::size_t tree_count() const { return trees_.size(); }

  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    int label = 0;
  };
  using Tree = std::vector<Node>;

 private:
  std::vector<Tree> trees_;
};

struct TestSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Holds out round(test_fraction * n) rows (per class when stratified).
TestSplit make_test_split(std::span<const int> labels, double test_fraction, std::uint64_t seed,
                          bool stratified = true);

struct ClassifyOptions {
  int folds = 10;
  ForestOptions forest;
  std::uint64_t seed = 1;
};

struct ClassificationResult {
  int mtry = 0;
  double cv_accuracy = 0.0;
  double test_accuracy = 0.0;
};

// Candidate feature-subset sizes {floor(sqrt k)/2, floor(sqrt k), 2 floor(sqrt k)}
// clipped to [1, k] without duplicates.
std::vector<int> mtry_grid(int k);

// Drops all-ones columns, tunes mtry by stratified k-fold CV on split.train,
// refits on all of split.train and scores split.test.
ClassificationResult train_and_evaluate(const Eigen::MatrixXd& X, std::span<const int> labels, const TestSplit& split,
                                        const ClassifyOptions& options, Diagnostics* diag = nullptr);

}  // namespace coorddelay
