#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "coorddelay/classify.hpp"

using namespace coorddelay;

namespace {

struct Dataset {
  Eigen::MatrixXd X;
  std::vector<int> labels;
};

// Two features; the class is the sign of x1 with a margin, the rest is noise.
Dataset separable(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  Dataset d{Eigen::MatrixXd(n, 4), {}};
  for (int i = 0; i < n; ++i) {
    const int label = i % 2;
    d.X(i, 0) = 1.0;
    d.X(i, 1) = (label == kHigh ? 1.0 : -1.0) * (0.5 + std::abs(z(rng)));
    d.X(i, 2) = z(rng);
    d.X(i, 3) = z(rng);
    d.labels.push_back(label);
  }
  return d;
}

}  // namespace

TEST(MedianSplit, Examples) {
  std::vector<double> odd{5, 1, 3};
  auto a = median_split(odd);
  EXPECT_EQ(a.threshold, 3);
  EXPECT_EQ(a.labels, (std::vector<int>{kHigh, kLow, kLow}));
  std::vector<double> even{0, 0, 0, 10};
  auto b = median_split(even);
  EXPECT_EQ(b.threshold, 0);
  EXPECT_EQ(b.low_count(), 3u);
  EXPECT_EQ(b.high_count(), 1u);
  std::vector<double> pair{2, 4};
  EXPECT_EQ(median_split(pair).threshold, 3);
  std::vector<double> one{1};
  EXPECT_THROW(median_split(one), std::invalid_argument);
}

TEST(MtryGrid, SizesAndClipping) {
  EXPECT_EQ(mtry_grid(46), (std::vector<int>{3, 6, 12}));
  EXPECT_EQ(mtry_grid(1), (std::vector<int>{1}));
  EXPECT_EQ(mtry_grid(3), (std::vector<int>{1, 2}));
  for (int k = 1; k < 100; ++k) {
    for (int m : mtry_grid(k)) {
      EXPECT_GE(m, 1);
      EXPECT_LE(m, k);
    }
  }
}

TEST(TestSplit, DisjointAndStratified) {
  std::vector<int> labels;
  for (int i = 0; i < 100; ++i) labels.push_back(i < 30 ? kLow : kHigh);
  auto s = make_test_split(labels, 0.2, 77);
  EXPECT_EQ(s.train.size() + s.test.size(), 100u);
  std::set<std::size_t> all(s.train.begin(), s.train.end());
  all.insert(s.test.begin(), s.test.end());
  EXPECT_EQ(all.size(), 100u);
  const auto low_test = std::count_if(s.test.begin(), s.test.end(), [&](std::size_t i) { return labels[i] == kLow; });
  EXPECT_EQ(low_test, 6);
  EXPECT_EQ(s.test.size(), 20u);
  auto again = make_test_split(labels, 0.2, 77);
  EXPECT_EQ(again.test, s.test);
  EXPECT_THROW(make_test_split(labels, 0.5, 1), std::invalid_argument);
}

TEST(RandomForest, LearnsSeparableData) {
  auto train = separable(300, 1);
  auto test = separable(200, 2);
  RandomForest rf;
  rf.fit(train.X, train.labels, {50, 2, 1, 0}, 5);
  EXPECT_EQ(rf.tree_count(), 50u);
  auto pred = rf.predict_all(test.X);
  int correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == test.labels[i];
  EXPECT_GE(correct / 200.0, 0.95);
}

TEST(RandomForest, DeterministicForSeed) {
  auto d = separable(120, 3);
  RandomForest a, b;
  a.fit(d.X, d.labels, {20, 1, 1, 0}, 9);
  b.fit(d.X, d.labels, {20, 1, 1, 0}, 9);
  EXPECT_EQ(a.predict_all(d.X), b.predict_all(d.X));
}

TEST(TrainAndEvaluate, SeparableAccuracy) {
  auto d = separable(400, 4);
  auto split = make_test_split(d.labels, 0.2, 11);
  ClassifyOptions opts;
  opts.folds = 5;
  opts.forest.trees = 50;
  opts.seed = 13;
  auto r = train_and_evaluate(d.X, d.labels, split, opts);
  EXPECT_GE(r.test_accuracy, 0.95);
  EXPECT_GE(r.cv_accuracy, 0.95);
  EXPECT_GE(r.mtry, 1);
  EXPECT_LE(r.mtry, 3);
  auto again = train_and_evaluate(d.X, d.labels, split, opts);
  EXPECT_EQ(again.test_accuracy, r.test_accuracy);
  EXPECT_EQ(again.mtry, r.mtry);
}

TEST(TrainAndEvaluate, RandomLabelsNearChance) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> z;
  std::bernoulli_distribution coin(0.5);
  const int n = 600;
  Eigen::MatrixXd X(n, 5);
  std::vector<int> labels;
  for (int i = 0; i < n; ++i) {
    X(i, 0) = 1;
    for (int j = 1; j < 5; ++j) X(i, j) = z(rng);
    labels.push_back(coin(rng) ? kHigh : kLow);
  }
  auto split = make_test_split(labels, 0.25, 3);
  ClassifyOptions opts;
  opts.folds = 3;
  opts.forest.trees = 30;
  auto r = train_and_evaluate(X, labels, split, opts);
  EXPECT_NEAR(r.test_accuracy, 0.5, 0.1);
}
