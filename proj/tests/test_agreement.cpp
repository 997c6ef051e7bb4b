#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Core>

#include "mmc/agreement.hpp"
#include "mmc/errors.hpp"
#include "mmc/synth.hpp"

using namespace mmc;

namespace {

// ICC(2,1) from explicit sum-of-squares loops.
double brute_icc_2_1(const Eigen::MatrixXd& x) {
  const auto n = static_cast<double>(x.rows());
  const auto k = static_cast<double>(x.cols());
  double grand = 0.0;
  for (int i = 0; i < x.rows(); ++i)
    for (int j = 0; j < x.cols(); ++j) grand += x(i, j);
  grand /= n * k;
  double ssr = 0.0, ssc = 0.0, sst = 0.0;
  for (int i = 0; i < x.rows(); ++i) {
    double m = 0.0;
    for (int j = 0; j < x.cols(); ++j) m += x(i, j);
    m /= k;
    ssr += k * (m - grand) * (m - grand);
  }
  for (int j = 0; j < x.cols(); ++j) {
    double m = 0.0;
    for (int i = 0; i < x.rows(); ++i) m += x(i, j);
    m /= n;
    ssc += n * (m - grand) * (m - grand);
  }
  for (int i = 0; i < x.rows(); ++i)
    for (int j = 0; j < x.cols(); ++j) sst += (x(i, j) - grand) * (x(i, j) - grand);
  const double sse = sst - ssr - ssc;
  const double msr = ssr / (n - 1.0);
  const double msc = ssc / (k - 1.0);
  const double mse = sse / ((n - 1.0) * (k - 1.0));
  return (msr - mse) / (msr + (k - 1.0) * mse + k * (msc - mse) / n);
}

Eigen::MatrixXd random_matrix(GaussianSource& rng, int rows, int cols) {
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    const double subject = 3.0 * rng();
    for (int j = 0; j < cols; ++j) m(i, j) = subject + rng();
  }
  return m;
}

std::vector<MeasurementPair> pairs_from_diffs(const std::vector<double>& diffs) {
  std::vector<MeasurementPair> out;
  for (std::size_t i = 0; i < diffs.size(); ++i) {
    const double truth = 10.0 + static_cast<double>(i);
    out.push_back({truth + diffs[i], truth, "P" + std::to_string(i), 0});
  }
  return out;
}

}  // namespace

TEST_CASE("ICC of identical columns is 1") {
  Eigen::MatrixXd m(4, 2);
  m << 1, 1, 2, 2, 3, 3, 5, 5;
  CHECK(icc_2_1(m) == 1.0);
}

TEST_CASE("ICC penalizes a constant offset between raters") {
  // n = 4, k = 2: MSR = 10/3, MSC = 200, MSE = 0, so ICC = (10/3) / (10/3 + 100) = 1/31.
  Eigen::MatrixXd m(4, 2);
  m << 1, 11, 2, 12, 3, 13, 4, 14;
  CHECK(icc_2_1(m) == doctest::Approx(1.0 / 31.0).epsilon(1e-12));
  CHECK(icc_3_1(m) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("ICC matches the brute-force oracle") {
  GaussianSource rng(61);
  for (int trial = 0; trial < 200; ++trial) {
    const auto m = random_matrix(rng, 5, 3);
    CHECK(std::abs(icc_2_1(m) - brute_icc_2_1(m)) < 1e-9);
  }
}

TEST_CASE("ICC is invariant to a global shift and drops with a one-column shift") {
  GaussianSource rng(71);
  for (int trial = 0; trial < 100; ++trial) {
    const auto m = random_matrix(rng, 6, 3);
    const double base = icc_2_1(m);
    const double c = 10.0 * rng();
    Eigen::MatrixXd shifted = m.array() + c;
    CHECK(icc_2_1(shifted) == doctest::Approx(base).epsilon(1e-9));
    Eigen::MatrixXd biased = m;
    const int col = trial % 3;
    // Push the chosen column away from the others.
    const double dir = m.col(col).mean() >= m.mean() ? 1.0 : -1.0;
    biased.col(col).array() += dir * (0.5 + std::abs(c));
    CHECK(icc_2_1(biased) < base);
  }
}

TEST_CASE("ICC drops rows with missing cells") {
  Eigen::MatrixXd m(4, 2);
  m << 1, 1.1, 2, 2.2, std::nan(""), 3, 4, 3.9;
  Eigen::MatrixXd complete(3, 2);
  complete << 1, 1.1, 2, 2.2, 4, 3.9;
  CHECK(icc_2_1(m) == doctest::Approx(icc_2_1(complete)).epsilon(1e-12));
}

TEST_CASE("ICC needs two subjects and two raters") {
  CHECK_THROWS_AS(icc_2_1(Eigen::MatrixXd::Ones(1, 2)), ValidationError);
  CHECK_THROWS_AS(icc_2_1(Eigen::MatrixXd::Ones(3, 1)), ValidationError);
}

TEST_CASE("Bland-Altman") {
  const auto zero = bland_altman(pairs_from_diffs({0.0, 0.0, 0.0}));
  CHECK(zero.bias == 0.0);
  CHECK(zero.loa_low == 0.0);
  CHECK(zero.loa_high == 0.0);

  const auto ba = bland_altman(pairs_from_diffs({-1.0, 1.0}));
  CHECK(ba.bias == doctest::Approx(0.0));
  CHECK(ba.sd == doctest::Approx(std::sqrt(2.0)));
  CHECK(ba.loa_high == doctest::Approx(2.772).epsilon(1e-3));
  CHECK(ba.loa_low == doctest::Approx(-2.772).epsilon(1e-3));

  CHECK_THROWS_AS(bland_altman(pairs_from_diffs({1.0})), ValidationError);
}

TEST_CASE("Bland-Altman identity and MAE bound on random pairs") {
  GaussianSource rng(81);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> diffs(2 + trial % 20);
    for (auto& d : diffs) d = 0.3 * rng() + 0.1 * rng.uniform();
    const auto pairs = pairs_from_diffs(diffs);
    const auto ba = bland_altman(pairs);
    CHECK(std::abs((ba.loa_high - ba.loa_low) - 2.0 * kLoaZ * ba.sd) <= 1e-12);
    CHECK(ba.loa_low <= ba.bias);
    CHECK(ba.bias <= ba.loa_high);
    CHECK(mae(pairs) >= std::abs(ba.bias) - 1e-15);
  }
}

TEST_CASE("MAE") {
  CHECK(mae(pairs_from_diffs({0.0, 0.0})) == 0.0);
  CHECK(mae(pairs_from_diffs({1.0, -3.0})) == doctest::Approx(2.0));
  CHECK_THROWS_AS(mae({}), ValidationError);
}

TEST_CASE("TRR") {
  Eigen::MatrixXd same(5, 3);
  for (int i = 0; i < 5; ++i) same.row(i).setConstant(1.0 + i);
  CHECK(trr(same) == 1.0);
  CHECK_THROWS_AS(trr(Eigen::MatrixXd::Ones(5, 1)), ValidationError);

  // Consistent participants, then every column shuffled independently.
  GaussianSource rng(91);
  Eigen::MatrixXd m(10, 3);
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 3; ++j) m(i, j) = static_cast<double>(i) + 0.1 * rng();
  CHECK(trr(m) > 0.95);
  for (int j = 0; j < 3; ++j) {
    std::vector<double> col(m.col(j).data(), m.col(j).data() + 10);
    for (int i = 9; i > 0; --i) std::swap(col[static_cast<std::size_t>(i)], col[static_cast<std::size_t>(rng.uniform() * (i + 1))]);
    for (int i = 0; i < 10; ++i) m(i, j) = col[static_cast<std::size_t>(i)];
  }
  CHECK(trr(m) < 0.2);
}

TEST_CASE("ICC labels") {
  CHECK(classify_icc(0.96) == IccLabel::excellent);
  CHECK(classify_icc(0.5) == IccLabel::moderate);
  CHECK(classify_icc(0.25) == IccLabel::poor);
  CHECK(classify_icc(0.75) == IccLabel::good);
  CHECK(classify_icc(0.9) == IccLabel::excellent);
  double prev = -1.0;
  for (double v = -1.0; v <= 1.0; v += 0.001) {
    CHECK(static_cast<int>(classify_icc(v)) >= static_cast<int>(classify_icc(prev)));
    prev = v;
  }
}

TEST_CASE("build_report on perfect agreement") {
  PairedMeasurements pm;
  for (int i = 0; i < 6; ++i) pm.pairs.push_back({0.3 + 0.01 * i, 0.3 + 0.01 * i, "P" + std::to_string(i / 3), i % 3});
  Eigen::MatrixXd reps(2, 3);
  reps << 0.30, 0.31, 0.32, 0.33, 0.34, 0.35;
  const auto r = build_report(pm, reps);
  CHECK(r.mae == 0.0);
  CHECK(r.icc == 1.0);
  CHECK(r.icc_label == IccLabel::excellent);
  CHECK(r.n_pairs == 6);
  CHECK(std::isfinite(r.trr));
}

TEST_CASE("build_report marks TRR unavailable without repetitions") {
  PairedMeasurements pm;
  for (int i = 0; i < 4; ++i) pm.pairs.push_back({1.0 + i, 1.1 + i, "P" + std::to_string(i), 0});
  const auto r = build_report(pm, Eigen::MatrixXd::Zero(4, 1));
  CHECK(std::isnan(r.trr));
  CHECK(r.loa_low <= r.bias);
  CHECK(r.bias <= r.loa_high);
}

TEST_CASE("ratings_from_pairs") {
  const auto m = ratings_from_pairs(pairs_from_diffs({0.5, -0.5}));
  CHECK(m.rows() == 2);
  CHECK(m.cols() == 2);
  CHECK(m(0, 0) == 10.5);
  CHECK(m(0, 1) == 10.0);
}
