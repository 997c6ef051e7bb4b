// Copyright (C) 2026 The mmcpipe Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmc/agreement.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "mmc/errors.hpp"

namespace mmc {

std::string_view to_string(IccLabel label) {
  switch (label) {
    case IccLabel::poor: return "poor";
    case IccLabel::moderate: return "moderate";
    case IccLabel::good: return "good";
    case IccLabel::excellent: return "excellent";
  }
  return "poor";
}

namespace {

Eigen::MatrixXd complete_rows(const Eigen::MatrixXd& m) {
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if (m.row(i).allFinite()) keep.push_back(i);
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(keep.size()), m.cols());
  for (std::size_t r = 0; r < keep.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = m.row(keep[r]);
  return out;
}

struct Anova {
  double n, k;
  double msr, msc, mse;
  bool rows_constant;
};

Anova two_way_anova(const Eigen::MatrixXd& raw) {
  const Eigen::MatrixXd m = complete_rows(raw);
  if (m.rows() < 2 || m.cols() < 2) {
    throw ValidationError(fmt::format("ICC needs at least 2 subjects and 2 raters, got {}x{}", m.rows(), m.cols()));
  }
  const double n = static_cast<double>(m.rows());
  const double k = static_cast<double>(m.cols());
  const Eigen::VectorXd row_means = m.rowwise().mean();
  const Eigen::RowVectorXd col_means = m.colwise().mean();
  const double grand = col_means.mean();

  const double ssr = k * (row_means.array() - grand).square().sum();
  const double ssc = n * (col_means.array() - grand).square().sum();
  double sse = 0.0;
  bool rows_constant = true;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const double e = m(i, j) - row_means(i) - col_means(j) + grand;
      sse += e * e;
      if (m(i, j) != m(i, 0)) rows_constant = false;
    }
  }
  return {n, k, ssr / (n - 1.0), ssc / (k - 1.0), sse / ((n - 1.0) * (k - 1.0)), rows_constant};
}

}  // namespace

double icc_2_1(const Eigen::MatrixXd& ratings) {
  const Anova a = two_way_anova(ratings);
  if (a.rows_constant) return 1.0;
  const double denom = a.msr + (a.k - 1.0) * a.mse + a.k * (a.msc - a.mse) / a.n;
  if (denom == 0.0) throw ValidationError("ICC undefined: zero variance between subjects");
  return (a.msr - a.mse) / denom;
}

double icc_3_1(const Eigen::MatrixXd& ratings) {
  const Anova a = two_way_anova(ratings);
  if (a.rows_constant) return 1.0;
  const double denom = a.msr + (a.k - 1.0) * a.mse;
  if (denom == 0.0) throw ValidationError("ICC undefined: zero variance between subjects");
  return (a.msr - a.mse) / denom;
}

BlandAltman bland_altman(const std::vector<MeasurementPair>& pairs) {
  if (pairs.size() < 2) throw ValidationError(fmt::format("Bland-Altman needs at least 2 pairs, got {}", pairs.size()));
  const double n = static_cast<double>(pairs.size());
  double sum = 0.0;
  for (const auto& p : pairs) sum += p.mmc - p.truth;
  const double bias = sum / n;
  double ss = 0.0;
  for (const auto& p : pairs) {
    const double e = (p.mmc - p.truth) - bias;
    ss += e * e;
  }
  const double sd = std::sqrt(ss / (n - 1.0));
  return {bias, bias - kLoaZ * sd, bias + kLoaZ * sd, sd};
}

double mae(const std::vector<MeasurementPair>& pairs) {
  if (pairs.empty()) throw ValidationError("MAE of an empty set");
  double sum = 0.0;
  for (const auto& p : pairs) sum += std::abs(p.mmc - p.truth);
  return sum / static_cast<double>(pairs.size());
}

double trr(const Eigen::MatrixXd& rep_matrix, TrrEstimator estimator) {
  if (rep_matrix.cols() < 2) throw ValidationError("TRR needs at least 2 repetitions");
  return estimator == TrrEstimator::icc_2_1 ? icc_2_1(rep_matrix) : icc_3_1(rep_matrix);
}

IccLabel classify_icc(double value) {
  if (value < 0.5) return IccLabel::poor;
  if (value < 0.75) return IccLabel::moderate;
  if (value < 0.9) return IccLabel::good;
  return IccLabel::excellent;
}

Eigen::MatrixXd ratings_from_pairs(const std::vector<MeasurementPair>& pairs) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(pairs.size()), 2);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    m(static_cast<Eigen::Index>(i), 0) = pairs[i].mmc;
    m(static_cast<Eigen::Index>(i), 1) = pairs[i].truth;
  }
  return m;
}

AgreementReport build_report(const PairedMeasurements& measurements, const Eigen::MatrixXd& mmc_rep_matrix) {
  const auto& pairs = measurements.pairs;
  for (const auto& p : pairs) {
    if (!std::isfinite(p.mmc) || !std::isfinite(p.truth)) throw ValidationError("non-finite measurement");
  }
  const BlandAltman ba = bland_altman(pairs);
  AgreementReport r;
  r.mae = mae(pairs);
  r.bias = ba.bias;
  r.loa_low = ba.loa_low;
  r.loa_high = ba.loa_high;
  r.icc = icc_2_1(ratings_from_pairs(pairs));
  r.icc_label = classify_icc(r.icc);
  r.n_pairs = pairs.size();
  r.trr = std::numeric_limits<double>::quiet_NaN();
  if (mmc_rep_matrix.cols() >= 2 && complete_rows(mmc_rep_matrix).rows() >= 2) {
    try {
      r.trr = trr(mmc_rep_matrix);
    } catch (const ValidationError&) {
    }
  }
  return r;
}

}  // namespace mmc
