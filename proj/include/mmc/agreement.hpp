// Copyright (C) 2026 The mmcpipe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace mmc {

struct MeasurementPair {
  double mmc{0.0};
  double truth{0.0};
  std::string participant_id;
  int rep_index{0};
};

struct PairedMeasurements {
  std::vector<MeasurementPair> pairs;
  std::string metric_unit;
};

enum class IccLabel { poor, moderate, good, excellent };

std::string_view to_string(IccLabel label);

struct BlandAltman {
  double bias{0.0};
  double loa_low{0.0};
  double loa_high{0.0};
  double sd{0.0};
};

struct AgreementReport {
  double mae{0.0};
  double bias{0.0};
  double loa_low{0.0};
  double loa_high{0.0};
  double trr{0.0};  // NaN when repetitions were not available
  double icc{0.0};
  IccLabel icc_label{IccLabel::poor};
  std::size_t n_pairs{0};
};

inline constexpr double kLoaZ = 1.96;

// Two-way random effects, absolute agreement, single measurement.
// Rows are subjects, columns raters; rows containing NaN are dropped.
double icc_2_1(const Eigen::MatrixXd& ratings);

// Two-way mixed effects, consistency, single measurement.
double icc_3_1(const Eigen::MatrixXd& ratings);

BlandAltman bland_altman(const std::vector<MeasurementPair>& pairs);
double mae(const std::vector<MeasurementPair>& pairs);

enum class TrrEstimator { icc_2_1, icc_3_1 };

// Participants x repetitions of one device's values.
double trr(const Eigen::MatrixXd& rep_matrix, TrrEstimator estimator = TrrEstimator::icc_2_1);

IccLabel classify_icc(double value);

// Every pair is one subject; the two devices are the raters.
Eigen::MatrixXd ratings_from_pairs(const std::vector<MeasurementPair>& pairs);

AgreementReport build_report(const PairedMeasurements& measurements,
                             const Eigen::MatrixXd& mmc_rep_matrix);

}  // namespace mmc
