#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "mklmmwu/data.hpp"
#include "mklmmwu/model.hpp"
#include "mklmmwu/solver.hpp"

namespace mklmmwu {

struct FitOptions {
  SolverConfig config;
  bool per_feature_kernels = false;
  /// Receives one line per solver iteration when set.
  std::ostream* trace = nullptr;
};

struct FitOutcome {
  MklModel model;
  Dataset scaled_train;
  std::size_t iterations = 0;
  double seconds = 0.0;
};

/// Fits scaling on `raw_train`, binds the default kernel family and trains.
FitOutcome fit(const Dataset& raw_train, const FitOptions& options);

/// Misclassification rate of `model` on unscaled points.
double evaluate_raw(const MklModel& model, const Dataset& raw);

struct GridPoint {
  double eps = 0.0;
  double C = 0.0;
  double mean_error = 0.0;
  std::size_t folds_used = 0;
};

struct CvOptions {
  std::vector<double> eps_grid{0.2};
  std::vector<double> c_grid{0.1, 1.0, 10.0, 100.0};
  MarginMode margin = MarginMode::TwoNorm;
  std::size_t folds = 5;
  bool per_feature_kernels = false;
  std::optional<std::size_t> max_iters;
  std::uint64_t seed = 1;
  /// Where skipped-fold warnings go; may be null.
  std::ostream* warnings = nullptr;
};

struct CvOutcome {
  std::vector<GridPoint> grid;
  GridPoint best;
};

/// Stratified k-fold search over (eps, C). Lowest mean error wins; ties go to
/// the smaller C, then the larger eps. Throws OneClassSplit when every fold is
/// skipped.
CvOutcome cross_validate(const Dataset& raw, const CvOptions& options);

struct MedianInterval {
  double median = 0.0;
  double low = 0.0;
  double high = 0.0;
};

double median(std::vector<double> values);

/// Median with a distribution-free (order statistic) confidence interval of
/// at least 95% coverage.
MedianInterval median_interval95(std::vector<double> values);

struct ProtocolOptions {
  CvOptions cv;
  std::size_t repeats = 30;
  double train_fraction = 0.8;
};

struct RepeatOutcome {
  GridPoint chosen;
  double test_error = 0.0;
  double majority_error = 0.0;
};

struct ProtocolOutcome {
  std::vector<RepeatOutcome> repeats;
  MedianInterval test_error;
  MedianInterval majority_error;
};

/// Repeated random train/test splits; each repeat cross-validates on its train
/// part, refits with the winner and scores the held-out part.
ProtocolOutcome repeated_protocol(const Dataset& raw, const ProtocolOptions& options);

}  // namespace mklmmwu
