#include "mklmmwu/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>

#include "mklmmwu/error.hpp"

namespace mklmmwu {

FitOutcome fit(const Dataset& raw_train, const FitOptions& options) {
  options.config.validate();
  ScalingParams scaling = fit_scaling(raw_train);
  Dataset scaled = apply_scaling(raw_train, scaling);
  const auto start = std::chrono::steady_clock::now();
  GramAccessor gram = bind_kernels(make_default_family(scaled.dim(), options.per_feature_kernels), scaled,
                           options.config.margin);
  IterationObserver observer;
  if (options.trace) {
    observer = [out = options.trace](const IterationRecord& r, const SolverState&) {
      *out << format_trace(r) << '\n';
    };
  }
  TrainResult result = train(gram, options.config, observer);
  MklModel model = build_model(result, gram, options.config, std::move(scaling));
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {std::move(model), std::move(scaled), result.iterations, seconds};
}

double evaluate_raw(const MklModel& model, const Dataset& raw) {
  if (raw.empty()) throw MklError(ErrorCode::EmptyDataset, "no points to evaluate");
  return error_rate(model, apply_scaling(raw.with_dim(model.dim()), model.scaling));
}

CvOutcome cross_validate(const Dataset& raw, const CvOptions& options) {
  if (options.eps_grid.empty() || options.c_grid.empty()) {
    throw MklError(ErrorCode::InvalidArgument, "empty parameter grid");
  }
  const std::vector<std::size_t> fold_of = stratified_folds(raw, options.folds, options.seed);
  std::vector<double> c_values = options.c_grid;
  if (options.margin == MarginMode::Hard) c_values = {0.0};

  CvOutcome out;
  bool have_best = false;
  for (double eps : options.eps_grid) {
    for (double c : c_values) {
      GridPoint point{eps, c, 0.0, 0};
      double total = 0.0;
      for (std::size_t f = 0; f < options.folds; ++f) {
        std::vector<std::size_t> train_idx, valid_idx;
        for (std::size_t j = 0; j < raw.size(); ++j) (fold_of[j] == f ? valid_idx : train_idx).push_back(j);
        const Dataset train = raw.subset(train_idx);
        if (valid_idx.empty() || !train.has_both_classes()) {
          if (options.warnings) *options.warnings << "warning: skipping fold " << f << " (empty class)\n";
          continue;
        }
        FitOptions fo;
        fo.config.eps = eps;
        fo.config.margin = {options.margin, c};
        fo.config.max_iters_override = options.max_iters;
        fo.per_feature_kernels = options.per_feature_kernels;
        const FitOutcome fitted = fit(train, fo);
        total += evaluate_raw(fitted.model, raw.subset(valid_idx));
        ++point.folds_used;
      }
      if (point.folds_used == 0) {
        throw MklError(ErrorCode::OneClassSplit, "every cross-validation fold was skipped");
      }
      point.mean_error = total / static_cast<double>(point.folds_used);
      out.grid.push_back(point);

      const GridPoint& b = out.best;
      const bool better = !have_best || point.mean_error < b.mean_error ||
                          (point.mean_error == b.mean_error &&
                           (point.C < b.C || (point.C == b.C && point.eps > b.eps)));
      if (better) {
        out.best = point;
        have_best = true;
      }
    }
  }
  return out;
}

double median(std::vector<double> values) {
  if (values.empty()) return std::nan("");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

MedianInterval median_interval95(std::vector<double> values) {
  MedianInterval out;
  out.median = median(values);
  if (values.empty()) {
    out.low = out.high = out.median;
    return out;
  }
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  // Largest rank k with P(Binomial(n, 1/2) <= k - 1) <= 0.025; the interval is
  // [x_(k), x_(n-k+1)] in 1-based order statistics.
  std::size_t k = 0;
  double cdf = 0.0;
  double pmf = std::pow(0.5, static_cast<double>(n));
  for (std::size_t r = 0; r < n; ++r) {
    cdf += pmf;
    if (cdf > 0.025) break;
    k = r + 1;
    pmf *= static_cast<double>(n - r) / static_cast<double>(r + 1);
  }
  if (k == 0) {
    out.low = values.front();
    out.high = values.back();
  } else {
    out.low = values[k - 1];
    out.high = values[n - k];
  }
  return out;
}

ProtocolOutcome repeated_protocol(const Dataset& raw, const ProtocolOptions& options) {
  ProtocolOutcome out;
  std::vector<double> errors, majority;
  for (std::size_t r = 0; r < options.repeats; ++r) {
    const std::uint64_t seed = options.cv.seed + 7919 * r;
    auto [train, test] = split(raw, options.train_fraction, seed);
    if (test.empty()) throw MklError(ErrorCode::EmptyDataset, "test split is empty");

    CvOptions cv = options.cv;
    cv.seed = seed;
    const CvOutcome chosen = cross_validate(train, cv);

    FitOptions fo;
    fo.config.eps = chosen.best.eps;
    fo.config.margin = {options.cv.margin, chosen.best.C};
    fo.config.max_iters_override = options.cv.max_iters;
    fo.per_feature_kernels = options.cv.per_feature_kernels;
    const FitOutcome fitted = fit(train, fo);

    RepeatOutcome rep;
    rep.chosen = chosen.best;
    rep.test_error = evaluate_raw(fitted.model, test);
    const int majority_label = train.count(+1) >= train.count(-1) ? 1 : -1;
    rep.majority_error =
        static_cast<double>(test.size() - test.count(majority_label)) / static_cast<double>(test.size());
    errors.push_back(rep.test_error);
    majority.push_back(rep.majority_error);
    out.repeats.push_back(rep);
  }
  out.test_error = median_interval95(errors);
  out.majority_error = median_interval95(majority);
  return out;
}

}  // namespace mklmmwu
