#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mklmmwu/data.hpp"
#include "mklmmwu/kernels.hpp"
#include "mklmmwu/solver.hpp"

namespace mklmmwu {

struct SupportVector {
  std::vector<double> point;  // scaled
  int label = 1;
  double coef = 0.0;  // entry of alpha_bar / T
};

/// Deployable classifier
///   f(x) = sum_j 2 c_j y_j sum_i mu_i kappa_i(x_j, x) / r_i + b.
struct MklModel {
  std::vector<KernelSpec> specs;
  std::vector<double> mu;
  std::vector<SupportVector> support;
  double bias = 0.0;
  ScalingParams scaling;
  SolverConfig config;

  std::size_t dim() const noexcept { return scaling.dim(); }
};

/// Normalized quadratic forms (alpha_bar/T)' G_i (alpha_bar/T).
std::vector<double> normalized_quadforms(const SolverState& state, std::size_t iterations);

/// Kernel weights |2 p12_i| / sqrt(q_i), rescaled so that sum_i mu_i q_i = 1
/// under the normalized dual. Throws DegenerateModel if every weight vanishes.
std::vector<double> extract_weights(const SolverState& state, std::size_t iterations,
                                    double min_quadform = 1e-12);

/// Offset of the perpendicular bisector between the two class hull points,
/// read off the solver caches in O(m n).
double compute_bias(const SolverState& state, std::size_t iterations, const GramAccessor& gram,
                    std::span<const double> mu);

MklModel build_model(const TrainResult& result, const GramAccessor& gram, const SolverConfig& config,
                     ScalingParams scaling);

/// Expects `x` already scaled with model.scaling.
double decision_value(const MklModel& model, std::span<const double> x);
/// sign(f(x)), with sign(0) = +1.
int predict(const MklModel& model, std::span<const double> x);

/// Scales a raw point with the model's parameters, then predicts.
int predict_raw(const MklModel& model, std::span<const double> raw);

/// Fraction of misclassified points; `data` must already be scaled.
double error_rate(const MklModel& model, const Dataset& data);

void save_model(const MklModel& model, std::ostream& out);
MklModel load_model(std::istream& in);
void save_model_file(const MklModel& model, const std::string& path);
MklModel load_model_file(const std::string& path);

}  // namespace mklmmwu
