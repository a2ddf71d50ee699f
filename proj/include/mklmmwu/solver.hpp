#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mklmmwu/kernels.hpp"

namespace mklmmwu {

struct SolverConfig {
  /// Desired approximation error, in (0, 2 rho).
  double eps = 0.2;
  /// Width bound. 3/2 holds for every trace-normalized kernel family.
  double rho = 1.5;
  Margin margin;
  /// Above this largest exponent cosh/sinh are replaced by shifted exponentials.
  double quash_threshold = 20.0;
  std::optional<std::size_t> max_iters_override;
  /// Quadratic forms below this contribute nothing to the violation vector.
  double min_quadform = 1e-12;

  /// Throws InvalidArgument when a field is out of range.
  void validate() const;
};

/// -ln(1 - eps / (2 rho))
double epsilon_prime(double eps, double rho);

/// ceil((8 rho^2 / eps^2) ln n), unless overridden.
std::size_t iteration_budget(const SolverConfig& config, std::size_t n);

/// One sparse dual step: half a unit of mass on one point of each class.
struct DualUpdate {
  std::size_t j_plus = 0;
  std::size_t j_minus = 0;

  bool operator==(const DualUpdate&) const = default;
};

/// Most violating positive and negative point under `g`; ties go to the lowest
/// index. Throws InfeasibleDual when a class is absent.
DualUpdate find_alpha(std::span<const double> g, std::span<const int> labels);

struct SolverState {
  std::size_t num_points = 0;
  std::size_t num_kernels = 0;

  std::vector<double> alpha_bar;  // sum of all dual updates
  std::vector<double> v;          // kernel-major m x n, v_i = G_i alpha_bar
  std::vector<double> q;          // q_i = alpha_bar' G_i alpha_bar
  std::vector<double> p12;        // normalized off-diagonal primal coefficients, <= 0
  std::vector<double> g;          // aggregate violation direction
  std::size_t t = 0;
  double e_m = 1.0;               // identity-block weight after quashing
  double max_s = 0.0;

  static SolverState zeros(std::size_t num_kernels, std::size_t num_points);

  std::span<const double> v_row(std::size_t kernel) const {
    return {v.data() + kernel * num_points, num_points};
  }
  std::span<double> v_row(std::size_t kernel) {
    return {v.data() + kernel * num_points, num_points};
  }
};

/// Scratch columns for apply_update, sized m x n each.
class ColumnScratch {
 public:
  ColumnScratch(std::size_t num_kernels, std::size_t num_points)
      : plus_(num_kernels * num_points), minus_(num_kernels * num_points) {}

  std::span<double> plus() { return plus_; }
  std::span<double> minus() { return minus_; }

 private:
  std::vector<double> plus_;
  std::vector<double> minus_;
};

/// Adds `update` to alpha_bar and refreshes v and q incrementally. Returns the
/// largest per-kernel width sqrt(alpha_t' G_i alpha_t) of this step.
double apply_update(SolverState& state, const DualUpdate& update, const GramAccessor& gram,
                    ColumnScratch& scratch);

/// Closed-form exponentiation of the accumulated event matrices: fills p12,
/// g, e_m and max_s from the current q and v.
void exponentiate_m(SolverState& state, double eps_prime, const SolverConfig& config);

/// exp([[a I_n, u], [u', a]]) in closed form: eigen-decomposition into the two
/// directions (u, +-|u|) and the orthogonal complement of u.
struct ArrowExponential {
  double scale = 1.0;  // e^a
  double cosh_norm = 1.0;
  double sinh_norm = 0.0;
  std::vector<double> u_hat;  // empty direction when u = 0

  std::size_t dim() const noexcept { return u_hat.size() + 1; }
  double entry(std::size_t r, std::size_t c) const;
};

ArrowExponential arrow_exponential(double a, std::span<const double> u);

struct IterationRecord {
  std::size_t t = 0;
  DualUpdate update;
  double max_s = 0.0;
  /// g' alpha_t evaluated with the g that chose the update.
  double g_dot_alpha = 0.0;
  double max_width = 0.0;
};

std::string format_trace(const IterationRecord& record);

using IterationObserver = std::function<void(const IterationRecord&, const SolverState&)>;

struct TrainResult {
  SolverState state;
  std::size_t iterations = 0;
};

/// Runs the full primal-dual loop for iteration_budget(config, n) rounds.
TrainResult train(const GramAccessor& gram, const SolverConfig& config,
                  const IterationObserver& observer = {});

}  // namespace mklmmwu
