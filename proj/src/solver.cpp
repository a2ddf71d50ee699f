#include "mklmmwu/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "mklmmwu/error.hpp"

namespace mklmmwu {

void SolverConfig::validate() const {
  if (!(rho > 0.0) || !std::isfinite(rho)) {
    throw MklError(ErrorCode::InvalidArgument, "rho must be positive");
  }
  if (!(eps > 0.0) || !(eps < 2.0 * rho)) {
    throw MklError(ErrorCode::InvalidArgument, "eps must lie in (0, 2 rho)");
  }
  if (margin.mode == MarginMode::TwoNorm && !(margin.C > 0.0)) {
    throw MklError(ErrorCode::InvalidArgument, "C must be positive");
  }
  if (!(quash_threshold > 0.0)) {
    throw MklError(ErrorCode::InvalidArgument, "quash threshold must be positive");
  }
  if (!(min_quadform >= 0.0)) {
    throw MklError(ErrorCode::InvalidArgument, "quadratic-form floor must be nonnegative");
  }
  if (max_iters_override && *max_iters_override == 0) {
    throw MklError(ErrorCode::InvalidArgument, "iteration override must be positive");
  }
}

double epsilon_prime(double eps, double rho) { return -std::log(1.0 - eps / (2.0 * rho)); }

std::size_t iteration_budget(const SolverConfig& config, std::size_t n) {
  if (config.max_iters_override) return *config.max_iters_override;
  if (n < 2) throw MklError(ErrorCode::InvalidArgument, "need at least two points");
  const double rounds =
      8.0 * config.rho * config.rho / (config.eps * config.eps) * std::log(static_cast<double>(n));
  return static_cast<std::size_t>(std::ceil(rounds));
}

DualUpdate find_alpha(std::span<const double> g, std::span<const int> labels) {
  constexpr std::size_t none = std::numeric_limits<std::size_t>::max();
  std::size_t best_plus = none, best_minus = none;
  for (std::size_t j = 0; j < labels.size(); ++j) {
    std::size_t& best = labels[j] > 0 ? best_plus : best_minus;
    if (best == none || g[j] > g[best]) best = j;
  }
  if (best_plus == none || best_minus == none) {
    throw MklError(ErrorCode::InfeasibleDual, "both classes are required for a dual update");
  }
  return {best_plus, best_minus};
}

SolverState SolverState::zeros(std::size_t num_kernels, std::size_t num_points) {
  SolverState s;
  s.num_points = num_points;
  s.num_kernels = num_kernels;
  s.alpha_bar.assign(num_points, 0.0);
  s.v.assign(num_kernels * num_points, 0.0);
  s.q.assign(num_kernels, 0.0);
  s.p12.assign(num_kernels, 0.0);
  s.g.assign(num_points, 0.0);
  return s;
}

double apply_update(SolverState& state, const DualUpdate& update, const GramAccessor& gram,
                    ColumnScratch& scratch) {
  const std::size_t n = state.num_points;
  const std::size_t jp = update.j_plus, jm = update.j_minus;
  gram.signed_columns(jp, scratch.plus());
  gram.signed_columns(jm, scratch.minus());

  state.alpha_bar[jp] += 0.5;
  state.alpha_bar[jm] += 0.5;

  double max_width = 0.0;
  for (std::size_t i = 0; i < state.num_kernels; ++i) {
    const double* cp = scratch.plus().data() + i * n;
    const double* cm = scratch.minus().data() + i * n;
    double* vi = state.v.data() + i * n;

    const double step_form = 0.25 * (cp[jp] + cm[jm] + 2.0 * cp[jm]);
    // Cross term reads v before it is updated below.
    state.q[i] += vi[jp] + vi[jm] + step_form;
    max_width = std::max(max_width, std::sqrt(std::max(step_form, 0.0)));

    for (std::size_t k = 0; k < n; ++k) vi[k] += 0.5 * (cp[k] + cm[k]);
  }
  return max_width;
}

void exponentiate_m(SolverState& state, double eps_prime, const SolverConfig& config) {
  const std::size_t m = state.num_kernels;
  const std::size_t n = state.num_points;
  const double rate = eps_prime / (2.0 * config.rho);

  double max_s = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double s = rate * std::sqrt(std::max(state.q[i], 0.0));
    state.p12[i] = s;  // staged exponent
    max_s = std::max(max_s, s);
  }

  double diag_sum = 0.0;
  if (max_s < config.quash_threshold) {
    for (std::size_t i = 0; i < m; ++i) {
      const double s = state.p12[i];
      diag_sum += std::cosh(s);
      state.p12[i] = -std::sinh(s);
    }
    state.e_m = 1.0;
  } else {
    for (std::size_t i = 0; i < m; ++i) {
      const double p11 = std::exp(state.p12[i] - max_s);
      diag_sum += p11;
      state.p12[i] = -p11;
    }
    state.e_m = std::exp(-max_s);
  }
  state.max_s = max_s;

  const double trace = static_cast<double>(m) * static_cast<double>(n - 1) * state.e_m + 2.0 * diag_sum;
  std::fill(state.g.begin(), state.g.end(), 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    state.p12[i] /= trace;
    if (state.q[i] < config.min_quadform) continue;
    const double weight = 2.0 * state.p12[i] / std::sqrt(state.q[i]);
    const double* vi = state.v.data() + i * n;
    for (std::size_t k = 0; k < n; ++k) state.g[k] += weight * vi[k];
  }
}

ArrowExponential arrow_exponential(double a, std::span<const double> u) {
  ArrowExponential e;
  e.scale = std::exp(a);
  double norm2 = 0.0;
  for (double x : u) norm2 += x * x;
  const double norm = std::sqrt(norm2);
  e.cosh_norm = std::cosh(norm);
  e.sinh_norm = std::sinh(norm);
  e.u_hat.assign(u.begin(), u.end());
  if (norm > 0.0) {
    for (double& x : e.u_hat) x /= norm;
  }
  return e;
}

double ArrowExponential::entry(std::size_t r, std::size_t c) const {
  const std::size_t n = u_hat.size();
  if (r == n && c == n) return scale * cosh_norm;
  if (r == n || c == n) return scale * sinh_norm * u_hat[r == n ? c : r];
  const double outer = u_hat[r] * u_hat[c];
  return scale * ((cosh_norm - 1.0) * outer + (r == c ? 1.0 : 0.0));
}

std::string format_trace(const IterationRecord& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "iter=%zu j_plus=%zu j_minus=%zu max_s=%.9g g_dot_alpha=%.9g width=%.9g",
                r.t, r.update.j_plus, r.update.j_minus, r.max_s, r.g_dot_alpha, r.max_width);
  return buf;
}

TrainResult train(const GramAccessor& gram, const SolverConfig& config, const IterationObserver& observer) {
  config.validate();
  const Dataset& data = gram.data();
  if (!data.has_both_classes()) {
    throw MklError(ErrorCode::InfeasibleDual, "training data must contain both classes");
  }
  if (gram.num_kernels() == 0) throw MklError(ErrorCode::InvalidArgument, "no kernels");

  const std::size_t n = data.size();
  const std::size_t m = gram.num_kernels();
  const std::size_t rounds = iteration_budget(config, n);
  const double eps_prime = epsilon_prime(config.eps, config.rho);

  TrainResult result{SolverState::zeros(m, n), 0};
  SolverState& state = result.state;
  ColumnScratch scratch(m, n);
  const std::span<const int> labels(data.labels());

  for (std::size_t t = 1; t <= rounds; ++t) {
    IterationRecord record;
    record.t = t;
    record.update = find_alpha(state.g, labels);
    record.g_dot_alpha = 0.5 * (state.g[record.update.j_plus] + state.g[record.update.j_minus]);
    record.max_width = apply_update(state, record.update, gram, scratch);
    state.t = t;
    exponentiate_m(state, eps_prime, config);
    record.max_s = state.max_s;

    bool finite = std::isfinite(state.max_s);
    for (double x : state.q) finite = finite && std::isfinite(x);
    for (double x : state.g) finite = finite && std::isfinite(x);
    if (!finite) {
      throw MklError(ErrorCode::NumericalFailure, "non-finite state at iteration " + std::to_string(t));
    }
    if (observer) observer(record, state);
  }
  result.iterations = rounds;
  return result;
}

}  // namespace mklmmwu
