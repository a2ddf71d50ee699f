#include "mklmmwu/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>

#include "mklmmwu/error.hpp"

namespace mklmmwu::oracle {

DenseMatrix DenseMatrix::identity(std::size_t k) {
  DenseMatrix m(k);
  for (std::size_t i = 0; i < k; ++i) m(i, i) = 1.0;
  return m;
}

double DenseMatrix::max_abs() const {
  double r = 0.0;
  for (double x : a_) r = std::max(r, std::abs(x));
  return r;
}

bool DenseMatrix::is_symmetric(double tol) const {
  for (std::size_t r = 0; r < k_; ++r) {
    for (std::size_t c = r + 1; c < k_; ++c) {
      if (std::abs((*this)(r, c) - (*this)(c, r)) > tol) return false;
    }
  }
  return true;
}

DenseMatrix operator*(const DenseMatrix& x, const DenseMatrix& y) {
  const std::size_t k = x.size();
  DenseMatrix z(k);
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t l = 0; l < k; ++l) {
      const double xr = x(r, l);
      if (xr == 0.0) continue;
      for (std::size_t c = 0; c < k; ++c) z(r, c) += xr * y(l, c);
    }
  }
  return z;
}

DenseMatrix dense_expm(const DenseMatrix& a) {
  const std::size_t k = a.size();
  if (!a.is_symmetric(1e-12 * std::max(1.0, a.max_abs()))) {
    throw MklError(ErrorCode::InvalidArgument, "dense_expm expects a symmetric matrix");
  }
  double norm1 = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    double col = 0.0;
    for (std::size_t r = 0; r < k; ++r) col += std::abs(a(r, c));
    norm1 = std::max(norm1, col);
  }
  int squarings = 0;
  if (norm1 > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm1 / 0.5)));

  DenseMatrix b = a;
  const double shrink = std::ldexp(1.0, -squarings);
  for (std::size_t r = 0; r < k; ++r)
    for (std::size_t c = 0; c < k; ++c) b(r, c) *= shrink;

  // ||b|| <= 1/2, so 30 terms leave a remainder far below double precision.
  DenseMatrix sum = DenseMatrix::identity(k);
  DenseMatrix term = DenseMatrix::identity(k);
  for (int p = 1; p <= 30; ++p) {
    term = term * b;
    for (std::size_t r = 0; r < k; ++r)
      for (std::size_t c = 0; c < k; ++c) term(r, c) /= p;
    double term_norm = term.max_abs();
    for (std::size_t r = 0; r < k; ++r)
      for (std::size_t c = 0; c < k; ++c) sum(r, c) += term(r, c);
    if (term_norm < 1e-20 * sum.max_abs()) break;
  }
  for (int s = 0; s < squarings; ++s) sum = sum * sum;

  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t c = r + 1; c < k; ++c) {
      const double avg = 0.5 * (sum(r, c) + sum(c, r));
      sum(r, c) = sum(c, r) = avg;
    }
  }
  return sum;
}

DenseMatrix dense_gram(const GramAccessor& gram, std::size_t kernel) {
  const std::size_t n = gram.num_points();
  DenseMatrix g(n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = 0; k < n; ++k) g(j, k) = gram.entry(kernel, j, k);
  return g;
}

namespace {

double quad_form(const DenseMatrix& h, std::span<const double> x) {
  double s = 0.0;
  for (std::size_t r = 0; r < x.size(); ++r) {
    if (x[r] == 0.0) continue;
    double row = 0.0;
    for (std::size_t c = 0; c < x.size(); ++c) row += h(r, c) * x[c];
    s += x[r] * row;
  }
  return s;
}

void project_to_simplex(std::span<double> x, double mass) {
  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0, theta = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    cumulative += sorted[i];
    const double t = (cumulative - mass) / static_cast<double>(i + 1);
    if (sorted[i] - t > 0.0) theta = t;
  }
  for (double& v : x) v = std::max(v - theta, 0.0);
}

// Feasible set: each class block is a simplex of mass 1/2.
class FeasibleSet {
 public:
  explicit FeasibleSet(std::span<const int> labels) {
    for (std::size_t j = 0; j < labels.size(); ++j) (labels[j] > 0 ? plus_ : minus_).push_back(j);
  }

  void project(std::vector<double>& x) const {
    for (const auto* block : {&plus_, &minus_}) {
      std::vector<double> part;
      for (std::size_t j : *block) part.push_back(x[j]);
      project_to_simplex(part, 0.5);
      for (std::size_t t = 0; t < block->size(); ++t) x[(*block)[t]] = part[t];
    }
  }

  std::vector<double> center(std::size_t n) const {
    std::vector<double> x(n, 0.0);
    for (std::size_t j : plus_) x[j] = 0.5 / static_cast<double>(plus_.size());
    for (std::size_t j : minus_) x[j] = 0.5 / static_cast<double>(minus_.size());
    return x;
  }

  // Frank-Wolfe gap for gradient `grad` at x: an upper bound on f(x) - f*.
  double fw_gap(std::span<const double> grad, std::span<const double> x) const {
    double dot = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) dot += grad[j] * x[j];
    double best_plus = std::numeric_limits<double>::infinity(), best_minus = best_plus;
    for (std::size_t j : plus_) best_plus = std::min(best_plus, grad[j]);
    for (std::size_t j : minus_) best_minus = std::min(best_minus, grad[j]);
    return dot - 0.5 * best_plus - 0.5 * best_minus;
  }

  const std::vector<std::size_t>& plus() const { return plus_; }
  const std::vector<std::size_t>& minus() const { return minus_; }

 private:
  std::vector<std::size_t> plus_, minus_;
};

// Solves a x = b in place by Gaussian elimination with partial pivoting.
bool solve_linear(std::vector<double>& a, std::vector<double>& b, std::size_t k) {
  for (std::size_t col = 0; col < k; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < k; ++r)
      if (std::abs(a[r * k + col]) > std::abs(a[pivot * k + col])) pivot = r;
    if (!(std::abs(a[pivot * k + col]) > 1e-14)) return false;
    if (pivot != col) {
      for (std::size_t c = 0; c < k; ++c) std::swap(a[col * k + c], a[pivot * k + c]);
      std::swap(b[col], b[pivot]);
    }
    for (std::size_t r = col + 1; r < k; ++r) {
      const double f = a[r * k + col] / a[col * k + col];
      if (f == 0.0) continue;
      for (std::size_t c = col; c < k; ++c) a[r * k + c] -= f * a[col * k + c];
      b[r] -= f * b[col];
    }
  }
  for (std::size_t r = k; r-- > 0;) {
    double s = b[r];
    for (std::size_t c = r + 1; c < k; ++c) s -= a[r * k + c] * b[c];
    b[r] = s / a[r * k + r];
  }
  return true;
}

// Exact minimizer on a working support: the KKT system
//   2 H_SS x_S = l+ e+ + l- e-,  sum over each class block of x_S = 1/2.
// Starting from the support of x, negative entries are dropped and points
// whose gradient undercuts their block multiplier are added until the KKT
// conditions hold. Returns false if that does not happen.
bool polish_on_support(const DenseMatrix& h, const FeasibleSet& set, std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<int> side(n, 0);
  for (std::size_t j : set.minus()) side[j] = 1;
  std::vector<bool> in(n, false);
  double largest = 0.0;
  for (double v : x) largest = std::max(largest, v);
  for (std::size_t j = 0; j < n; ++j) in[j] = x[j] > 1e-9 * largest;

  for (std::size_t round = 0; round < 4 * n; ++round) {
    std::vector<std::size_t> support;
    for (std::size_t j = 0; j < n; ++j)
      if (in[j]) support.push_back(j);
    const std::size_t s = support.size(), k = s + 2;
    std::vector<double> a(k * k, 0.0), b(k, 0.0);
    for (std::size_t r = 0; r < s; ++r) {
      for (std::size_t c = 0; c < s; ++c) a[r * k + c] = 2.0 * h(support[r], support[c]);
      a[r * k + s + side[support[r]]] = -1.0;
      a[(s + side[support[r]]) * k + r] = 1.0;
    }
    b[s] = b[s + 1] = 0.5;
    if (!solve_linear(a, b, k)) return false;

    std::size_t worst = n;
    for (std::size_t r = 0; r < s; ++r) {
      if (b[r] < 0.0 && (worst == n || b[r] < b[worst])) worst = r;
    }
    if (worst != n) {
      in[support[worst]] = false;
      continue;
    }

    std::vector<double> trial(n, 0.0);
    for (std::size_t r = 0; r < s; ++r) trial[support[r]] = b[r];
    const double mult[2] = {b[s], b[s + 1]};
    std::size_t entering = n;
    double most = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (in[j]) continue;
      double grad = 0.0;
      for (std::size_t c = 0; c < n; ++c) grad += 2.0 * h(j, c) * trial[c];
      const double shortfall = mult[side[j]] - grad;
      if (shortfall > 1e-12 * std::max(std::abs(mult[side[j]]), 1e-300) && shortfall > most) {
        most = shortfall;
        entering = j;
      }
    }
    if (entering == n) {
      x = std::move(trial);
      return true;
    }
    in[entering] = true;
  }
  return false;
}

struct QpResult {
  std::vector<double> alpha;
  double value = 0.0;
  double gap = 0.0;
};

// min x'Hx over the feasible set: active-set solve from the warm start, with
// accelerated projected gradient (and periodic re-polishing) as the fallback.
QpResult solve_qp(const DenseMatrix& h, const FeasibleSet& set, std::vector<double> x) {
  const std::size_t n = h.size();
  double lipschitz = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    double row = 0.0;
    for (std::size_t c = 0; c < n; ++c) row += std::abs(h(r, c));
    lipschitz = std::max(lipschitz, 2.0 * row);
  }
  if (!(lipschitz > 0.0)) return {x, 0.0, 0.0};
  const double step = 1.0 / lipschitz;

  auto gradient = [&](std::span<const double> at, std::vector<double>& grad) {
    for (std::size_t r = 0; r < n; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < n; ++c) s += h(r, c) * at[c];
      grad[r] = 2.0 * s;
    }
  };

  std::vector<double> y = x, z(n), grad(n);
  {
    std::vector<double> exact = x;
    if (polish_on_support(h, set, exact)) {
      gradient(exact, grad);
      const double exact_gap = std::max(set.fw_gap(grad, exact), 0.0);
      const double fe = quad_form(h, exact);
      if (exact_gap <= 1e-13 * fe + 1e-300) return {exact, fe, exact_gap};
    }
  }
  double fx = quad_form(h, x);
  double momentum = 1.0;
  double gap = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 100000; ++it) {
    gradient(y, grad);
    for (std::size_t j = 0; j < n; ++j) z[j] = y[j] - step * grad[j];
    set.project(z);
    const double fz = quad_form(h, z);
    if (fz > fx) {
      y = x;
      momentum = 1.0;
      continue;
    }
    const double next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
    for (std::size_t j = 0; j < n; ++j) y[j] = z[j] + ((momentum - 1.0) / next) * (z[j] - x[j]);
    momentum = next;
    x = z;
    fx = fz;
    if (it % 8 == 0) {
      gradient(x, grad);
      gap = std::max(set.fw_gap(grad, x), 0.0);
      if (gap <= 1e-13 * fx + 1e-300) break;
    }
    if (it % 256 == 255) {
      // Once the support is identified the KKT solve finishes the job exactly.
      std::vector<double> exact = x;
      if (polish_on_support(h, set, exact)) {
        std::vector<double> g2(n);
        gradient(exact, g2);
        const double exact_gap = std::max(set.fw_gap(g2, exact), 0.0);
        const double fe = quad_form(h, exact);
        if (exact_gap <= 1e-13 * fe + 1e-300) return {exact, fe, exact_gap};
      }
    }
  }
  gradient(x, grad);
  gap = std::max(set.fw_gap(grad, x), 0.0);

  std::vector<double> exact = x;
  if (polish_on_support(h, set, exact)) {
    gradient(exact, grad);
    const double exact_gap = std::max(set.fw_gap(grad, exact), 0.0);
    const double fe = quad_form(h, exact);
    if (fe - exact_gap > fx - gap) return {exact, fe, exact_gap};
  }
  return {x, fx, gap};
}

}  // namespace

QcqpSolution brute_qcqp(std::span<const DenseMatrix> grams, std::span<const int> labels) {
  const std::size_t m = grams.size();
  const std::size_t n = labels.size();
  if (m == 0 || m > 3) throw MklError(ErrorCode::InvalidArgument, "brute_qcqp handles 1 to 3 kernels");
  if (std::count(labels.begin(), labels.end(), 1) == 0 || std::count(labels.begin(), labels.end(), -1) == 0) {
    throw MklError(ErrorCode::InfeasibleDual, "brute_qcqp needs both classes");
  }
  for (const auto& g : grams) {
    if (g.size() != n) throw MklError(ErrorCode::DimensionMismatch, "Gram size does not match labels");
  }

  const FeasibleSet set(labels);
  std::vector<double> warm = set.center(n);

  QcqpSolution best;
  best.omega = std::numeric_limits<double>::infinity();
  best.lower_bound = -std::numeric_limits<double>::infinity();

  // Evaluates the dual function at kernel weights mu, returns per-kernel forms
  // of the inner minimizer, and folds it into both bounds.
  auto evaluate = [&](const std::vector<double>& mu) {
    DenseMatrix h(n);
    for (std::size_t i = 0; i < m; ++i) {
      if (mu[i] == 0.0) continue;
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) h(r, c) += mu[i] * grams[i](r, c);
    }
    QpResult qp = solve_qp(h, set, warm);
    warm = qp.alpha;
    std::vector<double> forms(m);
    double worst = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      forms[i] = quad_form(grams[i], qp.alpha);
      worst = std::max(worst, forms[i]);
    }
    if (worst < best.omega) {
      best.omega = worst;
      best.alpha = qp.alpha;
    }
    if (qp.value - qp.gap > best.lower_bound) {
      best.lower_bound = qp.value - qp.gap;
      best.multipliers = mu;
    }
    return forms;
  };

  // Bisection on the sign of a monotone (concave-dual) derivative over [0,1].
  auto bisect = [](const std::function<double(double)>& slope) {
    if (slope(0.0) <= 0.0) return 0.0;
    if (slope(1.0) >= 0.0) return 1.0;
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      (slope(mid) > 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  };

  if (m == 1) {
    evaluate({1.0});
  } else if (m == 2) {
    const double lambda = bisect([&](double l) {
      auto f = evaluate({l, 1.0 - l});
      return f[0] - f[1];
    });
    evaluate({lambda, 1.0 - lambda});
  } else {
    // mu = (a, (1-a) b, (1-a)(1-b)); the inner max over b keeps concavity in a.
    auto inner = [&](double a) {
      return bisect([&](double b) {
        auto f = evaluate({a, (1.0 - a) * b, (1.0 - a) * (1.0 - b)});
        return f[1] - f[2];
      });
    };
    const double a = bisect([&](double a_) {
      const double b = inner(a_);
      auto f = evaluate({a_, (1.0 - a_) * b, (1.0 - a_) * (1.0 - b)});
      return f[0] - b * f[1] - (1.0 - b) * f[2];
    });
    const double b = inner(a);
    evaluate({a, (1.0 - a) * b, (1.0 - a) * (1.0 - b)});
  }

  if (!(best.omega - best.lower_bound <= 1e-7 * best.omega + 1e-15)) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "brute_qcqp could not certify optimality (omega %.9g, bound %.9g)",
                  best.omega, best.lower_bound);
    throw MklError(ErrorCode::NumericalFailure, buf);
  }
  for (std::size_t i = 0; i < m; ++i) {
    if (quad_form(grams[i], best.alpha) >= best.omega * (1.0 - 1e-6)) best.active.push_back(i);
  }
  return best;
}

DenseState recompute_state(std::span<const double> alpha_bar, const GramAccessor& gram) {
  const std::size_t n = gram.num_points(), m = gram.num_kernels();
  DenseState s{std::vector<double>(m * n, 0.0), std::vector<double>(m, 0.0)};
  for (std::size_t i = 0; i < m; ++i) {
    const DenseMatrix g = dense_gram(gram, i);
    for (std::size_t j = 0; j < n; ++j) {
      double row = 0.0;
      for (std::size_t k = 0; k < n; ++k) row += g(j, k) * alpha_bar[k];
      s.v[i * n + j] = row;
      s.q[i] += alpha_bar[j] * row;
    }
  }
  return s;
}

double direct_bias(const MklModel& model) {
  auto combined = [&](std::span<const double> x, std::span<const double> z) {
    double k = 0.0;
    for (std::size_t i = 0; i < model.specs.size(); ++i) {
      if (model.mu[i] != 0.0) k += model.mu[i] * eval_kernel(model.specs[i], x, z) / model.specs[i].trace_norm;
    }
    return k;
  };
  double norm_plus = 0.0, norm_minus = 0.0;
  for (const auto& a : model.support) {
    for (const auto& b : model.support) {
      if (a.label != b.label) continue;
      const double term = 4.0 * a.coef * b.coef * combined(a.point, b.point);
      (a.label > 0 ? norm_plus : norm_minus) += term;
    }
  }
  return 0.5 * (norm_minus - norm_plus);
}

}  // namespace mklmmwu::oracle
