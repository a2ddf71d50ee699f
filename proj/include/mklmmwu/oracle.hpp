#pragma once

// Brute-force references for tests: nothing here is used by the solver.

#include <cstddef>
#include <span>
#include <vector>

#include "mklmmwu/kernels.hpp"
#include "mklmmwu/model.hpp"

namespace mklmmwu::oracle {

class DenseMatrix {
 public:
  DenseMatrix() = default;
  explicit DenseMatrix(std::size_t k) : k_(k), a_(k * k, 0.0) {}

  static DenseMatrix identity(std::size_t k);

  std::size_t size() const noexcept { return k_; }
  double& operator()(std::size_t r, std::size_t c) { return a_[r * k_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return a_[r * k_ + c]; }

  double max_abs() const;
  bool is_symmetric(double tol) const;

  friend DenseMatrix operator*(const DenseMatrix& x, const DenseMatrix& y);

 private:
  std::size_t k_ = 0;
  std::vector<double> a_;
};

/// Matrix exponential of a symmetric matrix by scaling and squaring of the
/// truncated Taylor series. Throws InvalidArgument for non-symmetric input.
DenseMatrix dense_expm(const DenseMatrix& a);

/// Full n x n assembly of G_kernel, entry by entry.
DenseMatrix dense_gram(const GramAccessor& gram, std::size_t kernel);

struct QcqpSolution {
  std::vector<double> alpha;        // minimizer of max_i alpha' G_i alpha
  double omega = 0.0;               // max_i alpha' G_i alpha at `alpha`
  double lower_bound = 0.0;         // certified lower bound on the optimum
  std::vector<double> multipliers;  // kernel weights of the saddle point, sum 1
  std::vector<std::size_t> active;  // kernels attaining omega
};

/// min over {alpha >= 0, sum alpha = 1, alpha'y = 0} of max_i alpha' G_i alpha
/// for m <= 3 kernels. Solved through its concave dual over kernel weights
/// (bisection on the Danskin gradient) with an active-set inner QP that falls
/// back to projected gradient, and certified by
/// (omega - lower_bound) <= 1e-7 omega. Throws
/// NumericalFailure when the certificate does not close.
QcqpSolution brute_qcqp(std::span<const DenseMatrix> grams, std::span<const int> labels);

struct DenseState {
  std::vector<double> v;  // kernel-major m x n
  std::vector<double> q;
};

DenseState recompute_state(std::span<const double> alpha_bar, const GramAccessor& gram);

/// Bisector offset evaluated from raw kernel sums over the support set.
double direct_bias(const MklModel& model);

}  // namespace mklmmwu::oracle
