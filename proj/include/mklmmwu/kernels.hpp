#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mklmmwu/data.hpp"

namespace mklmmwu {

/// exp(-|x-z|^2 / (2 sigma^2))
struct Gaussian {
  double sigma = 1.0;
  bool operator==(const Gaussian&) const = default;
};

/// (x.z + 1)^degree
struct Polynomial {
  int degree = 1;
  bool operator==(const Polynomial&) const = default;
};

using KernelKind = std::variant<Gaussian, Polynomial>;

struct KernelSpec {
  KernelKind kind;
  /// 0-based feature the kernel is restricted to; empty means all features.
  std::optional<std::size_t> feature;
  /// Trace normalizer r_i, set by bind_kernels().
  double trace_norm = 0.0;
  /// Diagonal regularizer added before normalization (1/C in 2-norm mode).
  double ridge = 0.0;

  bool operator==(const KernelSpec&) const = default;
};

double eval_kernel(const KernelSpec& spec, std::span<const double> x, std::span<const double> z);

/// 3 polynomial kernels (degree 1..3) followed by 9 Gaussians with
/// sigma = 2^0, 2^(1/2), ..., 2^4. With per_feature the block is repeated once
/// per feature index.
std::vector<KernelSpec> make_default_family(std::size_t dim, bool per_feature);

/// One-line text form: `gaussian <sigma> <feature|all>` or `poly <degree> <feature|all>`.
/// Feature indices are written 1-based.
std::string format_kernel(const KernelSpec& spec);
KernelSpec parse_kernel(const std::string& line);

enum class MarginMode { Hard, TwoNorm };

struct Margin {
  MarginMode mode = MarginMode::TwoNorm;
  double C = 10.0;

  static Margin hard() { return {MarginMode::Hard, 0.0}; }
  static Margin two_norm(double c) { return {MarginMode::TwoNorm, c}; }
  double ridge() const { return mode == MarginMode::TwoNorm ? 1.0 / C : 0.0; }
};

/// Read-only view of the signed, regularized, trace-normalized Gram matrices
///   G_i[j][k] = y_j y_k (kappa_i(x_j, x_k) + ridge_i [j == k]) / r_i
/// served one column at a time. Nothing of size n^2 is ever stored.
class GramAccessor {
 public:
  GramAccessor(std::vector<KernelSpec> bound_specs, Dataset data);

  std::size_t num_kernels() const noexcept { return specs_.size(); }
  std::size_t num_points() const noexcept { return data_.size(); }
  const std::vector<KernelSpec>& specs() const noexcept { return specs_; }
  const Dataset& data() const noexcept { return data_; }

  double entry(std::size_t kernel, std::size_t j, std::size_t k) const;

  /// Column j of G_kernel into `out` (length n).
  void signed_column(std::size_t kernel, std::size_t j, std::span<double> out) const;
  std::vector<double> signed_column(std::size_t kernel, std::size_t j) const;

  /// Column j of every G_i into `out`, kernel-major (length m*n). Kernels that
  /// share a feature restriction share one distance pass, and Gaussians whose
  /// squared bandwidths halve are chained by squaring. Agrees with
  /// signed_column to ~1e-13 relative.
  void signed_columns(std::size_t j, std::span<double> out) const;

 private:
  struct ChainLink {
    std::size_t kernel;
    double inv_two_sigma2;
    bool square_previous;
  };
  struct FeatureGroup {
    std::optional<std::size_t> feature;
    std::vector<std::size_t> polys;
    std::vector<ChainLink> gaussians;  // sigma descending
  };

  std::vector<KernelSpec> specs_;
  Dataset data_;
  std::vector<FeatureGroup> groups_;
  std::vector<double> inv_trace_;
};

/// Sets ridge and trace normalizer of every spec against `data` and returns the
/// accessor. Throws DegenerateKernel if some trace is not positive.
GramAccessor bind_kernels(std::vector<KernelSpec> specs, const Dataset& data, Margin margin);

}  // namespace mklmmwu
