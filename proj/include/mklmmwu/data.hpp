#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace mklmmwu {

/// Dense labeled sample set. Rows are points, labels are -1 or +1.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::size_t dim, std::vector<double> points, std::vector<int> labels);

  std::size_t size() const noexcept { return labels_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  bool empty() const noexcept { return labels_.empty(); }

  std::span<const double> row(std::size_t i) const {
    return {points_.data() + i * dim_, dim_};
  }
  double at(std::size_t i, std::size_t k) const { return points_[i * dim_ + k]; }
  int label(std::size_t i) const { return labels_[i]; }

  const std::vector<double>& points() const noexcept { return points_; }
  const std::vector<int>& labels() const noexcept { return labels_; }

  std::size_t count(int label) const;
  bool has_both_classes() const { return count(+1) > 0 && count(-1) > 0; }

  /// Rows selected by `indices`, in that order.
  Dataset subset(std::span<const std::size_t> indices) const;

  /// Same points zero-padded (or checked) to `dim` columns.
  Dataset with_dim(std::size_t dim) const;

 private:
  std::size_t dim_ = 0;
  std::vector<double> points_;
  std::vector<int> labels_;
};

/// How raw file labels map onto {-1,+1}. Auto accepts {-1,+1}, {0,1} and {1,2}.
enum class LabelEncoding { Auto, PlusMinusOne, ZeroOne, OneTwo };

Dataset parse_libsvm(std::istream& in, LabelEncoding encoding = LabelEncoding::Auto);
Dataset read_libsvm_file(const std::string& path, LabelEncoding encoding = LabelEncoding::Auto);
void write_libsvm(std::ostream& out, const Dataset& data);

struct ScalingParams {
  std::vector<double> min;
  std::vector<double> max;

  std::size_t dim() const noexcept { return min.size(); }
};

ScalingParams fit_scaling(const Dataset& data);

/// Affine map of each feature onto [0,1] using `params`; constant features go
/// to 0 and out-of-range values are clamped.
Dataset apply_scaling(const Dataset& data, const ScalingParams& params);
void apply_scaling(std::span<double> point, const ScalingParams& params);

/// Random partition into (train, test). Throws OneClassSplit if the train part
/// misses a class.
std::pair<Dataset, Dataset> split(const Dataset& data, double train_fraction, std::uint64_t seed);

/// Stratified k-fold assignment: entry i is the fold of point i.
std::vector<std::size_t> stratified_folds(const Dataset& data, std::size_t folds, std::uint64_t seed);

}  // namespace mklmmwu
