#include "mklmmwu/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <string>
#include <string_view>

#include "mklmmwu/error.hpp"

namespace mklmmwu {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::NonBinaryLabels: return "NonBinaryLabels";
    case ErrorCode::OneClassSplit: return "OneClassSplit";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DegenerateKernel: return "DegenerateKernel";
    case ErrorCode::InfeasibleDual: return "InfeasibleDual";
    case ErrorCode::NumericalFailure: return "NumericalFailure";
    case ErrorCode::DegenerateModel: return "DegenerateModel";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::MalformedModel: return "MalformedModel";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

Dataset::Dataset(std::size_t dim, std::vector<double> points, std::vector<int> labels)
    : dim_(dim), points_(std::move(points)), labels_(std::move(labels)) {
  if (points_.size() != dim_ * labels_.size()) {
    throw MklError(ErrorCode::DimensionMismatch, "point storage does not match n*d");
  }
  for (int y : labels_) {
    if (y != 1 && y != -1) throw MklError(ErrorCode::NonBinaryLabels, "label must be -1 or +1");
  }
  for (double x : points_) {
    if (!std::isfinite(x)) throw MklError(ErrorCode::MalformedLine, "non-finite feature value");
  }
}

std::size_t Dataset::count(int label) const {
  return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), label));
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  std::vector<double> pts;
  std::vector<int> ys;
  pts.reserve(indices.size() * dim_);
  ys.reserve(indices.size());
  for (std::size_t i : indices) {
    auto r = row(i);
    pts.insert(pts.end(), r.begin(), r.end());
    ys.push_back(labels_[i]);
  }
  return Dataset(dim_, std::move(pts), std::move(ys));
}

Dataset Dataset::with_dim(std::size_t dim) const {
  if (dim == dim_) return *this;
  if (dim < dim_) {
    throw MklError(ErrorCode::DimensionMismatch,
                   "data has " + std::to_string(dim_) + " features, expected at most " +
                       std::to_string(dim));
  }
  std::vector<double> pts(size() * dim, 0.0);
  for (std::size_t i = 0; i < size(); ++i) {
    std::copy(row(i).begin(), row(i).end(), pts.begin() + static_cast<std::ptrdiff_t>(i * dim));
  }
  return Dataset(dim, std::move(pts), labels_);
}

namespace {

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n\v\f";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

bool parse_double(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool parse_index(std::string_view s, std::size_t& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

struct SparseRow {
  double raw_label;
  std::vector<std::pair<std::size_t, double>> entries;
};

[[noreturn]] void malformed(std::size_t line_no, const std::string& why) {
  throw MklError(ErrorCode::MalformedLine, "line " + std::to_string(line_no) + ": " + why);
}

int map_label(double raw, LabelEncoding enc) {
  switch (enc) {
    case LabelEncoding::PlusMinusOne: return raw > 0 ? 1 : -1;
    case LabelEncoding::ZeroOne: return raw == 1.0 ? 1 : -1;
    case LabelEncoding::OneTwo: return raw == 2.0 ? 1 : -1;
    case LabelEncoding::Auto: break;
  }
  return 0;
}

LabelEncoding resolve_encoding(const std::set<double>& seen, LabelEncoding requested) {
  auto subset_of = [&](std::initializer_list<double> allowed) {
    return std::all_of(seen.begin(), seen.end(), [&](double v) {
      return std::find(allowed.begin(), allowed.end(), v) != allowed.end();
    });
  };
  LabelEncoding enc = requested;
  if (enc == LabelEncoding::Auto) {
    if (subset_of({-1.0, 1.0})) enc = LabelEncoding::PlusMinusOne;
    else if (subset_of({0.0, 1.0})) enc = LabelEncoding::ZeroOne;
    else if (subset_of({1.0, 2.0})) enc = LabelEncoding::OneTwo;
  }
  bool ok = (enc == LabelEncoding::PlusMinusOne && subset_of({-1.0, 1.0})) ||
            (enc == LabelEncoding::ZeroOne && subset_of({0.0, 1.0})) ||
            (enc == LabelEncoding::OneTwo && subset_of({1.0, 2.0}));
  if (!ok) {
    std::string labels;
    for (double v : seen) labels += " " + std::to_string(v);
    throw MklError(ErrorCode::NonBinaryLabels, "unsupported label set:" + labels);
  }
  return enc;
}

}  // namespace

Dataset parse_libsvm(std::istream& in, LabelEncoding encoding) {
  std::vector<SparseRow> rows;
  std::set<double> seen;
  std::size_t dim = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view(line);
    if (auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = trim(view);
    if (view.empty()) continue;

    SparseRow row{};
    std::size_t pos = 0;
    bool first = true;
    std::size_t last_index = 0;
    while (pos < view.size()) {
      auto end = view.find_first_of(" \t", pos);
      if (end == std::string_view::npos) end = view.size();
      std::string_view tok = view.substr(pos, end - pos);
      pos = view.find_first_not_of(" \t", end);
      if (pos == std::string_view::npos) pos = view.size();
      if (tok.empty()) continue;

      if (first) {
        if (!parse_double(tok, row.raw_label) || !std::isfinite(row.raw_label)) {
          malformed(line_no, "bad label '" + std::string(tok) + "'");
        }
        first = false;
        continue;
      }
      auto colon = tok.find(':');
      if (colon == std::string_view::npos) malformed(line_no, "expected index:value");
      std::size_t index = 0;
      double value = 0;
      if (!parse_index(tok.substr(0, colon), index) || index == 0) {
        malformed(line_no, "bad feature index '" + std::string(tok.substr(0, colon)) + "'");
      }
      if (!parse_double(tok.substr(colon + 1), value) || !std::isfinite(value)) {
        malformed(line_no, "bad feature value '" + std::string(tok.substr(colon + 1)) + "'");
      }
      if (index <= last_index) malformed(line_no, "feature indices must be strictly increasing");
      last_index = index;
      row.entries.emplace_back(index, value);
    }
    dim = std::max(dim, last_index);
    seen.insert(row.raw_label);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw MklError(ErrorCode::EmptyDataset, "no data lines");

  const LabelEncoding enc = resolve_encoding(seen, encoding);
  std::vector<double> pts(rows.size() * dim, 0.0);
  std::vector<int> ys;
  ys.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (auto [index, value] : rows[i].entries) pts[i * dim + index - 1] = value;
    ys.push_back(map_label(rows[i].raw_label, enc));
  }
  return Dataset(dim, std::move(pts), std::move(ys));
}

Dataset read_libsvm_file(const std::string& path, LabelEncoding encoding) {
  std::ifstream in(path);
  if (!in) throw MklError(ErrorCode::Io, "cannot open " + path);
  return parse_libsvm(in, encoding);
}

void write_libsvm(std::ostream& out, const Dataset& data) {
  char buf[64];
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << (data.label(i) > 0 ? "+1" : "-1");
    for (std::size_t k = 0; k < data.dim(); ++k) {
      const double v = data.at(i, k);
      // The first row always carries the last index so d survives a round trip.
      if (v == 0.0 && !(i == 0 && k + 1 == data.dim())) continue;
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << ' ' << (k + 1) << ':' << buf;
    }
    out << '\n';
  }
}

ScalingParams fit_scaling(const Dataset& data) {
  if (data.empty()) throw MklError(ErrorCode::EmptyDataset, "cannot fit scaling on no points");
  ScalingParams p;
  p.min.assign(data.dim(), 0.0);
  p.max.assign(data.dim(), 0.0);
  for (std::size_t k = 0; k < data.dim(); ++k) {
    double lo = data.at(0, k), hi = lo;
    for (std::size_t i = 1; i < data.size(); ++i) {
      lo = std::min(lo, data.at(i, k));
      hi = std::max(hi, data.at(i, k));
    }
    p.min[k] = lo;
    p.max[k] = hi;
  }
  return p;
}

void apply_scaling(std::span<double> point, const ScalingParams& params) {
  if (point.size() != params.dim()) {
    throw MklError(ErrorCode::DimensionMismatch, "point dimension does not match scaling");
  }
  for (std::size_t k = 0; k < point.size(); ++k) {
    const double width = params.max[k] - params.min[k];
    if (!(width > 0)) {
      point[k] = 0.0;
      continue;
    }
    point[k] = std::clamp((point[k] - params.min[k]) / width, 0.0, 1.0);
  }
}

Dataset apply_scaling(const Dataset& data, const ScalingParams& params) {
  if (data.dim() != params.dim()) {
    throw MklError(ErrorCode::DimensionMismatch, "dataset dimension does not match scaling");
  }
  std::vector<double> pts = data.points();
  for (std::size_t i = 0; i < data.size(); ++i) {
    apply_scaling(std::span<double>(pts.data() + i * data.dim(), data.dim()), params);
  }
  return Dataset(data.dim(), std::move(pts), data.labels());
}

std::pair<Dataset, Dataset> split(const Dataset& data, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw MklError(ErrorCode::InvalidArgument, "train fraction must lie in (0,1)");
  }
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(data.size())));
  n_train = std::clamp<std::size_t>(n_train, 1, data.size());

  std::span<const std::size_t> all(order);
  Dataset train = data.subset(all.first(n_train));
  Dataset test = data.subset(all.subspan(n_train));
  if (!train.has_both_classes()) {
    throw MklError(ErrorCode::OneClassSplit, "training split contains a single class");
  }
  return {std::move(train), std::move(test)};
}

std::vector<std::size_t> stratified_folds(const Dataset& data, std::size_t folds, std::uint64_t seed) {
  if (folds < 2) throw MklError(ErrorCode::InvalidArgument, "need at least two folds");
  std::vector<std::size_t> assignment(data.size(), 0);
  std::mt19937_64 rng(seed);
  std::size_t next = 0;
  for (int label : {+1, -1}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (data.label(i) == label) members.push_back(i);
    }
    std::shuffle(members.begin(), members.end(), rng);
    // Continue the round robin across classes so fold sizes stay balanced too.
    for (std::size_t i : members) assignment[i] = next++ % folds;
  }
  return assignment;
}

}  // namespace mklmmwu
