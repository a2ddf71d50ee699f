#include "mklmmwu/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "mklmmwu/error.hpp"

namespace mklmmwu {

namespace {

double int_pow(double base, int degree) {
  double r = base;
  for (int k = 1; k < degree; ++k) r *= base;
  return r;
}

// Squared distance and dot product over the spec's feature set, accumulated in
// feature order so every caller rounds identically.
struct PairStats {
  double dist2 = 0.0;
  double dot = 0.0;
};

PairStats pair_stats(const std::optional<std::size_t>& feature, std::span<const double> x,
                     std::span<const double> z) {
  PairStats s;
  if (feature) {
    const double a = x[*feature], b = z[*feature];
    s.dist2 = (a - b) * (a - b);
    s.dot = a * b;
    return s;
  }
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double diff = x[k] - z[k];
    s.dist2 += diff * diff;
    s.dot += x[k] * z[k];
  }
  return s;
}

double eval_from_stats(const KernelKind& kind, const PairStats& s) {
  if (const auto* g = std::get_if<Gaussian>(&kind)) {
    return std::exp(-s.dist2 / (2.0 * g->sigma * g->sigma));
  }
  return int_pow(s.dot + 1.0, std::get<Polynomial>(kind).degree);
}

void validate(const KernelSpec& spec, std::size_t dim) {
  if (const auto* g = std::get_if<Gaussian>(&spec.kind)) {
    if (!(g->sigma > 0.0) || !std::isfinite(g->sigma)) {
      throw MklError(ErrorCode::InvalidArgument, "Gaussian bandwidth must be positive");
    }
  } else if (std::get<Polynomial>(spec.kind).degree < 1) {
    throw MklError(ErrorCode::InvalidArgument, "polynomial degree must be >= 1");
  }
  if (spec.feature && *spec.feature >= dim) {
    throw MklError(ErrorCode::DimensionMismatch, "kernel feature index out of range");
  }
}

}  // namespace

double eval_kernel(const KernelSpec& spec, std::span<const double> x, std::span<const double> z) {
  return eval_from_stats(spec.kind, pair_stats(spec.feature, x, z));
}

std::vector<KernelSpec> make_default_family(std::size_t dim, bool per_feature) {
  if (dim == 0) throw MklError(ErrorCode::InvalidArgument, "dimension must be positive");
  std::vector<KernelSpec> block;
  for (int p = 1; p <= 3; ++p) block.push_back({Polynomial{p}, std::nullopt});
  for (int k = 0; k <= 8; ++k) {
    // Even exponents are exact powers of two; odd ones carry one sqrt(2).
    const double sigma = (k % 2 == 0) ? std::ldexp(1.0, k / 2) : std::ldexp(std::sqrt(2.0), k / 2);
    block.push_back({Gaussian{sigma}, std::nullopt});
  }
  if (!per_feature) return block;

  std::vector<KernelSpec> family;
  family.reserve(block.size() * dim);
  for (std::size_t f = 0; f < dim; ++f) {
    for (KernelSpec spec : block) {
      spec.feature = f;
      family.push_back(spec);
    }
  }
  return family;
}

std::string format_kernel(const KernelSpec& spec) {
  char buf[64];
  std::string out;
  if (const auto* g = std::get_if<Gaussian>(&spec.kind)) {
    std::snprintf(buf, sizeof buf, "%.17g", g->sigma);
    out = std::string("gaussian ") + buf;
  } else {
    out = "poly " + std::to_string(std::get<Polynomial>(spec.kind).degree);
  }
  out += spec.feature ? " " + std::to_string(*spec.feature + 1) : std::string(" all");
  return out;
}

KernelSpec parse_kernel(const std::string& line) {
  std::istringstream in(line);
  std::string kind, feature, extra;
  KernelSpec spec{Gaussian{}, std::nullopt};
  if (!(in >> kind)) throw MklError(ErrorCode::MalformedModel, "empty kernel line");
  if (kind == "gaussian") {
    double sigma = 0;
    if (!(in >> sigma) || !(sigma > 0)) throw MklError(ErrorCode::MalformedModel, "bad bandwidth: " + line);
    spec.kind = Gaussian{sigma};
  } else if (kind == "poly") {
    int degree = 0;
    if (!(in >> degree) || degree < 1) throw MklError(ErrorCode::MalformedModel, "bad degree: " + line);
    spec.kind = Polynomial{degree};
  } else {
    throw MklError(ErrorCode::MalformedModel, "unknown kernel kind: " + line);
  }
  if (!(in >> feature)) throw MklError(ErrorCode::MalformedModel, "missing feature set: " + line);
  if (feature != "all") {
    std::size_t idx = 0;
    try {
      std::size_t used = 0;
      idx = std::stoul(feature, &used);
      if (used != feature.size() || idx == 0) throw std::invalid_argument(feature);
    } catch (const std::exception&) {
      throw MklError(ErrorCode::MalformedModel, "bad feature index: " + line);
    }
    spec.feature = idx - 1;
  }
  if (in >> extra) throw MklError(ErrorCode::MalformedModel, "trailing tokens: " + line);
  return spec;
}

GramAccessor::GramAccessor(std::vector<KernelSpec> bound_specs, Dataset data)
    : specs_(std::move(bound_specs)), data_(std::move(data)) {
  inv_trace_.reserve(specs_.size());
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    const KernelSpec& s = specs_[i];
    validate(s, data_.dim());
    if (!(s.trace_norm > 0.0) || !std::isfinite(s.trace_norm)) {
      throw MklError(ErrorCode::DegenerateKernel, "kernel " + std::to_string(i) + " is not bound");
    }
    inv_trace_.push_back(1.0 / s.trace_norm);

    auto group = std::find_if(groups_.begin(), groups_.end(),
                              [&](const FeatureGroup& g) { return g.feature == s.feature; });
    if (group == groups_.end()) {
      groups_.push_back({s.feature, {}, {}});
      group = groups_.end() - 1;
    }
    if (const auto* g = std::get_if<Gaussian>(&s.kind)) {
      group->gaussians.push_back({i, 1.0 / (2.0 * g->sigma * g->sigma), false});
    } else {
      group->polys.push_back(i);
    }
  }
  for (auto& group : groups_) {
    auto& chain = group.gaussians;
    std::stable_sort(chain.begin(), chain.end(), [](const ChainLink& a, const ChainLink& b) {
      return a.inv_two_sigma2 < b.inv_two_sigma2;
    });
    // exp(-2t) == exp(-t)^2: a kernel whose exponent rate is twice the previous
    // one reuses it.
    for (std::size_t c = 1; c < chain.size(); ++c) {
      const double ratio = chain[c].inv_two_sigma2 / chain[c - 1].inv_two_sigma2;
      chain[c].square_previous = std::abs(ratio - 2.0) < 1e-12;
    }
  }
}

double GramAccessor::entry(std::size_t kernel, std::size_t j, std::size_t k) const {
  const KernelSpec& s = specs_[kernel];
  double value = eval_kernel(s, data_.row(j), data_.row(k));
  if (j == k) value += s.ridge;
  return static_cast<double>(data_.label(j) * data_.label(k)) * value * inv_trace_[kernel];
}

void GramAccessor::signed_column(std::size_t kernel, std::size_t j, std::span<double> out) const {
  const std::size_t n = num_points();
  for (std::size_t k = 0; k < n; ++k) out[k] = entry(kernel, j, k);
}

std::vector<double> GramAccessor::signed_column(std::size_t kernel, std::size_t j) const {
  std::vector<double> out(num_points());
  signed_column(kernel, j, out);
  return out;
}

void GramAccessor::signed_columns(std::size_t j, std::span<double> out) const {
  const std::size_t n = num_points();
  const auto xj = data_.row(j);
  const int yj = data_.label(j);
  for (const FeatureGroup& group : groups_) {
    for (std::size_t k = 0; k < n; ++k) {
      const PairStats st = pair_stats(group.feature, xj, data_.row(k));
      const double sign = static_cast<double>(yj * data_.label(k));
      for (std::size_t i : group.polys) {
        const KernelSpec& s = specs_[i];
        double value = int_pow(st.dot + 1.0, std::get<Polynomial>(s.kind).degree);
        if (k == j) value += s.ridge;
        out[i * n + k] = sign * value * inv_trace_[i];
      }
      double e = 0.0;
      for (const ChainLink& link : group.gaussians) {
        e = link.square_previous ? e * e : std::exp(-st.dist2 * link.inv_two_sigma2);
        double value = e;
        if (k == j) value += specs_[link.kernel].ridge;
        out[link.kernel * n + k] = sign * value * inv_trace_[link.kernel];
      }
    }
  }
}

GramAccessor bind_kernels(std::vector<KernelSpec> specs, const Dataset& data, Margin margin) {
  if (margin.mode == MarginMode::TwoNorm && !(margin.C > 0.0)) {
    throw MklError(ErrorCode::InvalidArgument, "C must be positive in 2-norm mode");
  }
  if (data.empty()) throw MklError(ErrorCode::EmptyDataset, "cannot bind kernels to no points");
  const double ridge = margin.ridge();
  for (std::size_t i = 0; i < specs.size(); ++i) {
    KernelSpec& s = specs[i];
    validate(s, data.dim());
    s.ridge = ridge;
    double trace = 0.0;
    for (std::size_t j = 0; j < data.size(); ++j) {
      trace += eval_kernel(s, data.row(j), data.row(j)) + ridge;
    }
    if (!(trace > 0.0) || !std::isfinite(trace)) {
      throw MklError(ErrorCode::DegenerateKernel, "kernel " + std::to_string(i) + " has zero trace");
    }
    s.trace_norm = trace;
  }
  return GramAccessor(std::move(specs), data);
}

}  // namespace mklmmwu
