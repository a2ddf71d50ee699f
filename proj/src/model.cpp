#include "mklmmwu/model.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "mklmmwu/error.hpp"

namespace mklmmwu {

std::vector<double> normalized_quadforms(const SolverState& state, std::size_t iterations) {
  const double t2 = static_cast<double>(iterations) * static_cast<double>(iterations);
  std::vector<double> q(state.q.size());
  for (std::size_t i = 0; i < q.size(); ++i) q[i] = state.q[i] / t2;
  return q;
}

std::vector<double> extract_weights(const SolverState& state, std::size_t iterations, double min_quadform) {
  if (iterations == 0) throw MklError(ErrorCode::DegenerateModel, "solver ran no iterations");
  const std::vector<double> qhat = normalized_quadforms(state, iterations);
  std::vector<double> mu(qhat.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (!(qhat[i] >= min_quadform)) continue;
    // Complementary slackness forces the positive branch of the sinh block.
    mu[i] = std::abs(2.0 * state.p12[i]) / std::sqrt(qhat[i]);
    total += mu[i] * qhat[i];
  }
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw MklError(ErrorCode::DegenerateModel, "all kernel weights vanished");
  }
  for (double& w : mu) w /= total;
  return mu;
}

double compute_bias(const SolverState& state, std::size_t iterations, const GramAccessor& gram,
                    std::span<const double> mu) {
  const std::size_t n = state.num_points;
  const double inv_t = 1.0 / static_cast<double>(iterations);
  const Dataset& data = gram.data();
  double bias = 0.0;
  for (std::size_t i = 0; i < state.num_kernels; ++i) {
    if (mu[i] == 0.0) continue;
    const KernelSpec& spec = gram.specs()[i];
    const double ridge_scaled = spec.ridge / spec.trace_norm;
    const auto vi = state.v_row(i);
    // sum_- c (YKYc)_j - sum_+ c (YKYc)_j = |a_-|^2 - |a_+|^2 in kernel i / r_i.
    double diff = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double c = state.alpha_bar[j] * inv_t;
      if (c == 0.0) continue;
      const double unridged = vi[j] * inv_t - ridge_scaled * c;
      diff += data.label(j) > 0 ? -c * unridged : c * unridged;
    }
    bias += 2.0 * mu[i] * diff;
  }
  return bias;
}

MklModel build_model(const TrainResult& result, const GramAccessor& gram, const SolverConfig& config,
                     ScalingParams scaling) {
  const SolverState& state = result.state;
  MklModel model;
  model.specs = gram.specs();
  model.mu = extract_weights(state, result.iterations, config.min_quadform);
  model.bias = compute_bias(state, result.iterations, gram, model.mu);
  model.scaling = std::move(scaling);
  model.config = config;
  const Dataset& data = gram.data();
  if (model.scaling.dim() != data.dim()) {
    throw MklError(ErrorCode::DimensionMismatch, "scaling does not match training data");
  }
  const double inv_t = 1.0 / static_cast<double>(result.iterations);
  for (std::size_t j = 0; j < data.size(); ++j) {
    if (state.alpha_bar[j] == 0.0) continue;
    auto row = data.row(j);
    model.support.push_back({{row.begin(), row.end()}, data.label(j), state.alpha_bar[j] * inv_t});
  }
  return model;
}

double decision_value(const MklModel& model, std::span<const double> x) {
  if (x.size() != model.dim()) {
    throw MklError(ErrorCode::DimensionMismatch, "query has " + std::to_string(x.size()) +
                                                     " features, model expects " +
                                                     std::to_string(model.dim()));
  }
  double f = model.bias;
  for (const SupportVector& sv : model.support) {
    double k = 0.0;
    for (std::size_t i = 0; i < model.specs.size(); ++i) {
      if (model.mu[i] == 0.0) continue;
      k += model.mu[i] * eval_kernel(model.specs[i], sv.point, x) / model.specs[i].trace_norm;
    }
    f += 2.0 * sv.coef * sv.label * k;
  }
  return f;
}

int predict(const MklModel& model, std::span<const double> x) {
  return decision_value(model, x) >= 0.0 ? 1 : -1;
}

int predict_raw(const MklModel& model, std::span<const double> raw) {
  std::vector<double> x(raw.begin(), raw.end());
  apply_scaling(x, model.scaling);
  return predict(model, x);
}

double error_rate(const MklModel& model, const Dataset& data) {
  if (data.empty()) throw MklError(ErrorCode::EmptyDataset, "no points to evaluate");
  std::size_t wrong = 0;
  for (std::size_t j = 0; j < data.size(); ++j) {
    if (predict(model, data.row(j)) != data.label(j)) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(data.size());
}

namespace {

constexpr const char* kMagic = "mklmmwu";
constexpr const char* kVersion = "v1";

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

[[noreturn]] void malformed(const std::string& why) { throw MklError(ErrorCode::MalformedModel, why); }

double to_double(const std::string& tok) {
  double out = 0.0;
  const char* first = tok.data();
  if (!tok.empty() && tok.front() == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, tok.data() + tok.size(), out);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(out)) {
    malformed("bad number '" + tok + "'");
  }
  return out;
}

std::size_t to_count(const std::string& tok) {
  std::size_t out = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) malformed("bad count '" + tok + "'");
  return out;
}

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  bool peek(std::vector<std::string>& tokens) {
    if (!has_pending_) {
      std::string line;
      if (!std::getline(in_, line)) return false;
      pending_.clear();
      std::istringstream ss(line);
      for (std::string tok; ss >> tok;) pending_.push_back(tok);
      has_pending_ = true;
    }
    tokens = pending_;
    return true;
  }

  std::vector<std::string> next(const std::string& expected_key, std::size_t values) {
    std::vector<std::string> tokens;
    if (!peek(tokens)) malformed("truncated model: expected '" + expected_key + "'");
    has_pending_ = false;
    if (tokens.empty() || tokens[0] != expected_key) malformed("expected '" + expected_key + "' line");
    if (values != kAnyCount && tokens.size() != values + 1) {
      malformed("wrong field count on '" + expected_key + "' line");
    }
    return tokens;
  }

  void consume() { has_pending_ = false; }

  static constexpr std::size_t kAnyCount = static_cast<std::size_t>(-1);

 private:
  std::istream& in_;
  std::vector<std::string> pending_;
  bool has_pending_ = false;
};

}  // namespace

void save_model(const MklModel& model, std::ostream& out) {
  const std::size_t d = model.dim();
  out << kMagic << ' ' << kVersion << '\n';
  out << "n_support " << model.support.size() << '\n';
  out << "bias " << fmt(model.bias) << '\n';
  out << "config eps " << fmt(model.config.eps) << " rho " << fmt(model.config.rho) << " margin "
      << (model.config.margin.mode == MarginMode::Hard ? "hard" : "l2") << " C "
      << fmt(model.config.margin.C) << '\n';
  out << "scale " << d;
  for (std::size_t k = 0; k < d; ++k) out << ' ' << fmt(model.scaling.min[k]) << ' ' << fmt(model.scaling.max[k]);
  out << '\n';
  for (std::size_t i = 0; i < model.specs.size(); ++i) {
    if (model.mu[i] == 0.0) continue;
    const KernelSpec& s = model.specs[i];
    out << format_kernel(s) << '\n';
    out << "r " << fmt(s.trace_norm) << '\n';
    out << "ridge " << fmt(s.ridge) << '\n';
    out << "mu " << fmt(model.mu[i]) << '\n';
  }
  for (const SupportVector& sv : model.support) {
    out << "sv " << sv.label << ' ' << fmt(sv.coef);
    for (double x : sv.point) out << ' ' << fmt(x);
    out << '\n';
  }
}

MklModel load_model(std::istream& in) {
  LineReader reader(in);
  std::vector<std::string> tok;
  if (!reader.peek(tok) || tok.empty()) malformed("empty model file");
  if (tok[0] != kMagic || tok.size() != 2) malformed("not a model file");
  if (tok[1] != kVersion) {
    throw MklError(ErrorCode::VersionMismatch, "unsupported model version " + tok[1]);
  }
  reader.consume();

  MklModel model;
  const std::size_t n_support = to_count(reader.next("n_support", 1)[1]);
  model.bias = to_double(reader.next("bias", 1)[1]);

  tok = reader.next("config", 8);
  if (tok[1] != "eps" || tok[3] != "rho" || tok[5] != "margin" || tok[7] != "C") malformed("bad config line");
  model.config.eps = to_double(tok[2]);
  model.config.rho = to_double(tok[4]);
  if (tok[6] == "hard") model.config.margin.mode = MarginMode::Hard;
  else if (tok[6] == "l2") model.config.margin.mode = MarginMode::TwoNorm;
  else malformed("bad margin mode '" + tok[6] + "'");
  model.config.margin.C = to_double(tok[8]);

  tok = reader.next("scale", LineReader::kAnyCount);
  if (tok.size() < 2) malformed("bad scale line");
  const std::size_t d = to_count(tok[1]);
  if (tok.size() != 2 + 2 * d) malformed("scale line has wrong field count");
  for (std::size_t k = 0; k < d; ++k) {
    model.scaling.min.push_back(to_double(tok[2 + 2 * k]));
    model.scaling.max.push_back(to_double(tok[3 + 2 * k]));
  }

  while (reader.peek(tok) && !tok.empty() && tok[0] != "sv") {
    std::string line;
    for (const auto& t : tok) line += (line.empty() ? "" : " ") + t;
    reader.consume();
    KernelSpec spec = parse_kernel(line);
    if (spec.feature && *spec.feature >= d) malformed("kernel feature out of range");
    spec.trace_norm = to_double(reader.next("r", 1)[1]);
    spec.ridge = to_double(reader.next("ridge", 1)[1]);
    const double mu = to_double(reader.next("mu", 1)[1]);
    if (!(spec.trace_norm > 0.0) || spec.ridge < 0.0 || mu < 0.0) malformed("bad kernel parameters");
    model.specs.push_back(spec);
    model.mu.push_back(mu);
  }
  if (model.specs.empty()) malformed("model has no kernels");

  for (std::size_t s = 0; s < n_support; ++s) {
    tok = reader.next("sv", 2 + d);
    SupportVector sv;
    if (tok[1] == "1") sv.label = 1;
    else if (tok[1] == "-1") sv.label = -1;
    else malformed("bad support label '" + tok[1] + "'");
    sv.coef = to_double(tok[2]);
    for (std::size_t k = 0; k < d; ++k) sv.point.push_back(to_double(tok[3 + k]));
    model.support.push_back(std::move(sv));
  }
  while (reader.peek(tok)) {
    reader.consume();
    if (!tok.empty()) malformed("unexpected trailing content");
  }
  return model;
}

void save_model_file(const MklModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw MklError(ErrorCode::Io, "cannot write " + path);
  save_model(model, out);
  if (!out) throw MklError(ErrorCode::Io, "write failed for " + path);
}

MklModel load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MklError(ErrorCode::Io, "cannot open " + path);
  return load_model(in);
}

}  // namespace mklmmwu
