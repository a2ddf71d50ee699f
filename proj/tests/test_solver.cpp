#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numeric>
#include <random>

#include "mklmmwu/error.hpp"
#include "mklmmwu/model.hpp"
#include "mklmmwu/oracle.hpp"
#include "mklmmwu/solver.hpp"
#include "synthetic.hpp"

using namespace mklmmwu;
using oracle::DenseMatrix;

namespace {

KernelSpec linear() { return {Polynomial{1}, std::nullopt}; }
KernelSpec gaussian(double sigma) { return {Gaussian{sigma}, std::nullopt}; }

double rel_diff(double a, double b, double scale) { return std::abs(a - b) / std::max(scale, 1e-300); }

DenseMatrix arrow_matrix(double a, const std::vector<double>& u) {
  const std::size_t n = u.size();
  DenseMatrix m(n + 1);
  for (std::size_t k = 0; k <= n; ++k) m(k, k) = a;
  for (std::size_t k = 0; k < n; ++k) m(k, n) = m(n, k) = u[k];
  return m;
}

Eigen::MatrixXd psd_sqrt(const DenseMatrix& g) {
  const std::size_t n = g.size();
  Eigen::MatrixXd e(n, n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) e(r, c) = g(r, c);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(e);
  Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

TEST_CASE("iteration budget arithmetic") {
  SolverConfig c;
  CHECK(iteration_budget(c, 1000) == 3109);
  CHECK(iteration_budget(c, 208) == 2402);
  CHECK(epsilon_prime(0.2, 1.5) == doctest::Approx(0.06899287).epsilon(1e-6));
  c.max_iters_override = 7;
  CHECK(iteration_budget(c, 1) == 7);
  c.max_iters_override.reset();
  CHECK_THROWS_AS(iteration_budget(c, 1), MklError);
}

TEST_CASE("config validation") {
  SolverConfig c;
  CHECK_NOTHROW(c.validate());
  for (double bad : {0.0, -0.1, 3.0, 4.0}) {
    c.eps = bad;
    CHECK_THROWS_AS(c.validate(), MklError);
  }
  c.eps = 0.2;
  c.margin = Margin::two_norm(0.0);
  CHECK_THROWS_AS(c.validate(), MklError);
  c.margin = Margin::hard();
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("find_alpha examples") {
  const std::vector<int> y{1, -1, 1};
  CHECK(find_alpha(std::vector<double>{0.2, 0.5, 0.9}, y) == DualUpdate{2, 1});
  const std::vector<int> y2{-1, -1, 1, 1};
  CHECK(find_alpha(std::vector<double>(4, 0.0), y2) == DualUpdate{2, 0});
  CHECK(find_alpha(std::vector<double>{3.0, 3.0, 1.0, 1.0}, y2) == DualUpdate{2, 0});
  CHECK_THROWS_AS(find_alpha(std::vector<double>{1.0, 2.0}, std::vector<int>{1, 1}), MklError);
}

TEST_CASE("apply_update on a two-point instance") {
  // Unit-trace version of [[1,-0.5],[-0.5,1]].
  const Dataset two(1, {0.0, std::sqrt(2.0 * std::log(2.0))}, {1, -1});
  const auto gram = bind_kernels({gaussian(1.0)}, two, Margin::hard());
  SolverState s = SolverState::zeros(1, 2);
  ColumnScratch scratch(1, 2);
  const double width = apply_update(s, {0, 1}, gram, scratch);
  CHECK(s.alpha_bar == std::vector<double>{0.5, 0.5});
  CHECK(s.q[0] == doctest::Approx(0.125).epsilon(1e-15));
  CHECK(width == doctest::Approx(std::sqrt(0.125)));

  const auto dense = oracle::recompute_state(s.alpha_bar, gram);
  CHECK(s.q[0] == doctest::Approx(dense.q[0]).epsilon(1e-15));

  apply_update(s, {0, 1}, gram, scratch);
  const auto again = oracle::recompute_state(s.alpha_bar, gram);
  CHECK(std::abs(s.q[0] - again.q[0]) <= 1e-12);
  CHECK(s.q[0] == doctest::Approx(0.5).epsilon(1e-14));
  for (std::size_t k = 0; k < 2; ++k) CHECK(std::abs(s.v[k] - again.v[k]) <= 1e-12);
}

TEST_CASE("hard-margin step width stays under the diagonal bound") {
  const Dataset data = testing::uniform_cloud(16, 3, 4);
  const auto gram = bind_kernels(make_default_family(3, false), data, Margin::hard());
  for (std::size_t jp = 0; jp < data.size(); ++jp) {
    if (data.label(jp) < 0) continue;
    for (std::size_t jm = 0; jm < data.size(); ++jm) {
      if (data.label(jm) > 0) continue;
      SolverState s = SolverState::zeros(gram.num_kernels(), data.size());
      ColumnScratch scratch(gram.num_kernels(), data.size());
      apply_update(s, {jp, jm}, gram, scratch);
      for (std::size_t i = 0; i < gram.num_kernels(); ++i) {
        CHECK(s.q[i] <= 0.25 * (gram.entry(i, jp, jp) + gram.entry(i, jm, jm)) + 1e-15);
      }
    }
  }
}

TEST_CASE("exponentiate_m on a fresh state yields g = 0") {
  SolverState s = SolverState::zeros(3, 5);
  SolverConfig c;
  exponentiate_m(s, epsilon_prime(c.eps, c.rho), c);
  for (double x : s.g) CHECK(x == 0.0);
  for (double x : s.p12) CHECK(x == 0.0);
  CHECK(s.e_m == 1.0);
}

TEST_CASE("exponentiate_m normalization with one kernel") {
  SolverState s = SolverState::zeros(1, 4);
  s.q[0] = 9.0;
  s.v = {1.0, -2.0, 0.5, 0.0};
  SolverConfig c;
  const double ep = 0.3;
  exponentiate_m(s, ep, c);
  const double sv = ep / (2.0 * c.rho) * 3.0;
  const double trace = 3.0 + 2.0 * std::cosh(sv);
  CHECK(s.p12[0] == doctest::Approx(-std::sinh(sv) / trace).epsilon(1e-14));
  // Full normalized trace of the primal is one by construction.
  CHECK((3.0 * s.e_m + 2.0 * std::cosh(sv)) / trace == doctest::Approx(1.0));
  for (std::size_t k = 0; k < 4; ++k) CHECK(s.g[k] == doctest::Approx(2.0 * s.p12[0] * s.v[k] / 3.0));
}

TEST_CASE("exponentiate_m quash branch") {
  SolverConfig c;
  const double ep = 0.5;
  const double rate = ep / (2.0 * c.rho);
  SolverState s = SolverState::zeros(2, 2);
  s.q = {std::pow(25.0 / rate, 2), std::pow(24.3 / rate, 2)};
  s.v = {1.0, 0.0, 0.0, 1.0};
  exponentiate_m(s, ep, c);
  CHECK(s.max_s == doctest::Approx(25.0).epsilon(1e-14));
  CHECK(s.e_m == doctest::Approx(std::exp(-25.0)).epsilon(1e-12));
  const double trace = 2.0 * std::exp(-25.0) + 2.0 * (1.0 + std::exp(-0.7));
  CHECK(s.p12[0] == doctest::Approx(-1.0 / trace).epsilon(1e-12));
  CHECK(s.p12[1] == doctest::Approx(-std::exp(-0.7) / trace).epsilon(1e-12));
  CHECK(s.p12[1] / s.p12[0] == doctest::Approx(std::exp(-0.7)).epsilon(1e-12));
  CHECK(std::isfinite(s.g[0]));
}

TEST_CASE("closed-form arrow exponential against the dense exponential") {
  {
    const auto e = arrow_exponential(0.0, std::vector<double>{0.0, 0.0, 0.0});
    for (std::size_t r = 0; r < 4; ++r)
      for (std::size_t c = 0; c < 4; ++c) CHECK(e.entry(r, c) == (r == c ? 1.0 : 0.0));
  }
  {
    const std::vector<double> u{1.0, 0.0};
    const auto e = arrow_exponential(0.0, u);
    const DenseMatrix ref = oracle::dense_expm(arrow_matrix(0.0, u));
    CHECK(e.entry(2, 2) == doctest::Approx(1.5430806348152437));
    CHECK(e.entry(0, 2) == doctest::Approx(1.1752011936438014));
    for (std::size_t r = 0; r < 3; ++r)
      for (std::size_t c = 0; c < 3; ++c) CHECK(std::abs(e.entry(r, c) - ref(r, c)) <= 1e-10);
  }
  {
    const std::vector<double> u{0.4, 0.0};
    const auto e = arrow_exponential(0.3, u);
    const DenseMatrix ref = oracle::dense_expm(arrow_matrix(0.3, u));
    for (std::size_t r = 0; r < 3; ++r)
      for (std::size_t c = 0; c < 3; ++c) CHECK(std::abs(e.entry(r, c) - ref(r, c)) <= 1e-10);
  }
}

TEST_CASE("random arrow matrices match the dense exponential") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 2 + rng() % 11;
    const double a = 2.0 * unit(rng);
    std::vector<double> u(n);
    double norm = 0.0;
    for (double& x : u) {
      x = normal(rng);
      norm += x * x;
    }
    const double target = 5.0 * unit(rng);
    for (double& x : u) x *= target / std::sqrt(norm);
    const auto e = arrow_exponential(a, u);
    const DenseMatrix ref = oracle::dense_expm(arrow_matrix(a, u));
    const double scale = ref.max_abs();
    double worst = 0.0;
    for (std::size_t r = 0; r <= n; ++r)
      for (std::size_t c = 0; c <= n; ++c) worst = std::max(worst, rel_diff(e.entry(r, c), ref(r, c), scale));
    CHECK(worst <= 1e-9);
  }
}

TEST_CASE("exponentiate_m matches the dense primal matrix") {
  // P = exp(-eps' sum_t M_t) / trace with M_t built from A_i = sqrt(G_i); the
  // rho I shift is a scalar factor and cancels in the normalization.
  const Dataset data = testing::uniform_cloud(6, 2, 21);
  const std::vector<KernelSpec> specs{linear(), gaussian(0.7), gaussian(2.0)};
  const auto gram = bind_kernels(specs, data, Margin::two_norm(1.0));
  const std::size_t n = data.size(), m = specs.size();

  SolverConfig cfg;
  const double ep = epsilon_prime(cfg.eps, cfg.rho);
  SolverState s = SolverState::zeros(m, n);
  ColumnScratch scratch(m, n);
  std::mt19937_64 rng(5);
  for (int step = 0; step < 9; ++step) {
    std::size_t jp, jm;
    do jp = rng() % n; while (data.label(jp) < 0);
    do jm = rng() % n; while (data.label(jm) > 0);
    apply_update(s, {jp, jm}, gram, scratch);
  }
  exponentiate_m(s, ep, cfg);

  const std::size_t b = n + 1;
  DenseMatrix big(m * b);
  std::vector<Eigen::MatrixXd> roots;
  Eigen::VectorXd abar = Eigen::Map<const Eigen::VectorXd>(s.alpha_bar.data(), n);
  for (std::size_t i = 0; i < m; ++i) {
    roots.push_back(psd_sqrt(oracle::dense_gram(gram, i)));
    const Eigen::VectorXd u = roots.back() * abar;
    for (std::size_t k = 0; k < n; ++k) {
      big(i * b + k, i * b + n) = big(i * b + n, i * b + k) = -ep / (2.0 * cfg.rho) * u[k];
    }
  }
  const DenseMatrix w = oracle::dense_expm(big);
  double trace = 0.0;
  for (std::size_t r = 0; r < m * b; ++r) trace += w(r, r);

  Eigen::VectorXd g_ref = Eigen::VectorXd::Zero(n);
  for (std::size_t i = 0; i < m; ++i) {
    Eigen::VectorXd col(n);
    for (std::size_t k = 0; k < n; ++k) col[k] = w(i * b + k, i * b + n) / trace;
    g_ref += 2.0 * roots[i] * col;
    const double norm_u = std::sqrt(s.q[i]);
    // Off-diagonal block is p12 * u_hat.
    const Eigen::VectorXd u_hat = roots[i] * abar / norm_u;
    CHECK(col.dot(u_hat) == doctest::Approx(s.p12[i]).epsilon(1e-9));
  }
  const double scale = g_ref.cwiseAbs().maxCoeff();
  for (std::size_t k = 0; k < n; ++k) CHECK(std::abs(s.g[k] - g_ref[k]) <= 1e-8 * scale);
}

TEST_CASE("two points select the same pair every round") {
  const Dataset two(1, {0.1, 0.9}, {-1, 1});
  const auto gram = bind_kernels({gaussian(1.0)}, two, Margin::hard());
  SolverConfig cfg;
  std::size_t rounds = 0;
  const auto result = train(gram, cfg, [&](const IterationRecord& r, const SolverState&) {
    ++rounds;
    CHECK(r.update == DualUpdate{1, 0});
  });
  CHECK(result.iterations == iteration_budget(cfg, 2));
  CHECK(rounds == result.iterations);
  const double t = static_cast<double>(result.iterations);
  CHECK(result.state.alpha_bar[0] / t == 0.5);
  CHECK(result.state.alpha_bar[1] / t == 0.5);
}

TEST_CASE("n = 1000 runs the full budget") {
  const Dataset data = testing::uniform_cloud(1000, 2, 9);
  const auto gram = bind_kernels({linear()}, data, Margin::two_norm(10.0));
  const auto result = train(gram, SolverConfig{});
  CHECK(result.iterations == 3109);
  CHECK(result.state.t == 3109);
}

TEST_CASE("separable blobs are fit exactly by a linear kernel") {
  const Dataset blobs = apply_scaling(testing::two_blobs(12, 3), fit_scaling(testing::two_blobs(12, 3)));
  SolverConfig cfg;
  cfg.margin = Margin::hard();
  const auto gram = bind_kernels({linear()}, blobs, cfg.margin);
  const auto result = train(gram, cfg);
  const MklModel model = build_model(result, gram, cfg, fit_scaling(blobs));
  CHECK(error_rate(model, blobs) == 0.0);

  const std::vector<DenseMatrix> g{oracle::dense_gram(gram, 0)};
  const auto best = oracle::brute_qcqp(g, blobs.labels());
  // Positive optimum certifies the hulls are disjoint.
  CHECK(best.lower_bound > 0.0);
  const auto qhat = normalized_quadforms(result.state, result.iterations);
  CHECK(qhat[0] >= best.lower_bound * (1.0 - 1e-9));
  CHECK(qhat[0] <= best.omega + cfg.eps);
}

TEST_CASE("training invariants across random instances") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 8; ++trial) {
    const std::size_t n = 4 + rng() % 27, d = 1 + rng() % 3;
    const Dataset data = testing::uniform_cloud(n, d, rng());
    const Margin margin = trial % 2 == 0 ? Margin::hard() : Margin::two_norm(1.0 + trial);
    const auto gram = bind_kernels(make_default_family(d, trial % 3 == 0), data, margin);
    SolverConfig cfg;
    cfg.margin = margin;
    cfg.eps = 0.3;

    std::size_t checked = 0;
    const auto result = train(gram, cfg, [&](const IterationRecord& r, const SolverState& s) {
      CHECK(r.max_width <= 0.5 + 1e-12);
      CHECK(r.g_dot_alpha >= -1.0 - 1e-9);
      CHECK(data.label(r.update.j_plus) == 1);
      CHECK(data.label(r.update.j_minus) == -1);
      if (r.t % 97 == 1) {
        ++checked;
        const auto dense = oracle::recompute_state(s.alpha_bar, gram);
        for (std::size_t i = 0; i < s.num_kernels; ++i) {
          CHECK(s.q[i] >= 0.0);
          // Errors are measured against the absolute-value form sum |a_j G_jk a_k|,
          // since q itself may cancel to nearly zero when the hulls overlap.
          double q_scale = 0.0;
          for (std::size_t j = 0; j < n; ++j) {
            double v_scale = 0.0;
            for (std::size_t k = 0; k < n; ++k) v_scale += std::abs(gram.entry(i, j, k)) * s.alpha_bar[k];
            q_scale += s.alpha_bar[j] * v_scale;
            CHECK(std::abs(s.v_row(i)[j] - dense.v[i * n + j]) <= 1e-8 * v_scale);
          }
          CHECK(std::abs(s.q[i] - dense.q[i]) <= 1e-8 * q_scale);
        }
      }
    });
    CHECK(checked > 0);

    const auto& abar = result.state.alpha_bar;
    const double t = static_cast<double>(result.iterations);
    double sum = 0.0, signed_sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      CHECK(abar[j] >= 0.0);
      sum += abar[j] / t;
      signed_sum += data.label(j) * abar[j];
    }
    CHECK(signed_sum == 0.0);
    CHECK(std::abs(sum - 1.0) <= 1e-12);
  }
}

TEST_CASE("training is deterministic") {
  const Dataset data = testing::uniform_cloud(25, 2, 31);
  const auto gram = bind_kernels(make_default_family(2, false), data, Margin::two_norm(10.0));
  const auto a = train(gram, SolverConfig{});
  const auto b = train(gram, SolverConfig{});
  CHECK(a.state.alpha_bar == b.state.alpha_bar);
  CHECK(a.state.q == b.state.q);
  CHECK(a.state.p12 == b.state.p12);
}

TEST_CASE("train rejects a one-class sample") {
  const Dataset one(1, {0.1, 0.2}, {1, 1});
  const auto gram = bind_kernels({linear()}, one, Margin::hard());
  CHECK_THROWS_AS(train(gram, SolverConfig{}), MklError);
}

TEST_CASE("trace records are key=value") {
  IterationRecord r;
  r.t = 4;
  r.update = {2, 3};
  const std::string line = format_trace(r);
  CHECK(line.find("iter=4") == 0);
  CHECK(line.find("j_plus=2") != std::string::npos);
  CHECK(line.find("j_minus=3") != std::string::npos);
}
