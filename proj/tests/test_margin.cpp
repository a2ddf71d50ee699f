#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "mklmmwu/model.hpp"
#include "mklmmwu/oracle.hpp"
#include "synthetic.hpp"

using namespace mklmmwu;
using oracle::DenseMatrix;

namespace {

KernelSpec gaussian(double sigma, std::optional<std::size_t> feature = std::nullopt) {
  return {Gaussian{sigma}, feature};
}

}  // namespace

TEST_CASE("extracted classifier margin against the optimal margin") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 4 + rng() % 9;
    const Dataset data = testing::two_blobs(n, rng(), 0.15);
    std::vector<KernelSpec> specs{gaussian(0.3, 0), gaussian(0.3, 1), gaussian(1.0)};
    specs.resize(1 + rng() % 3);
    const auto gram = bind_kernels(specs, data, Margin::hard());
    SolverConfig cfg;
    cfg.margin = Margin::hard();
    cfg.eps = 0.1;
    const TrainResult result = train(gram, cfg);
    const ScalingParams unit{std::vector<double>(2, 0.0), std::vector<double>(2, 1.0)};
    const MklModel model = build_model(result, gram, cfg, unit);

    std::vector<DenseMatrix> g;
    for (std::size_t i = 0; i < specs.size(); ++i) g.push_back(oracle::dense_gram(gram, i));
    const auto best = oracle::brute_qcqp(g, data.labels());

    // Geometric margin of the bisector under the convex combination mu / sum(mu).
    MklModel m = model;
    const double total = std::accumulate(m.mu.begin(), m.mu.end(), 0.0);
    for (double& w : m.mu) w /= total;
    m.bias = compute_bias(result.state, result.iterations, gram, m.mu);
    const auto qhat = normalized_quadforms(result.state, result.iterations);
    double w2 = 0.0;
    for (std::size_t i = 0; i < qhat.size(); ++i) w2 += 4.0 * m.mu[i] * qhat[i];
    double margin = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) margin = std::min(margin, data.label(j) * decision_value(m, data.row(j)));
    margin /= std::sqrt(w2);
    INFO("trial " << trial << ": margin " << margin << ", optimal " << std::sqrt(best.omega)
                  << ", objective " << *std::max_element(qhat.begin(), qhat.end()) << " vs " << best.omega);
    CHECK(margin >= (1.0 - cfg.eps) * std::sqrt(best.lower_bound));
  }
}
