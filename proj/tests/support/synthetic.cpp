#include "synthetic.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

namespace mklmmwu::testing {

Dataset two_blobs(std::size_t n, std::uint64_t seed, double spread) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, spread);
  std::vector<double> pts;
  std::vector<int> ys;
  for (std::size_t j = 0; j < n; ++j) {
    const int y = j % 2 == 0 ? 1 : -1;
    const double c = y > 0 ? 0.25 : 0.75;
    pts.push_back(c + noise(rng));
    pts.push_back(c + noise(rng));
    ys.push_back(y);
  }
  return Dataset(2, std::move(pts), std::move(ys));
}

Dataset ionosphere_like(std::uint64_t seed) {
  constexpr std::size_t n = 351, d = 33, positives = 225;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  std::vector<int> ys(n, -1);
  std::fill(ys.begin(), ys.begin() + positives, 1);
  std::shuffle(ys.begin(), ys.end(), rng);
  std::vector<double> pts;
  pts.reserve(n * d);
  for (std::size_t j = 0; j < n; ++j) {
    const double y = ys[j];
    for (std::size_t k = 0; k < d; ++k) {
      double x = unit(rng);
      if (k < 10) x += 0.5 * y;
      else if (k < 14) x *= y > 0 ? 0.6 : 1.6;
      pts.push_back(x);
    }
  }
  return Dataset(d, std::move(pts), std::move(ys));
}

Dataset uniform_cloud(std::size_t n, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> pts(n * d);
  for (double& x : pts) x = u(rng);
  std::vector<int> ys(n);
  for (std::size_t j = 0; j < n; ++j) ys[j] = j % 2 == 0 ? 1 : -1;
  std::shuffle(ys.begin(), ys.end(), rng);
  return Dataset(d, std::move(pts), std::move(ys));
}

std::string temp_path(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "mklmmwu_tests";
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

std::string write_temp_libsvm(const Dataset& data, const std::string& name) {
  const std::string path = temp_path(name);
  std::ofstream out(path);
  write_libsvm(out, data);
  return path;
}

MklModel random_model(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t d = 1 + rng() % 5;
  MklModel m;
  auto family = make_default_family(d, rng() % 2 == 0);
  for (auto& s : family) {
    if (rng() % 3 == 0) continue;
    s.trace_norm = 1.0 + 50.0 * unit(rng);
    s.ridge = rng() % 2 ? 0.0 : unit(rng);
    m.specs.push_back(s);
    m.mu.push_back(rng() % 4 == 0 ? 0.0 : unit(rng) * 3.0);
  }
  if (m.specs.empty()) {
    m.specs.push_back(family[0]);
    m.specs[0].trace_norm = 2.0;
    m.mu.push_back(1.0);
  }
  if (std::all_of(m.mu.begin(), m.mu.end(), [](double w) { return w == 0.0; })) m.mu[0] = 1.0;
  m.bias = unit(rng) - 0.5;
  m.scaling = {std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)};
  for (std::size_t k = 0; k < d; ++k) m.scaling.max[k] = 1.0 + unit(rng);
  const std::size_t k = 1 + rng() % 10;
  for (std::size_t j = 0; j < k; ++j) {
    SupportVector sv;
    sv.label = j % 2 ? -1 : 1;
    sv.coef = unit(rng) / 3.0;
    for (std::size_t f = 0; f < d; ++f) sv.point.push_back(unit(rng));
    m.support.push_back(sv);
  }
  return m;
}

}  // namespace mklmmwu::testing
