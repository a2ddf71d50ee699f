#include "mklmmwu/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "mklmmwu/error.hpp"
#include "mklmmwu/experiment.hpp"

namespace mklmmwu {

namespace {

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

std::string rate(double x) { return x < 0.0 ? std::string("na") : num(x); }

std::string dataset_name(const std::string& path) { return std::filesystem::path(path).stem().string(); }

int exit_code_for(const MklError& e) {
  switch (e.code()) {
    case ErrorCode::NumericalFailure: return kExitNumerical;
    case ErrorCode::InvalidArgument: return kExitUsage;
    default: return kExitData;
  }
}

void append_csv(const std::string& path, const RunReport& report) {
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  std::ofstream out(path, std::ios::app);
  if (!out) throw MklError(ErrorCode::Io, "cannot write " + path);
  if (fresh) out << RunReport::csv_header() << '\n';
  out << report.to_csv() << '\n';
}

std::size_t active_kernels(const MklModel& model) {
  return static_cast<std::size_t>(
      std::count_if(model.mu.begin(), model.mu.end(), [](double w) { return w > 1e-6; }));
}

MarginMode parse_margin(const std::string& s) { return s == "hard" ? MarginMode::Hard : MarginMode::TwoNorm; }

struct CommonFlags {
  std::string data;
  std::string margin = "l2";
  int kernels = 12;
  bool per_feature = false;
  std::uint64_t seed = 1;
  double train_fraction = 0.8;
  std::optional<std::size_t> max_iters;
  std::string csv;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--data", f.data, "LibSVM data file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--margin", f.margin, "hard or l2 (2-norm soft margin)")
      ->check(CLI::IsMember({"hard", "l2"}));
  cmd->add_option("--kernels", f.kernels, "Size of the base kernel family")->check(CLI::IsMember({12}));
  cmd->add_flag("--per-feature-kernels", f.per_feature, "One kernel family per feature");
  cmd->add_option("--seed", f.seed, "Random seed");
  cmd->add_option("--train-fraction", f.train_fraction, "Training share of each split")
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--max-iters", f.max_iters, "Override the iteration budget")->check(CLI::PositiveNumber);
  cmd->add_option("--csv", f.csv, "Append report rows to this CSV file");
}

}  // namespace

std::string RunReport::to_line() const {
  return "dataset=" + dataset + " n=" + std::to_string(n) + " d=" + std::to_string(d) +
         " m=" + std::to_string(m) + " eps=" + num(eps) + " C=" + num(C) + " margin=" + margin +
         " T=" + std::to_string(iterations) + " seconds=" + num(seconds) +
         " train_error=" + rate(train_error) + " test_error=" + rate(test_error) +
         " mu_active=" + std::to_string(mu_active);
}

std::string RunReport::csv_header() {
  return "dataset,n,d,m,eps,C,margin,T,seconds,train_error,test_error,mu_active";
}

std::string RunReport::to_csv() const {
  return dataset + "," + std::to_string(n) + "," + std::to_string(d) + "," + std::to_string(m) + "," +
         num(eps) + "," + num(C) + "," + margin + "," + std::to_string(iterations) + "," + num(seconds) +
         "," + rate(train_error) + "," + rate(test_error) + "," + std::to_string(mu_active);
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multiple kernel learning by matrix multiplicative weights"};
  app.require_subcommand(1);

  CommonFlags train_flags;
  double train_eps = 0.2, train_c = 10.0;
  std::string test_path, out_path;
  bool verbose = false;
  auto* train_cmd = app.add_subcommand("train", "Train a model");
  add_common(train_cmd, train_flags);
  train_cmd->add_option("--eps", train_eps, "Approximation error");
  train_cmd->add_option("--C", train_c, "Soft-margin constant");
  train_cmd->add_option("--test", test_path, "Held-out data (default: split --data)")
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--out", out_path, "Where to write the model");
  train_cmd->add_flag("--verbose", verbose, "Per-iteration trace on stderr");

  std::string model_path, eval_data;
  auto* eval_cmd = app.add_subcommand("eval", "Misclassification rate of a model on a data file");
  eval_cmd->add_option("--model", model_path, "Model file")->required();
  eval_cmd->add_option("--data", eval_data, "LibSVM data file")->required();

  std::string predict_model, predict_data;
  auto* predict_cmd = app.add_subcommand("predict", "Print label and decision value per point");
  predict_cmd->add_option("--model", predict_model, "Model file")->required();
  predict_cmd->add_option("--data", predict_data, "LibSVM data file")->required();

  CommonFlags cv_flags;
  std::vector<double> cv_eps{0.2}, cv_c{0.1, 1.0, 10.0, 100.0};
  std::size_t folds = 5, repeats = 0;
  auto* cv_cmd = app.add_subcommand("cv", "Cross-validate eps and C");
  add_common(cv_cmd, cv_flags);
  cv_cmd->add_option("--eps", cv_eps, "Grid of eps values")->delimiter(',');
  cv_cmd->add_option("--C", cv_c, "Grid of C values")->delimiter(',');
  cv_cmd->add_option("--folds", folds, "Number of folds")->check(CLI::Range(2, 1000));
  cv_cmd->add_option("--repeats", repeats, "Repeated split protocol with this many repeats");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train_cmd) {
      FitOptions fo;
      fo.config.eps = train_eps;
      fo.config.margin = {parse_margin(train_flags.margin), train_c};
      fo.config.max_iters_override = train_flags.max_iters;
      fo.per_feature_kernels = train_flags.per_feature;
      if (verbose) fo.trace = &err;
      fo.config.validate();

      const Dataset all = read_libsvm_file(train_flags.data);
      Dataset train_raw, test_raw;
      if (!test_path.empty()) {
        train_raw = all;
        test_raw = read_libsvm_file(test_path);
      } else {
        std::tie(train_raw, test_raw) = split(all, train_flags.train_fraction, train_flags.seed);
      }
      if (!train_raw.has_both_classes()) {
        throw MklError(ErrorCode::OneClassSplit, "training data contains a single class");
      }
      const FitOutcome fitted = fit(train_raw, fo);
      if (!out_path.empty()) save_model_file(fitted.model, out_path);

      RunReport report;
      report.dataset = dataset_name(train_flags.data);
      report.n = train_raw.size();
      report.d = train_raw.dim();
      report.m = fitted.model.specs.size();
      report.eps = fo.config.eps;
      report.C = fo.config.margin.mode == MarginMode::Hard ? 0.0 : fo.config.margin.C;
      report.margin = train_flags.margin;
      report.iterations = fitted.iterations;
      report.seconds = fitted.seconds;
      report.train_error = error_rate(fitted.model, fitted.scaled_train);
      if (!test_raw.empty()) report.test_error = evaluate_raw(fitted.model, test_raw);
      report.mu_active = active_kernels(fitted.model);
      out << report.to_line() << '\n';
      if (!train_flags.csv.empty()) append_csv(train_flags.csv, report);
      return kExitOk;
    }

    if (*eval_cmd) {
      const MklModel model = load_model_file(model_path);
      const Dataset data = read_libsvm_file(eval_data);
      RunReport report;
      report.dataset = dataset_name(eval_data);
      report.n = data.size();
      report.d = model.dim();
      report.m = model.specs.size();
      report.eps = model.config.eps;
      report.C = model.config.margin.mode == MarginMode::Hard ? 0.0 : model.config.margin.C;
      report.margin = model.config.margin.mode == MarginMode::Hard ? "hard" : "l2";
      report.test_error = evaluate_raw(model, data);
      report.mu_active = active_kernels(model);
      out << report.to_line() << '\n';
      return kExitOk;
    }

    if (*predict_cmd) {
      const MklModel model = load_model_file(predict_model);
      const Dataset data = read_libsvm_file(predict_data).with_dim(model.dim());
      const Dataset scaled = apply_scaling(data, model.scaling);
      char buf[64];
      for (std::size_t j = 0; j < scaled.size(); ++j) {
        const double f = decision_value(model, scaled.row(j));
        std::snprintf(buf, sizeof buf, "%+d %.17g", f >= 0.0 ? 1 : -1, f);
        out << buf << '\n';
      }
      return kExitOk;
    }

    if (*cv_cmd) {
      CvOptions cv;
      cv.eps_grid = cv_eps;
      cv.c_grid = cv_c;
      cv.margin = parse_margin(cv_flags.margin);
      cv.folds = folds;
      cv.per_feature_kernels = cv_flags.per_feature;
      cv.max_iters = cv_flags.max_iters;
      cv.seed = cv_flags.seed;
      cv.warnings = &err;
      for (double e : cv.eps_grid) {
        SolverConfig probe;
        probe.eps = e;
        probe.validate();
      }
      if (cv.margin == MarginMode::TwoNorm) {
        for (double c : cv.c_grid) {
          if (!(c > 0.0)) throw MklError(ErrorCode::InvalidArgument, "C must be positive");
        }
      }
      const Dataset data = read_libsvm_file(cv_flags.data);

      if (repeats == 0) {
        const CvOutcome result = cross_validate(data, cv);
        for (const GridPoint& p : result.grid) {
          out << "eps=" << num(p.eps) << " C=" << num(p.C) << " mean_error=" << num(p.mean_error)
              << " folds=" << p.folds_used << '\n';
        }
        out << "best eps=" << num(result.best.eps) << " C=" << num(result.best.C)
            << " mean_error=" << num(result.best.mean_error) << '\n';
        return kExitOk;
      }

      ProtocolOptions po;
      po.cv = cv;
      po.repeats = repeats;
      po.train_fraction = cv_flags.train_fraction;
      const ProtocolOutcome result = repeated_protocol(data, po);
      for (std::size_t r = 0; r < result.repeats.size(); ++r) {
        const RepeatOutcome& rep = result.repeats[r];
        out << "repeat=" << r << " eps=" << num(rep.chosen.eps) << " C=" << num(rep.chosen.C)
            << " test_error=" << num(rep.test_error) << " majority_error=" << num(rep.majority_error) << '\n';
      }
      out << "median_test_error=" << num(result.test_error.median) << " ci95_low=" << num(result.test_error.low)
          << " ci95_high=" << num(result.test_error.high)
          << " median_majority_error=" << num(result.majority_error.median) << '\n';
      return kExitOk;
    }
  } catch (const MklError& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace mklmmwu
