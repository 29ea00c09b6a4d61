#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dfsdca/dataset.hpp"
#include "dfsdca/loss.hpp"

namespace dfsdca {

/// Stepsize/sampling recipes compared by the harness.
///   nice     tau-nice sampling, tau-nice ESO
///   imp      importance minibatch sampling (closed-form bucket plan)
///   alt      bucket plan from alternating optimization
///   ubucket  uniform bucket sampling
enum class Variant { nice, imp, alt, ubucket };

Variant parse_variant(std::string_view name);
std::string to_string(Variant variant);

struct ExperimentConfig {
  std::string data;  // LibSVM path or synthetic:<dist>:<n>:<d>:<omega>[:<seed>]
  LossKind loss = LossKind::logistic;
  std::optional<double> lambda;  // default: max_i ||X_:i|| / n
  std::vector<std::size_t> taus{1, 2, 4, 8, 16, 32};
  std::vector<Variant> variants{Variant::nice, Variant::imp};
  double epochs = 50.0;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  double target_gap = 1e-10;
  std::filesystem::path out_dir = "out";
  std::optional<std::uint64_t> shuffle_seed;
  std::uint64_t data_seed = 1;
  std::size_t log_every = 0;  // 0: solver default cadence
  bool stop_at_gap = false;   // end each run at its first checkpoint <= target_gap
  std::size_t jobs = 0;       // 0: hardware concurrency

  /// Throws dfsdca::Error on invalid fields.
  void validate() const;
  std::string to_json() const;
  static ExperimentConfig from_json(std::string_view text);
};

/// Resolves a data source string. Synthetic sources use their own seed field,
/// falling back to `data_seed`.
Dataset load_dataset(std::string_view source, std::uint64_t data_seed = 1);
std::string dataset_label(std::string_view source);

struct RatioCell {
  std::size_t tau = 0;
  Variant variant = Variant::imp;
  double theta_variant = 0.0;
  double theta_nice = 0.0;
  double theoretical_ratio = 0.0;
  std::optional<double> passes_variant;  // median trace first reaching target
  std::optional<double> passes_nice;
  std::optional<double> empirical_ratio;
  bool diverged = false;
};

struct RatioRow {
  std::string dataset;
  std::vector<RatioCell> cells;
};

struct ExperimentResult {
  RatioRow row;
  double lambda = 0.0;
  double p_star = 0.0;
  /// True when some (tau, variant) cell diverged for every seed.
  bool all_seeds_diverged_somewhere = false;
};

/// Runs every (tau, variant, seed) cell, writes traces/, medians/,
/// ratios.csv, ratios.json, runs.json and config.json under out_dir.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// Normalized passes at which a trace of (passes, gap) first reaches
/// `target`, interpolating linearly in log(gap) between checkpoints.
std::optional<double> passes_to_gap(std::span<const double> passes, std::span<const double> gaps,
                                    double target);

struct VerifyConfig {
  std::string data;
  std::vector<std::size_t> taus{1, 2};
  std::vector<Variant> variants{Variant::nice, Variant::imp, Variant::alt, Variant::ubucket};
  std::size_t trials = 100;
  double v_scale = 1.0;  // multiplies every v before the ESO check (falsification probe)
  std::uint64_t seed = 1;
  std::uint64_t data_seed = 1;
};

struct VerifyLine {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct VerifyReport {
  std::vector<VerifyLine> lines;
  bool all_passed() const;
};

VerifyReport verify_mode(const VerifyConfig& config);

struct DatasetSummary {
  std::size_t n = 0;
  std::size_t d = 0;
  std::size_t nnz = 0;
  double sparsity = 0.0;  // nnz / (n d)
  double sigma = 0.0;
};

DatasetSummary dataset_summary(const Dataset& data);

}  // namespace dfsdca
