#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dfsdca/error.hpp"
#include "dfsdca/experiment.hpp"

namespace {

enum Exit { ok = 0, usage = 1, verification = 2, divergence = 3 };

std::vector<dfsdca::Variant> parse_variants(const std::vector<std::string>& names) {
  std::vector<dfsdca::Variant> out;
  for (const auto& n : names) out.push_back(dfsdca::parse_variant(n));
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw dfsdca::Error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dfSDCA with bucket and importance minibatch sampling"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "run the tau-nice vs importance experiment grid");
  std::string config_path, data, loss = "logistic", out = "out";
  std::vector<std::size_t> taus;
  std::vector<std::string> variants;
  double epochs = 50, gap = 1e-10, lambda = 0;
  std::size_t seeds = 5, log_every = 0, jobs = 0;
  std::uint64_t shuffle_seed = 0, data_seed = 1;
  bool stop_at_gap = false;
  run->add_option("--config", config_path, "experiment config JSON")->check(CLI::ExistingFile);
  auto* o_data = run->add_option("--data", data, "LibSVM path or synthetic:<dist>:<n>:<d>:<omega>[:<seed>]");
  auto* o_loss = run->add_option("--loss", loss, "logistic | square");
  auto* o_lambda = run->add_option("--lambda", lambda, "regularizer (default max_i ||x_i|| / n)");
  auto* o_taus = run->add_option("--taus", taus, "minibatch sizes")->delimiter(',');
  auto* o_variants = run->add_option("--variants", variants, "nice,imp,alt,ubucket")->delimiter(',');
  auto* o_epochs = run->add_option("--epochs", epochs, "passes over the data per run");
  auto* o_seeds = run->add_option("--seeds", seeds, "number of seeds (1..k)");
  auto* o_gap = run->add_option("--gap", gap, "target optimality gap");
  auto* o_out = run->add_option("--out", out, "output directory");
  auto* o_shuffle = run->add_option("--shuffle-seed", shuffle_seed, "shuffle examples before bucketing");
  auto* o_data_seed = run->add_option("--data-seed", data_seed, "seed for synthetic data without one");
  auto* o_log = run->add_option("--log-every", log_every, "checkpoint cadence in iterations");
  auto* o_stop = run->add_flag("--stop-at-gap", stop_at_gap, "end each run once it reaches the target gap");
  auto* o_jobs = run->add_option("--jobs", jobs, "worker threads (0: all cores)");

  // verify
  auto* verify = app.add_subcommand("verify", "exact ESO and lemma checks on a desk-scale instance");
  dfsdca::VerifyConfig vc;
  std::vector<std::string> verify_variants;
  verify->add_option("--data", vc.data, "LibSVM path or synthetic spec")->required();
  verify->add_option("--tau", vc.taus, "minibatch sizes")->delimiter(',');
  verify->add_option("--variants", verify_variants, "nice,imp,alt,ubucket")->delimiter(',');
  verify->add_option("--v-scale", vc.v_scale, "multiply every v before checking");
  verify->add_option("--trials", vc.trials, "random directions per check");
  verify->add_option("--seed", vc.seed, "seed for the random directions");
  verify->add_option("--data-seed", vc.data_seed, "seed for synthetic data without one");

  // summary
  auto* summary = app.add_subcommand("summary", "n, d, sparsity and sigma of a dataset");
  std::string summary_data;
  std::uint64_t summary_seed = 1;
  summary->add_option("--data", summary_data, "LibSVM path or synthetic spec")->required();
  summary->add_option("--data-seed", summary_seed, "seed for synthetic data without one");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? Exit::ok : Exit::usage;
  }

  try {
    if (*run) {
      dfsdca::ExperimentConfig c;
      if (!config_path.empty()) c = dfsdca::ExperimentConfig::from_json(read_file(config_path));
      if (o_data->count()) c.data = data;
      if (o_loss->count()) c.loss = dfsdca::parse_loss_kind(loss);
      if (o_lambda->count()) c.lambda = lambda;
      if (o_taus->count()) c.taus = taus;
      if (o_variants->count()) c.variants = parse_variants(variants);
      if (o_epochs->count()) c.epochs = epochs;
      if (o_seeds->count()) {
        c.seeds.clear();
        for (std::uint64_t s = 1; s <= seeds; ++s) c.seeds.push_back(s);
      }
      if (o_gap->count()) c.target_gap = gap;
      if (o_out->count() || config_path.empty()) c.out_dir = out;
      if (o_shuffle->count()) c.shuffle_seed = shuffle_seed;
      if (o_data_seed->count()) c.data_seed = data_seed;
      if (o_log->count()) c.log_every = log_every;
      if (o_stop->count()) c.stop_at_gap = stop_at_gap;
      if (o_jobs->count()) c.jobs = jobs;
      c.validate();

      const auto result = dfsdca::run_experiment(c);
      std::cout << "dataset " << result.row.dataset << "  lambda " << fmt(result.lambda)
                << "  P* " << fmt(result.p_star) << "\n";
      std::cout << "tau  variant   theoretical  empirical\n";
      for (const auto& cell : result.row.cells) {
        std::string emp = cell.diverged ? "diverged" : cell.empirical_ratio ? fmt(*cell.empirical_ratio) : "-";
        std::printf("%-4zu %-9s %-12s %s\n", cell.tau, dfsdca::to_string(cell.variant).c_str(),
                    fmt(cell.theoretical_ratio).c_str(), emp.c_str());
      }
      std::cout << "wrote " << c.out_dir.string() << "\n";
      return result.all_seeds_diverged_somewhere ? Exit::divergence : Exit::ok;
    }
    if (*verify) {
      if (!verify_variants.empty()) vc.variants = parse_variants(verify_variants);
      const auto report = dfsdca::verify_mode(vc);
      for (const auto& line : report.lines)
        std::cout << (line.passed ? "PASS " : "FAIL ") << line.name << "  " << line.detail << "\n";
      return report.all_passed() ? Exit::ok : Exit::verification;
    }
    if (*summary) {
      const auto s = dfsdca::dataset_summary(dfsdca::load_dataset(summary_data, summary_seed));
      std::cout << "dataset,n,d,nnz,sparsity,sigma\n"
                << dfsdca::dataset_label(summary_data) << ',' << s.n << ',' << s.d << ',' << s.nnz
                << ',' << fmt(s.sparsity) << ',' << fmt(s.sigma) << "\n";
      return Exit::ok;
    }
  } catch (const dfsdca::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return Exit::usage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return Exit::usage;
  }
  return Exit::usage;
}
