#include "dfsdca/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "dfsdca/eso.hpp"
#include "dfsdca/error.hpp"
#include "dfsdca/libsvm.hpp"
#include "dfsdca/oracle.hpp"
#include "dfsdca/sampling.hpp"
#include "dfsdca/solver.hpp"
#include "dfsdca/synthetic.hpp"
#include "format.hpp"

namespace dfsdca {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.emplace_back(s.substr(start, pos == std::string_view::npos ? s.npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::optional<SyntheticSpec> parse_synthetic(std::string_view source, std::uint64_t data_seed) {
  constexpr std::string_view prefix = "synthetic:";
  if (source.substr(0, prefix.size()) != prefix) return std::nullopt;
  const auto parts = split(source.substr(prefix.size()), ':');
  if (parts.size() != 4 && parts.size() != 5)
    throw Error("synthetic source must be synthetic:<dist>:<n>:<d>:<omega>[:<seed>]");
  SyntheticSpec spec;
  try {
    spec.dist = parse_norm_distribution(parts[0]);
    spec.n = std::stoull(parts[1]);
    spec.d = std::stoull(parts[2]);
    spec.omega = std::stod(parts[3]);
    spec.seed = parts.size() == 5 ? std::stoull(parts[4]) : data_seed;
  } catch (const std::logic_error&) {
    throw Error("malformed synthetic source '" + std::string(source) + "'");
  }
  return spec;
}

struct CellSetup {
  std::size_t tau = 0;
  Variant variant = Variant::nice;
  SamplingSpec sampling;
  EsoBundle bundle;
  std::string plan_json;
};

struct RunOutcome {
  std::vector<TracePoint> trace;
  bool diverged = false;
  std::string message;
  std::size_t iterations = 0;
  double consistency_drift = 0.0;
};

CellSetup make_setup(const Dataset& data, const LambdaGamma& lg, std::size_t tau, Variant variant,
                     const std::optional<std::uint64_t>& shuffle_seed) {
  CellSetup s;
  s.tau = tau;
  s.variant = variant;
  if (variant == Variant::nice) {
    s.sampling = SamplingSpec::tau_nice(tau);
    s.bundle = tau_nice_bundle(data, tau, lg);
    s.plan_json = "null";
    return s;
  }
  const auto partition = make_partition(data.n(), tau, shuffle_seed);
  PlanAndBundle pb = [&] {
    switch (variant) {
      case Variant::imp: return practical_importance_plan(data, partition, lg);
      case Variant::alt: return alternating_optimization_plan(data, partition, lg);
      default: return uniform_bucket_bundle(data, partition, lg);
    }
  }();
  auto plan = std::make_shared<const BucketPlan>(std::move(pb.plan));
  s.plan_json = plan->to_json();
  s.sampling = SamplingSpec::bucket(std::move(plan));
  s.bundle = std::move(pb.bundle);
  return s;
}

std::string trace_name(const std::string& label, const CellSetup& s, std::uint64_t seed) {
  return label + "_" + to_string(s.variant) + "_tau" + std::to_string(s.tau) + "_seed" +
         std::to_string(seed) + ".csv";
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t m = values.size() / 2;
  return values.size() % 2 ? values[m] : 0.5 * (values[m - 1] + values[m]);
}

struct MedianTrace {
  std::vector<double> passes;
  std::vector<double> gaps;
};

// Median over seeds of each run's best gap so far. Seeds share the checkpoint
// grid; a run that stopped early carries its last value forward.
MedianTrace median_trace(const std::vector<const RunOutcome*>& runs) {
  MedianTrace m;
  std::size_t longest = 0;
  const RunOutcome* ref = nullptr;
  std::vector<std::vector<double>> best(runs.size());
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const auto& trace = runs[r]->trace;
    if (trace.size() > longest) {
      longest = trace.size();
      ref = runs[r];
    }
    double low = std::numeric_limits<double>::infinity();
    for (const auto& pt : trace) best[r].push_back(low = std::min(low, pt.gap));
  }
  for (std::size_t k = 0; k < longest; ++k) {
    std::vector<double> gaps;
    for (const auto& b : best) gaps.push_back(b[std::min(k, b.size() - 1)]);
    m.passes.push_back(ref->trace[k].effective_passes);
    m.gaps.push_back(median(std::move(gaps)));
  }
  return m;
}

std::string optional_number(const std::optional<double>& v) {
  return v ? detail::format_double(*v) : std::string();
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

Variant parse_variant(std::string_view name) {
  if (name == "nice") return Variant::nice;
  if (name == "imp") return Variant::imp;
  if (name == "alt") return Variant::alt;
  if (name == "ubucket") return Variant::ubucket;
  throw Error("unknown variant '" + std::string(name) + "' (nice, imp, alt, ubucket)");
}

std::string to_string(Variant variant) {
  switch (variant) {
    case Variant::nice: return "nice";
    case Variant::imp: return "imp";
    case Variant::alt: return "alt";
    case Variant::ubucket: return "ubucket";
  }
  return "unknown";
}

void ExperimentConfig::validate() const {
  if (data.empty()) throw Error("config: data source is required");
  if (taus.empty()) throw Error("config: tau list is empty");
  for (auto t : taus)
    if (t == 0) throw Error("config: tau must be positive");
  if (variants.empty()) throw Error("config: variant list is empty");
  if (seeds.empty()) throw Error("config: seed list is empty");
  if (!(target_gap > 0.0)) throw Error("config: target gap must be positive");
  if (!(epochs > 0.0)) throw Error("config: epochs must be positive");
  if (lambda && !(*lambda > 0.0)) throw Error("config: lambda must be positive");
}

std::string ExperimentConfig::to_json() const {
  json j;
  j["data"] = data;
  j["data_seed"] = data_seed;
  j["loss"] = to_string(loss);
  j["lambda"] = lambda ? json(*lambda) : json(nullptr);
  j["taus"] = taus;
  std::vector<std::string> names;
  for (auto v : variants) names.push_back(to_string(v));
  j["variants"] = names;
  j["epochs"] = epochs;
  j["seeds"] = seeds;
  j["gap"] = target_gap;
  j["shuffle_seed"] = shuffle_seed ? json(*shuffle_seed) : json(nullptr);
  j["log_every"] = log_every;
  j["stop_at_gap"] = stop_at_gap;
  return j.dump(2) + "\n";
}

ExperimentConfig ExperimentConfig::from_json(std::string_view text) {
  ExperimentConfig c;
  try {
    const auto j = json::parse(text);
    if (!j.is_object()) throw Error("config: top level must be an object");
    for (const auto& [key, value] : j.items()) {
      if (key == "data") c.data = value.get<std::string>();
      else if (key == "data_seed") c.data_seed = value.get<std::uint64_t>();
      else if (key == "loss") c.loss = parse_loss_kind(value.get<std::string>());
      else if (key == "lambda") {
        if (!value.is_null()) c.lambda = value.get<double>();
      } else if (key == "taus") c.taus = value.get<std::vector<std::size_t>>();
      else if (key == "variants") {
        c.variants.clear();
        for (const auto& v : value) c.variants.push_back(parse_variant(v.get<std::string>()));
      } else if (key == "epochs") c.epochs = value.get<double>();
      else if (key == "seeds") {
        if (value.is_number_integer()) {
          c.seeds.clear();
          for (std::uint64_t s = 1; s <= value.get<std::uint64_t>(); ++s) c.seeds.push_back(s);
        } else {
          c.seeds = value.get<std::vector<std::uint64_t>>();
        }
      } else if (key == "gap" || key == "target_gap") c.target_gap = value.get<double>();
      else if (key == "out") c.out_dir = value.get<std::string>();
      else if (key == "shuffle_seed") {
        if (!value.is_null()) c.shuffle_seed = value.get<std::uint64_t>();
      } else if (key == "log_every") c.log_every = value.get<std::size_t>();
      else if (key == "stop_at_gap") c.stop_at_gap = value.get<bool>();
      else if (key == "jobs") c.jobs = value.get<std::size_t>();
      else throw Error("config: unknown field '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw Error(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

Dataset load_dataset(std::string_view source, std::uint64_t data_seed) {
  if (auto spec = parse_synthetic(source, data_seed)) return generate_synthetic(*spec);
  return load_libsvm(fs::path(std::string(source)));
}

std::string dataset_label(std::string_view source) {
  if (auto spec = parse_synthetic(source, 0)) {
    std::ostringstream os;
    os << to_string(spec->dist) << "_n" << spec->n << "_d" << spec->d << "_w"
       << detail::format_double(spec->omega);
    return os.str();
  }
  return fs::path(std::string(source)).stem().string();
}

std::optional<double> passes_to_gap(std::span<const double> passes, std::span<const double> gaps,
                                    double target) {
  for (std::size_t k = 0; k < gaps.size() && k < passes.size(); ++k) {
    if (!(gaps[k] <= target)) continue;
    if (k == 0) return passes[0];
    const double a = std::log(gaps[k - 1]), b = std::log(gaps[k]), t = std::log(target);
    const double frac = a == b ? 1.0 : (a - t) / (a - b);
    return passes[k - 1] + frac * (passes[k] - passes[k - 1]);
  }
  return std::nullopt;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  const Dataset data = load_dataset(config.data, config.data_seed);
  const std::string label = dataset_label(config.data);
  const LossModel loss(config.loss);
  loss.validate_labels(data.labels());
  const double lambda = config.lambda.value_or(default_lambda(data));
  const LambdaGamma lg(lambda, loss.gamma());
  for (auto t : config.taus)
    if (t > data.n()) throw Error("config: tau " + std::to_string(t) + " exceeds n");

  const auto ref = reference_solution(data, loss, lambda);

  std::vector<Variant> variants{Variant::nice};
  for (auto v : config.variants)
    if (std::find(variants.begin(), variants.end(), v) == variants.end()) variants.push_back(v);

  std::vector<CellSetup> setups;
  for (auto tau : config.taus)
    for (auto v : variants) setups.push_back(make_setup(data, lg, tau, v, config.shuffle_seed));

  const fs::path out = config.out_dir;
  fs::create_directories(out / "traces");
  fs::create_directories(out / "medians");

  struct Job {
    std::size_t setup;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t s = 0; s < setups.size(); ++s)
    for (auto seed : config.seeds) jobs.push_back({s, seed});
  std::vector<RunOutcome> outcomes(jobs.size());

  SolveOptions options;
  options.epochs = config.epochs;
  options.log_every = config.log_every;
  options.reference = &ref;
  if (config.stop_at_gap) options.target_gap = config.target_gap;

  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr failure;
  const auto worker = [&] {
    for (std::size_t k = next++; k < jobs.size(); k = next++) {
      try {
        const auto& setup = setups[jobs[k].setup];
        SamplingSpec sampling = setup.sampling;
        sampling.seed = jobs[k].seed;
        auto& outcome = outcomes[k];
        try {
          auto state = solve(data, loss, lambda, sampling, setup.bundle, options);
          outcome.iterations = state.t;
          outcome.consistency_drift = state.max_consistency_drift;
          outcome.trace = std::move(state.trace);
        } catch (const DivergenceError& e) {
          outcome.diverged = true;
          outcome.message = e.what();
        }
        std::ostringstream csv;
        write_trace_csv(csv, outcome.trace);
        write_file(out / "traces" / trace_name(label, setup, jobs[k].seed), csv.str());
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::size_t threads = config.jobs ? config.jobs : std::thread::hardware_concurrency();
  threads = std::clamp<std::size_t>(threads, 1, jobs.size());
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  ExperimentResult result;
  result.lambda = lambda;
  result.p_star = ref.p_star;
  result.row.dataset = label;

  // Median trace per setup.
  std::vector<std::optional<MedianTrace>> medians(setups.size());
  std::vector<bool> all_diverged(setups.size(), true);
  for (std::size_t s = 0; s < setups.size(); ++s) {
    std::vector<const RunOutcome*> ok;
    for (std::size_t k = 0; k < jobs.size(); ++k)
      if (jobs[k].setup == s && !outcomes[k].diverged) ok.push_back(&outcomes[k]);
    if (ok.empty()) continue;
    all_diverged[s] = false;
    medians[s] = median_trace(ok);
    std::ostringstream csv;
    csv << "effective_passes,gap\n";
    for (std::size_t k = 0; k < medians[s]->passes.size(); ++k)
      csv << detail::format_double(medians[s]->passes[k]) << ','
          << detail::format_double(medians[s]->gaps[k]) << '\n';
    write_file(out / "medians" /
                   (label + "_" + to_string(setups[s].variant) + "_tau" +
                    std::to_string(setups[s].tau) + ".csv"),
               csv.str());
  }
  result.all_seeds_diverged_somewhere =
      std::find(all_diverged.begin(), all_diverged.end(), true) != all_diverged.end();

  const auto passes_of = [&](std::size_t s) -> std::optional<double> {
    if (!medians[s]) return std::nullopt;
    return passes_to_gap(medians[s]->passes, medians[s]->gaps, config.target_gap);
  };

  for (std::size_t s = 0; s < setups.size(); ++s) {
    if (setups[s].variant == Variant::nice) continue;
    std::size_t base = 0;
    while (!(setups[base].tau == setups[s].tau && setups[base].variant == Variant::nice)) ++base;
    RatioCell cell;
    cell.tau = setups[s].tau;
    cell.variant = setups[s].variant;
    cell.theta_variant = setups[s].bundle.theta;
    cell.theta_nice = setups[base].bundle.theta;
    cell.theoretical_ratio = cell.theta_variant / cell.theta_nice;
    cell.passes_variant = passes_of(s);
    cell.passes_nice = passes_of(base);
    cell.diverged = all_diverged[s] || all_diverged[base];
    if (cell.passes_variant && cell.passes_nice && *cell.passes_variant > 0.0)
      cell.empirical_ratio = *cell.passes_nice / *cell.passes_variant;
    result.row.cells.push_back(cell);
  }

  std::ostringstream csv;
  csv << "dataset,tau,variant,theoretical_ratio,empirical_ratio,theta_variant,theta_nice,"
         "passes_variant,passes_nice,diverged\n";
  json rows = json::array();
  for (const auto& c : result.row.cells) {
    csv << label << ',' << c.tau << ',' << to_string(c.variant) << ','
        << detail::format_double(c.theoretical_ratio) << ',' << optional_number(c.empirical_ratio)
        << ',' << detail::format_double(c.theta_variant) << ','
        << detail::format_double(c.theta_nice) << ',' << optional_number(c.passes_variant) << ','
        << optional_number(c.passes_nice) << ',' << (c.diverged ? 1 : 0) << '\n';
    rows.push_back({{"tau", c.tau},
                    {"variant", to_string(c.variant)},
                    {"theoretical_ratio", c.theoretical_ratio},
                    {"empirical_ratio", optional_json(c.empirical_ratio)},
                    {"theta_variant", c.theta_variant},
                    {"theta_nice", c.theta_nice},
                    {"passes_variant", optional_json(c.passes_variant)},
                    {"passes_nice", optional_json(c.passes_nice)},
                    {"diverged", c.diverged}});
  }
  write_file(out / "ratios.csv", csv.str());
  write_file(out / "ratios.json",
             json{{"dataset", label}, {"target_gap", config.target_gap}, {"cells", rows}}.dump(2) +
                 "\n");

  json runs = json::array();
  for (std::size_t k = 0; k < jobs.size(); ++k) {
    const auto& setup = setups[jobs[k].setup];
    const auto& o = outcomes[k];
    json r{{"trace", "traces/" + trace_name(label, setup, jobs[k].seed)},
           {"seed", jobs[k].seed},
           {"tau", setup.tau},
           {"variant", to_string(setup.variant)},
           {"sampling", to_string(setup.sampling.kind)},
           {"theta", setup.bundle.theta},
           {"lambda", lambda},
           {"gamma", loss.gamma()},
           {"loss", to_string(config.loss)},
           {"dataset", label},
           {"dataset_digest", detail::hex64(data.digest())},
           {"p_star", ref.p_star},
           {"gap_floor", kGapFloor},
           {"eso", json::parse(setup.bundle.to_json())},
           {"plan", json::parse(setup.plan_json)},
           {"iterations", o.iterations},
           {"consistency_drift", o.consistency_drift},
           {"diverged", o.diverged}};
    if (o.diverged) r["error"] = o.message;
    if (!o.trace.empty()) r["final_gap"] = o.trace.back().gap;
    runs.push_back(std::move(r));
  }
  write_file(out / "runs.json", runs.dump(2) + "\n");
  write_file(out / "config.json", config.to_json());
  return result;
}

bool VerifyReport::all_passed() const {
  return std::all_of(lines.begin(), lines.end(), [](const auto& l) { return l.passed; });
}

VerifyReport verify_mode(const VerifyConfig& config) {
  const Dataset data = load_dataset(config.data, config.data_seed);
  const LossModel loss(LossKind::logistic);
  const LambdaGamma lg(default_lambda(data), loss.gamma());
  Rng rng(config.seed);
  VerifyReport report;

  const auto add = [&](std::string name, bool ok, std::string detail) {
    report.lines.push_back({std::move(name), ok, std::move(detail)});
  };
  const auto eso_line = [&](const std::string& name, const oracle::EnumeratedSampling& sampling,
                            std::vector<double> v) {
    for (auto& e : v) e *= config.v_scale;
    const auto r = oracle::check_eso(data.matrix(), sampling, v, config.trials, rng);
    std::ostringstream os;
    os << "checks=" << r.checks << " violations=" << r.violations
       << " max_rel_violation=" << detail::format_double(r.max_violation)
       << " tightness=" << detail::format_double(r.min_slack_ratio);
    add(name, r.passed(), os.str());
  };

  for (auto tau : config.taus) {
    if (tau == 0 || tau > data.n()) throw Error("verify: tau must be in [1, n]");
    const auto partition = make_partition(data.n(), tau);
    const std::string suffix = " (tau=" + std::to_string(tau) + ")";

    std::vector<std::pair<std::string, BucketPlan>> plans;
    plans.emplace_back("uniform-bucket", BucketPlan::uniform(partition));
    plans.emplace_back("imp", practical_importance_plan(data, partition, lg).plan);
    for (const auto& [name, plan] : plans) {
      double err = 0.0;
      const bool ok1 = oracle::check_lemma1(plan, &err);
      add("probability matrix [" + name + "]" + suffix, ok1,
          "max_abs_error=" + detail::format_double(err));
      if (data.n() <= 32) {
        double e2 = 0.0, e3 = 0.0;
        bool ok2 = true, ok3 = true;
        for (std::size_t j = 0; j < data.d(); ++j) {
          const auto sup = data.feature_index().support(j);
          const std::vector<std::size_t> support(sup.begin(), sup.end());
          oracle::LemmaReport lr;
          oracle::check_lemma2_lemma3(support, plan, &lr);
          e2 = j == 0 ? lr.lemma2_min_eigenvalue : std::min(e2, lr.lemma2_min_eigenvalue);
          e3 = j == 0 ? lr.lemma3_min_eigenvalue : std::min(e3, lr.lemma3_min_eigenvalue);
          ok2 = ok2 && lr.lemma2;
          ok3 = ok3 && lr.lemma3;
        }
        add("block bound P(J) o B >= P(J)/omega' [" + name + "]" + suffix, ok2,
            "min_eigenvalue=" + detail::format_double(e2));
        add("diagonal bound P(J) o pp^T <= delta Diag(P(J o S)) [" + name + "]" + suffix, ok3,
            "min_eigenvalue=" + detail::format_double(e3));
      }
    }

    for (auto variant : config.variants) {
      const std::string name = "ESO inequality [" + to_string(variant) + "]" + suffix;
      switch (variant) {
        case Variant::nice:
          eso_line(name, oracle::enumerate_tau_nice(data.n(), tau), v_tau_nice(data, tau));
          break;
        case Variant::imp: {
          auto pb = practical_importance_plan(data, partition, lg);
          eso_line(name, oracle::enumerate_bucket_sampling(pb.plan), pb.bundle.v);
          break;
        }
        case Variant::alt: {
          auto pb = alternating_optimization_plan(data, partition, lg);
          eso_line(name, oracle::enumerate_bucket_sampling(pb.plan), pb.bundle.v);
          break;
        }
        case Variant::ubucket: {
          auto pb = uniform_bucket_bundle(data, partition, lg);
          eso_line(name, oracle::enumerate_bucket_sampling(pb.plan), pb.bundle.v);
          break;
        }
      }
    }
  }
  return report;
}

DatasetSummary dataset_summary(const Dataset& data) {
  DatasetSummary s;
  s.n = data.n();
  s.d = data.d();
  s.nnz = data.nnz();
  s.sparsity = static_cast<double>(s.nnz) / (static_cast<double>(s.n) * static_cast<double>(s.d));
  s.sigma = sigma(data.squared_norms());
  return s;
}

}  // namespace dfsdca
