#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "dfsdca/eso.hpp"
#include "dfsdca/error.hpp"
#include "dfsdca/experiment.hpp"
#include "dfsdca/libsvm.hpp"
#include "dfsdca/solver.hpp"
#include "test_support.hpp"

using namespace dfsdca;
namespace fs = std::filesystem;

namespace {

const std::string kTiny = std::string(DFSDCA_TEST_DATA_DIR) + "/tiny.svm";

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("dfsdca_harness_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path());
  return out;
}

std::vector<std::pair<double, double>> read_csv2(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  std::vector<std::pair<double, double>> rows;
  while (std::getline(in, line)) {
    const auto c = line.find(',');
    rows.emplace_back(std::stod(line.substr(0, c)), std::stod(line.substr(c + 1)));
  }
  return rows;
}

}  // namespace

TEST_CASE("variant names") {
  for (auto v : {Variant::nice, Variant::imp, Variant::alt, Variant::ubucket})
    CHECK(parse_variant(to_string(v)) == v);
  CHECK_THROWS_AS(parse_variant("fancy"), Error);
}

TEST_CASE("config JSON round trip and validation") {
  ExperimentConfig c;
  c.data = "synthetic:extreme:100:10:0.5:3";
  c.loss = LossKind::square;
  c.lambda = 0.25;
  c.taus = {1, 4};
  c.variants = {Variant::imp, Variant::alt};
  c.epochs = 7.5;
  c.seeds = {3, 9};
  c.target_gap = 1e-8;
  c.shuffle_seed = 17;
  c.log_every = 4;
  c.stop_at_gap = true;
  const auto back = ExperimentConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  CHECK(back.lambda == 0.25);
  CHECK(back.shuffle_seed == std::optional<std::uint64_t>(17));

  const auto counted = ExperimentConfig::from_json(R"({"data":"x.svm","seeds":3,"target_gap":1e-6})");
  CHECK(counted.seeds == std::vector<std::uint64_t>{1, 2, 3});
  CHECK(counted.target_gap == 1e-6);
  CHECK(counted.taus == std::vector<std::size_t>{1, 2, 4, 8, 16, 32});

  CHECK_THROWS_AS(ExperimentConfig::from_json(R"({"data":"x","colour":1})"), Error);
  CHECK_THROWS_AS(ExperimentConfig::from_json(R"({"data":"x","taus":[]})"), Error);
  CHECK_THROWS_AS(ExperimentConfig::from_json(R"({"data":"x","taus":[0]})"), Error);
  CHECK_THROWS_AS(ExperimentConfig::from_json(R"({"data":"x","gap":0})"), Error);
  CHECK_THROWS_AS(ExperimentConfig::from_json(R"({"data":"x","seeds":[]})"), Error);
  CHECK_THROWS_AS(ExperimentConfig::from_json(R"({"data":"x","seeds":0})"), Error);
  CHECK_THROWS_AS(ExperimentConfig::from_json(R"({"data":""})"), Error);
  CHECK_THROWS_AS(ExperimentConfig::from_json("{not json"), Error);
}

TEST_CASE("data sources") {
  const auto a = load_dataset("synthetic:chisq10:200:15:0.3:4");
  CHECK(a.n() == 200);
  CHECK(a.digest() == load_dataset("synthetic:chisq10:200:15:0.3", 4).digest());
  CHECK(a.digest() != load_dataset("synthetic:chisq10:200:15:0.3", 5).digest());
  CHECK(dataset_label("synthetic:chisq10:200:15:0.3:4") == "chisq10_n200_d15_w0.3");
  CHECK(dataset_label("/some/where/w8a.svm") == "w8a");
  CHECK(load_dataset(kTiny).n() == 8);
  CHECK_THROWS_AS(load_dataset("synthetic:gamma:10:2:0.5"), Error);
  CHECK_THROWS_AS(load_dataset("synthetic:uniform:10:2"), Error);
  CHECK_THROWS_AS(load_dataset("/nonexistent/file.svm"), Error);
}

TEST_CASE("dataset summary") {
  const auto s = dataset_summary(load_dataset(kTiny));
  CHECK(s.n == 8);
  CHECK(s.d == 4);
  CHECK(s.nnz == 19);
  CHECK(s.sparsity == doctest::Approx(19.0 / 32.0));
  CHECK(s.sparsity > 0.0);
  CHECK(s.sparsity <= 1.0);
  CHECK(s.sigma >= 1.0);
  const auto ext = dataset_summary(load_dataset("synthetic:extreme:50000:3:0.5:1"));
  CHECK(std::abs(ext.sigma - 980.4) <= 0.05);
}

TEST_CASE("passes_to_gap interpolates in log gap") {
  const std::vector<double> passes{0.0, 1.0, 2.0, 3.0};
  const std::vector<double> gaps{1.0, 1e-4, 1e-8, 1e-12};
  CHECK(passes_to_gap(passes, gaps, 1e-10).value() == doctest::Approx(2.5));
  CHECK(passes_to_gap(passes, gaps, 1e-4).value() == doctest::Approx(1.0));
  CHECK(passes_to_gap(passes, gaps, 2.0).value() == 0.0);
  CHECK_FALSE(passes_to_gap(passes, gaps, 1e-13).has_value());
  const std::vector<double> flat{1.0, 1e-16, 1e-16, 1e-16};
  CHECK(passes_to_gap(passes, flat, 1e-10).value() == doctest::Approx(1.0 - 6.0 / 16.0));
}

TEST_CASE("identical columns give unit ratios") {
  std::vector<double> x;
  std::vector<double> y;
  for (int i = 0; i < 400; ++i) {
    x.insert(x.end(), {0.8, -0.4, 1.1});
    y.push_back(i % 3 ? 1.0 : -1.0);
  }
  const auto out = scratch("identical");
  fs::create_directories(out);
  {
    std::ofstream f(out / "same.svm");
    write_libsvm(f, testing::dataset_from_dense(3, 400, x, y));
  }
  ExperimentConfig c;
  c.data = (out / "same.svm").string();
  c.taus = {1, 4};
  c.variants = {Variant::imp, Variant::ubucket};
  c.epochs = 100;
  c.seeds.clear();
  for (std::uint64_t s = 1; s <= 51; ++s) c.seeds.push_back(s);
  c.stop_at_gap = true;
  c.target_gap = 1e-10;
  c.out_dir = out / "run";
  const auto r = run_experiment(c);
  CHECK(r.row.cells.size() == 4);
  for (const auto& cell : r.row.cells) {
    CHECK(cell.theoretical_ratio == doctest::Approx(1.0).epsilon(1e-12));
    REQUIRE(cell.empirical_ratio.has_value());
    CHECK(std::abs(*cell.empirical_ratio - 1.0) <= 0.05);
  }
  fs::remove_all(out);
}

TEST_CASE("experiment outputs, ratios and determinism") {
  const auto out = scratch("extreme");
  ExperimentConfig c;
  c.data = "synthetic:extreme:300:12:0.8:2";
  c.taus = {1, 2, 4, 8};
  c.variants = {Variant::imp};
  c.epochs = 2000;
  c.seeds = {1, 2, 3};
  c.stop_at_gap = true;
  c.out_dir = out / "a";
  const auto r = run_experiment(c);

  const auto data = load_dataset(c.data);
  const double lambda = default_lambda(data);
  CHECK(r.lambda == lambda);
  const LambdaGamma lg(lambda, 4.0);
  const double n = static_cast<double>(data.n());
  double maxL = 0.0, sumL = 0.0;
  for (double l : data.squared_norms()) {
    maxL = std::max(maxL, l);
    sumL += l;
  }
  const double serial = (n + maxL / lg.product()) / (n + sumL / (n * lg.product()));

  double prev = 0.0;
  REQUIRE(r.row.cells.size() == 4);
  for (const auto& cell : r.row.cells) {
    if (cell.tau == 1) CHECK(std::abs(cell.theoretical_ratio - serial) <= 1e-12 * serial);
    CHECK(cell.theoretical_ratio >= prev);
    prev = cell.theoretical_ratio;
    REQUIRE(cell.empirical_ratio.has_value());
    CHECK(*cell.empirical_ratio >= 1.0);
    CHECK_FALSE(cell.diverged);
    // recomputed from the ESO bundles
    const auto nice = tau_nice_bundle(data, cell.tau, lg);
    const auto imp = practical_importance_plan(data, make_partition(data.n(), cell.tau), lg);
    CHECK(std::abs(cell.theoretical_ratio - imp.bundle.theta / nice.theta) <= 1e-12 * cell.theoretical_ratio);

    for (const char* v : {"nice", "imp"}) {
      const auto med = read_csv2(out / "a" / "medians" /
                                 ("extreme_n300_d12_w0.8_" + std::string(v) + "_tau" +
                                  std::to_string(cell.tau) + ".csv"));
      for (std::size_t k = 1; k < med.size(); ++k)
        if (med[k - 1].first >= 1.0) CHECK(med[k].second <= med[k - 1].second);
    }
  }

  CHECK(fs::exists(out / "a" / "traces" / "extreme_n300_d12_w0.8_imp_tau4_seed2.csv"));
  CHECK(fs::exists(out / "a" / "ratios.csv"));
  const auto ratios = nlohmann::json::parse(slurp(out / "a" / "ratios.json"));
  CHECK(ratios["cells"].size() == 4);
  const auto runs = nlohmann::json::parse(slurp(out / "a" / "runs.json"));
  CHECK(runs.size() == 24);
  CHECK(runs[0].contains("dataset_digest"));
  CHECK(runs[0]["gap_floor"] == kGapFloor);
  CHECK(ExperimentConfig::from_json(slurp(out / "a" / "config.json")).to_json() == c.to_json());
  const auto head = slurp(out / "a" / "traces" / "extreme_n300_d12_w0.8_nice_tau1_seed1.csv");
  CHECK(head.rfind("effective_passes,gap,potential\n", 0) == 0);

  c.out_dir = out / "b";
  c.jobs = 1;
  run_experiment(c);
  CHECK(tree(out / "a") == tree(out / "b"));
  fs::remove_all(out);
}

TEST_CASE("verify mode") {
  VerifyConfig c;
  c.data = kTiny;
  c.taus = {1, 2, 3};
  const auto ok = verify_mode(c);
  CHECK(ok.all_passed());
  std::size_t eso_lines = 0, lemma2 = 0;
  for (const auto& l : ok.lines) {
    eso_lines += l.name.rfind("ESO inequality", 0) == 0;
    lemma2 += l.name.rfind("block bound", 0) == 0;
  }
  CHECK(eso_lines == 12);
  CHECK(lemma2 == 6);

  c.v_scale = 0.5;
  c.taus = {2};
  const auto bad = verify_mode(c);
  CHECK_FALSE(bad.all_passed());
  bool named = false;
  for (const auto& l : bad.lines)
    if (!l.passed) named = named || l.name.find("ESO inequality") != std::string::npos;
  CHECK(named);

  c.v_scale = 1.0;
  c.taus = {1};
  const auto one = verify_mode(c);
  CHECK(one.all_passed());
  for (const auto& l : one.lines)
    if (l.name.rfind("block bound", 0) == 0) CHECK(l.detail.find("min_eigenvalue=") != std::string::npos);

  c.taus = {9};
  CHECK_THROWS_AS(verify_mode(c), Error);
}
