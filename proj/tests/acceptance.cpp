// Acceptance runner. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "property_suites.hpp"
#include "tcm/tcm.hpp"

#ifndef TCM_CLI_PATH
#error "TCM_CLI_PATH must name the tcm executable"
#endif

namespace fs = std::filesystem;
using namespace tcm;

namespace {

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
  std::cout << (ok ? "[PASS] " : "[FAIL] ") << id << " " << name << ": " << detail << std::endl;
  if (!ok) ++failures;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::vector<std::size_t> all_items(const Workbench& wb) {
  std::vector<std::size_t> v(wb.labeled.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = i;
  return v;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Relative path -> contents for every regular file below `root`.
std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path());
  }
  return out;
}

void determinism(int id) {
  const fs::path root = fs::temp_directory_path() / ("tcm_accept_" + std::to_string(::getpid()));
  fs::remove_all(root);
  fs::create_directories(root);
  const fs::path config = root / "config.json";
  std::ofstream(config) << R"({"synth": {"height": 128, "width": 128, "footprints": 30, "layers": 4},
 "k_grid": [8, 16], "r_grid": [3, 6], "n_random": 80, "repeats": 5, "seed": 42})";

  std::vector<std::string> commands{"generate", "calibrate", "detect", "evaluate"};
  std::map<int, std::map<std::string, std::string>> outputs;
  std::string problem;
  for (int workers : {1, 4, 8}) {
    const fs::path base = root / ("w" + std::to_string(workers));
    for (const auto& cmd : commands) {
      std::string line = std::string("\"") + TCM_CLI_PATH + "\" " + cmd + " --config \"" + config.string() +
                         "\" --workers " + std::to_string(workers) + " --out \"" + (base / cmd).string() + "\"";
      if (cmd != "generate") line += " --data \"" + (root / "w1" / "generate").string() + "\"";
      if (cmd == "evaluate") line += " --method all";
      line += " 2>/dev/null";
      if (std::system(line.c_str()) != 0 && problem.empty()) problem = cmd + " failed at workers=" + std::to_string(workers);
    }
    outputs[workers] = tree(base);
  }
  std::size_t files = outputs[1].size();
  for (int w : {4, 8}) {
    if (outputs[w] != outputs[1] && problem.empty()) problem = "outputs differ at workers=" + std::to_string(w);
  }
  fs::remove_all(root);
  report(id, "CLI determinism across workers 1/4/8", problem.empty() && files > 0,
         problem.empty() ? std::to_string(files) + " files identical for generate/calibrate/detect/evaluate" : problem);
}

}  // namespace

int main() {
  const int workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));

  const SynthConfig scfg;  // default: 256x256x3, 5 layers, 200 footprints, colour shift on, seed 42
  const auto synth = generate(scfg);
  const Dataset& ds = synth.dataset;

  CalibrationOptions copt;
  copt.k_grid = {16, 32, 64};
  copt.r_grid = {3.0, 6.0, 12.0};
  copt.n_random = 1000;
  copt.seed = scfg.seed;
  copt.workers = workers;
  LrOptions lopt;
  lopt.seed = scfg.seed;

  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<Method> kl_only{Method::tcm_semi};
  Workbench wb = make_workbench(ds, copt, lopt, kl_only);
  const FittedModel semi = fit_method(wb, Method::tcm_semi, all_items(wb));
  const EvalResult semi_eval = score_all(wb, semi);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  report(1, "semi-supervised TCM on default synthetic data",
         semi_eval.accuracy >= 0.90 && semi_eval.mae_index <= 0.15 && secs <= 300.0,
         "ACC=" + fmt(semi_eval.accuracy) + " index-MAE=" + fmt(semi_eval.mae_index) + " (k=" +
             std::to_string(semi.k) + " r=" + fmt(semi.r) + " theta=" + fmt(semi.theta) + ") runtime=" + fmt(secs) +
             "s workers=" + std::to_string(workers));

  // Colour-over-time features are added to the same workbench so the KL grid is reused.
  {
    const double r = *std::min_element(copt.r_grid.begin(), copt.r_grid.end());
    wb.color_time.resize(ds.footprints.size());
    parallel_for(wb.color_time.size(), workers, [&](std::size_t i) {
      wb.color_time[i] = color_over_time_features(extract_chip_stack(ds.scenes, ds.footprints[i], r));
    });
  }
  SplitOptions sopt;
  sopt.repeats = 50;
  sopt.train_fraction = 0.8;
  sopt.seed = scfg.seed;
  sopt.workers = workers;

  const SplitSummary sup = evaluate_method(wb, Method::tcm_supervised, sopt);
  const double gap = std::abs(semi_eval.accuracy - sup.accuracy_mean);
  report(2, "semi-supervised vs supervised TCM", gap <= 0.05,
         "semi=" + fmt(semi_eval.accuracy) + " supervised=" + fmt(sup.accuracy_mean) + "+-" + fmt(sup.accuracy_std) +
             " gap=" + fmt(gap));

  const SplitSummary lr = evaluate_method(wb, Method::tcm_lr, sopt);
  const SplitSummary cot = evaluate_method(wb, Method::color_over_time, sopt);
  report(3, "TCM+LR vs colour-over-time under colour shift", lr.accuracy_mean >= cot.accuracy_mean,
         "tcm_lr=" + fmt(lr.accuracy_mean) + " color_over_time=" + fmt(cot.accuracy_mean));

  {
    std::vector<double> bc, acc;
    double best = 0.0;
    for (const auto& rec : wb.report->records) {
      bc.push_back(rec.bc);
      acc.push_back(rec.accuracy.value_or(0.0));
      best = std::max(best, acc.back());
    }
    const double rho = spearman(bc, acc);
    const double chosen = wb.report->best().accuracy.value_or(0.0);
    report(4, "calibration diagnostic", rho < 0.0 && best - chosen <= 0.02 + 1e-12,
           "spearman(BC, ACC)=" + fmt(rho) + " chosen ACC=" + fmt(chosen) + " best ACC=" + fmt(best));
  }

  {
    const std::vector<std::pair<std::string, tcm_test::SuiteResult>> suites{
        {"kl", tcm_test::kl_suite(10000)},
        {"bc", tcm_test::bc_suite(10000)},
        {"kmeans", tcm_test::kmeans_suite()},
        {"raster", tcm_test::raster_suite(100)},
        {"lr_gradient", tcm_test::lr_gradient_suite()},
        {"first_crossing", tcm_test::first_crossing_suite(1000)},
    };
    bool ok = true;
    std::string detail;
    for (const auto& [name, r] : suites) {
      ok = ok && r.ok;
      detail += name + (r.ok ? "=ok " : "=FAILED(" + r.detail + ") ");
    }
    report(5, "math property suites", ok, detail);
  }

  determinism(6);

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
