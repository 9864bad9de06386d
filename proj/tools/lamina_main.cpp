#include <lamina/scenario.hpp>

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"lamina: Lambda-Lefschetz numbers of foliation maps on flat tori"};

  std::string command, scenario_file, out_dir;
  std::uint64_t seed = 0;
  int grid = 0, max_attempts = -1;
  double step = 0.0, tol_rank = 0.0;

  app.add_option("command", command,
                 "fix | coin | lefschetz | invariance | check-measure | trace-rhs")
      ->required();
  app.add_option("scenario", scenario_file, "scenario file (JSON)")->required();
  app.add_option("--seed", seed, "RNG seed override");
  app.add_option("--grid", grid, "seeding grid resolution per axis");
  app.add_option("--step", step, "trace step override");
  app.add_option("--tol-rank", tol_rank, "rank threshold override");
  app.add_option("--max-attempts", max_attempts, "perturbation attempt budget");
  app.add_option("--out", out_dir, "output directory");

  CLI11_PARSE(app, argc, argv);

  lamina::CliOverrides ov;
  if (app.count("--seed")) ov.seed = seed;
  if (app.count("--grid")) ov.grid = grid;
  if (app.count("--step")) ov.step = step;
  if (app.count("--tol-rank")) ov.tol_rank = tol_rank;
  if (app.count("--max-attempts")) ov.max_attempts = max_attempts;
  if (app.count("--out")) ov.out = out_dir;

  lamina::RunResult res = lamina::run_scenario(scenario_file, command, ov);
  if (!res.message.empty()) std::cerr << res.message << '\n';
  if (res.exit_code == 0) std::cout << "report: " << res.report_path.string() << '\n';
  return res.exit_code;
}
