// Batch front-end: simulate, converge, duality, coefficients, acceptance.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "levelcg/acceptance.hpp"
#include "levelcg/commands.hpp"
#include "levelcg/config.hpp"

namespace {

using namespace levelcg;

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
  std::vector<std::string> only;
  std::string scratch;
};

RunConfig resolve(const Options& o) {
  RunConfig cfg = o.config.empty() ? load_run_config(ConfigDocument::parse("", "defaults"))
                                   : load_run_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (o.threads > 0) cfg.threads = o.threads;
  if (!o.out.empty()) cfg.out = o.out;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coarse-graining of the noisy double-well system onto its level-set graph"};
  app.require_subcommand(1);
  Options o;
  app.add_option("--config", o.config, "Configuration file")->check(CLI::ExistingFile);
  app.add_option("--out", o.out, "Output directory (overrides run.out)");
  app.add_option("--seed", o.seed, "Base seed (overrides sde.seed)");
  app.add_option("--threads", o.threads, "Worker threads; falls back to LEVELCG_THREADS")->check(CLI::PositiveNumber);

  auto* simulate = app.add_subcommand("simulate", "Single trajectory and its graph projection");
  auto* converge = app.add_subcommand("converge", "W1 between projected ensembles and the limit density");
  auto* duality = app.add_subcommand("duality", "Dual functionals over the test family");
  auto* coefficients = app.add_subcommand("coefficients", "Action, period and gluing tables");
  auto* acceptance = app.add_subcommand("acceptance", "Acceptance criteria A1-A11");
  acceptance->add_option("--only", o.only, "Criteria to run, e.g. --only A1 A9")->delimiter(',');
  acceptance->add_option("--scratch", o.scratch, "Directory for intermediate files");
  for (auto* sub : {simulate, converge, duality, coefficients, acceptance}) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);

  try {
    const RunConfig cfg = resolve(o);
    const std::filesystem::path out = cfg.out;
    if (*simulate) {
      const auto r = cmd_simulate(cfg, out);
      std::cout << "wrote " << r.rows.size() << " rows to " << (out / "trajectory.csv").string() << " and "
                << (out / "projection.csv").string() << '\n';
    } else if (*converge) {
      const auto r = cmd_converge(cfg, out);
      std::cout << "epsilon,sup_w1,terminal_w1\n";
      for (const auto& row : r.rows) {
        std::cout << format_number(row.epsilon) << ',' << format_number(row.sup_w1) << ','
                  << format_number(row.terminal_w1) << '\n';
      }
    } else if (*duality) {
      const auto r = cmd_duality(cfg, out);
      for (const auto& sw : r.report.sweeps) {
        std::cout << "eps " << format_number(sw.epsilon) << ": sup J " << format_number(sw.sup_full) << ", sup J_hat "
                  << format_number(sw.sup_hat_eps) << ", chain " << (sw.chain_holds ? "holds" : "violated") << '\n';
      }
      std::cout << "limit sup J_hat_0 " << format_number(r.report.sup_hat_zero) << ", shifted "
                << format_number(r.sup_shifted) << (r.shift_detected ? " (off-solution detected)" : "") << '\n';
      for (const auto& w : r.report.warnings) std::cerr << "warning: " << w << '\n';
    } else if (*coefficients) {
      const auto gw = cmd_coefficients(cfg, out);
      for (std::size_t i = 0; i < gw.beta.size(); ++i) {
        std::cout << "edge " << i << ": beta " << format_number(gw.beta[i]) << ", p " << format_number(gw.prob[i]) << '\n';
      }
    } else if (*acceptance) {
      const std::set<std::string> only(o.only.begin(), o.only.end());
      const std::filesystem::path scratch =
          o.scratch.empty() ? std::filesystem::temp_directory_path() / "levelcg-acceptance" : std::filesystem::path(o.scratch);
      return run_acceptance(only, cfg.threads, scratch, std::cout) ? 0 : 1;
    }
  } catch (const levelcg::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::Config ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
