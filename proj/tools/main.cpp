#include <iostream>

#include "CLI11.hpp"
#include "protocore/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"protocore: prototype-guided continual learning experiments"};
  app.require_subcommand(1);

  std::string config;
  auto* run = app.add_subcommand("run", "train a task sequence and write all run artifacts");
  run->add_option("--config", config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);

  std::string ablate_config, losses, variants, seeds;
  auto* ablate = app.add_subcommand("ablate", "compare loss-term subsets and write ablation.csv");
  ablate->add_option("--config", ablate_config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  ablate->add_option("--losses", losses, "semicolon-separated term sets, e.g. \"1;1,2;1,2,3;full\"")->required();
  ablate->add_option("--variants", variants, "comma-separated loss variants (contrastive,prototypical)");
  ablate->add_option("--seeds", seeds, "comma-separated root seeds averaged per row");

  std::size_t instances = 20;
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every loss");
  gradcheck->add_option("--instances", instances, "random instances per loss")->check(CLI::PositiveNumber);

  std::string run_dir;
  int task = 0;
  auto* dump = app.add_subcommand("dump-embeddings", "export embeddings for one task checkpoint");
  dump->add_option("--run", run_dir, "run output directory")->required()->check(CLI::ExistingDirectory);
  dump->add_option("--task", task, "task number (1-based)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (*run) return protocore::cmd_run(config, std::cout, std::cerr);
  if (*ablate) return protocore::cmd_ablate(ablate_config, losses, variants, seeds, std::cout, std::cerr);
  if (*gradcheck) return protocore::cmd_gradcheck(std::cout, std::cerr, instances);
  if (*dump) return protocore::cmd_dump_embeddings(run_dir, task, std::cout, std::cerr);
  return 1;
}
