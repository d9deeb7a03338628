#include <iostream>

#include "CLI11.hpp"
#include "sifr/commands.hpp"
#include "sifr/config.hpp"
#include "sifr/errors.hpp"

// Exit codes: 0 success, 1 usage, 2 data/format/config error, 3 numeric
// failure (non-finite loss, failed gradient check).

int main(int argc, char** argv) {
  CLI::App app{"Frustum point-cloud 3D detection: data, training, evaluation"};
  app.require_subcommand(0, 1);

  bool dump = false;
  app.add_flag("--dump-defaults", dump,
               "Print every config key with its default value and exit");

  sifr::CliOptions opt;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", opt.config_path,
                    "Config file, line-oriented 'key = value'");
    cmd->add_option("--seed", opt.seed,
                    "Override the run seed (also drives data generation)");
    cmd->add_option("--out", opt.out_dir, "Output directory");
    cmd->add_option("--checkpoint", opt.checkpoint, "Checkpoint path");
    cmd->add_option("--split", opt.split, "Dataset split name");
    cmd->add_option("--metric", opt.metric, "Headline metric for reports")
        ->check(CLI::IsMember({"3d", "bev"}));
    return cmd;
  };

  CLI::App* gen =
      add_common(app.add_subcommand("gen", "Generate a synthetic dataset"));
  CLI::App* train =
      add_common(app.add_subcommand("train", "Train on a generated dataset"));
  CLI::App* eval_cmd =
      add_common(app.add_subcommand("eval", "Evaluate a checkpoint"));
  CLI::App* gradcheck = add_common(app.add_subcommand(
      "gradcheck", "Audit tape gradients against finite differences"));
  gradcheck->add_flag("--inject-fault", opt.inject_fault,
                      "Corrupt one analytic gradient to prove the audit bites");
  CLI::App* bench = add_common(
      app.add_subcommand("bench", "Forward / forward+backward throughput"));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  if (dump) {
    std::cout << sifr::dump_defaults();
    return 0;
  }

  CLI::App* sub = nullptr;
  for (CLI::App* s : {gen, train, eval_cmd, gradcheck, bench})
    if (s->parsed()) sub = s;
  if (sub == nullptr) {
    std::cerr << app.help();
    return 1;
  }
  opt.has_seed = sub->count("--seed") > 0;

  try {
    if (sub == gen) return sifr::cmd_gen(opt);
    if (sub == train) return sifr::cmd_train(opt);
    if (sub == eval_cmd) return sifr::cmd_eval(opt);
    if (sub == gradcheck) return sifr::cmd_gradcheck(opt);
    return sifr::cmd_bench(opt);
  } catch (const sifr::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
