#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "betadet/errors.hpp"
#include "betadet/training.hpp"
#include "commands.hpp"

namespace cli = betadet::cli;

int main(int argc, char** argv) {
  CLI::App app{"Beta-maturity toy detector: data generation, training, evaluation and checks"};
  app.require_subcommand(1);

  cli::GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic dataset");
  gen_cmd->add_option("--seed", gen.seed, "Generator seed")->capture_default_str();
  gen_cmd->add_option("--count", gen.count, "Number of scenes")->required()->check(CLI::PositiveNumber);
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();

  cli::TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train a model and write checkpoint and loss log");
  train_cmd->add_option("--config", train.config, "Config file (key = value lines)");
  train_cmd->add_option("--data", train.data, "Training dataset directory (overrides train_data)");
  train_cmd->add_option("--out", train.out, "Output directory")->required();

  cli::EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  eval_cmd->add_option("--ckpt", eval.ckpt, "Checkpoint file")->required();
  eval_cmd->add_option("--data", eval.data, "Dataset directory")->required();
  eval_cmd->add_option("--out", eval.out, "Report CSV path");
  eval_cmd->add_option("--threshold", eval.threshold, "Objectness threshold for maturity metrics")
      ->check(CLI::Range(0.0, 1.0));

  cli::PredictArgs predict;
  auto* predict_cmd = app.add_subcommand("predict", "Write final-layer detections as CSV");
  predict_cmd->add_option("--ckpt", predict.ckpt, "Checkpoint file")->required();
  predict_cmd->add_option("--data", predict.data, "Dataset directory")->required();
  predict_cmd->add_option("--out", predict.out, "CSV path (stdout if omitted)");

  cli::PlotBetaArgs plot;
  auto* plot_cmd = app.add_subcommand("plot-beta", "Tabulate a Beta density");
  plot_cmd->add_option("--alpha", plot.alpha, "Shape alpha (>= 0.5)")->required();
  plot_cmd->add_option("--beta", plot.beta, "Shape beta (>= 0.5)")->required();
  plot_cmd->add_option("--out", plot.out, "CSV path")->required();

  cli::GradcheckArgs grad;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of the full loss gradient");
  grad_cmd->add_option("--seed", grad.seed, "Model and scene seed")->capture_default_str();
  grad_cmd->add_option("--fault-op", grad.fault_op)->group("");
  grad_cmd->add_option("--fault-factor", grad.fault_factor)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return cli::kExitUsage;
  }

  try {
    if (*gen_cmd) return cli::run_gen(gen);
    if (*train_cmd) return cli::run_train(train);
    if (*eval_cmd) return cli::run_eval(eval);
    if (*predict_cmd) return cli::run_predict(predict);
    if (*plot_cmd) return cli::run_plot_beta(plot);
    if (*grad_cmd) return cli::run_gradcheck(grad);
  } catch (const betadet::TrainingDiverged& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kExitDiverged;
  } catch (const betadet::NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kExitDiverged;
  } catch (const std::exception& e) {
    // Parse, domain, input and filesystem errors are all caller mistakes.
    std::cerr << "error: " << e.what() << "\n";
    return cli::kExitUsage;
  }
  return cli::kExitUsage;
}
