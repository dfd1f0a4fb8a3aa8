#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace betadet::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitDiverged = 3;
inline constexpr int kExitVerification = 4;

inline constexpr const char* kCheckpointFile = "checkpoint.bdc";
inline constexpr const char* kLossLogFile = "loss_log.csv";
inline constexpr std::size_t kPlotRows = 501;
inline constexpr double kGradcheckTolerance = 1e-5;

struct GenArgs {
  std::uint64_t seed = 1;
  std::size_t count = 0;
  std::string out;
};

struct TrainArgs {
  std::string config;
  std::string data;
  std::string out;
};

struct EvalArgs {
  std::string ckpt;
  std::string data;
  std::string out;
  std::optional<double> threshold;
};

struct PredictArgs {
  std::string ckpt;
  std::string data;
  std::string out;
};

struct PlotBetaArgs {
  double alpha = 1.0;
  double beta = 1.0;
  std::string out;
};

struct GradcheckArgs {
  std::uint64_t seed = 1;
  // Negative control: scales the backward pass of one op.
  std::string fault_op;
  double fault_factor = 1.0;
};

// Each command returns its process exit code. Library errors propagate to
// main, which maps them onto exit codes.
int run_gen(const GenArgs& args);
int run_train(const TrainArgs& args);
int run_eval(const EvalArgs& args);
int run_predict(const PredictArgs& args);
int run_plot_beta(const PlotBetaArgs& args);
int run_gradcheck(const GradcheckArgs& args);

}  // namespace betadet::cli
