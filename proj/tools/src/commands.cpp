#include "commands.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <vector>

#include "betadet/autograd.hpp"
#include "betadet/beta.hpp"
#include "betadet/checkpoint.hpp"
#include "betadet/config.hpp"
#include "betadet/errors.hpp"
#include "betadet/evalkit.hpp"
#include "betadet/synthdata.hpp"
#include "betadet/training.hpp"

namespace betadet::cli {
namespace fs = std::filesystem;

namespace {

std::string format(const char* fmt, auto... args) {
  std::array<char, 256> buf{};
  std::snprintf(buf.data(), buf.size(), fmt, args...);
  return buf.data();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
  if (!out) throw InputError("write failed: " + path.string());
}

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw InputError("cannot create directory " + dir.string());
}

std::vector<Scene> load_scenes(const std::string& dir) {
  if (dir.empty()) throw InputError("no dataset given");
  if (!fs::is_directory(dir)) throw InputError("dataset directory not found: " + dir);
  return read_dataset(dir);
}

// Rebuilds the model described by a checkpoint and loads its weights.
Detector restore(const Checkpoint& ckpt) {
  Detector model(ckpt.config.model, ckpt.config.seed);
  ckpt.apply_to(model);
  return model;
}

}  // namespace

int run_gen(const GenArgs& args) {
  if (args.count == 0) throw InputError("--count must be at least 1");
  const std::vector<Scene> scenes = generate(args.seed, args.count);
  write_dataset(scenes, args.out);

  std::array<std::size_t, 3> per_stage{};
  std::size_t objects = 0;
  for (const Scene& s : scenes) {
    for (const GroundTruthObject& o : s.objects) {
      ++per_stage[static_cast<std::size_t>(o.stage)];
      ++objects;
    }
  }
  std::cout << "scenes  " << scenes.size() << "\n"
            << "objects " << objects << "\n"
            << "unripe  " << per_stage[0] << "\n"
            << "half    " << per_stage[1] << "\n"
            << "ripe    " << per_stage[2] << "\n";
  return kExitOk;
}

int run_train(const TrainArgs& args) {
  RunConfig config = args.config.empty() ? RunConfig{} : load_config(args.config);
  if (!args.data.empty()) config.train_data = args.data;
  const std::vector<Scene> scenes = load_scenes(config.train_data);
  ensure_directory(args.out);

  const fs::path log_path = fs::path(args.out) / kLossLogFile;
  std::ofstream log(log_path, std::ios::binary);
  if (!log) throw InputError("cannot write " + log_path.string());
  log << "step,total,vfl,bbox,giou,maturity\n";

  const Detector model = train(config, scenes, [&](const StepRecord& r) {
    log << format("%zu,%.9g,%.9g,%.9g,%.9g,%.9g\n", r.step, r.loss.total, r.loss.vfl, r.loss.bbox_l1,
                  r.loss.giou, r.loss.maturity);
    if (r.step % 100 == 0 || r.step == config.steps) {
      std::cout << format("step %5zu  loss %.6f  grad-norm %.4f\n", r.step, r.loss.total, r.grad_norm);
    }
  });
  log.close();
  if (!log) throw InputError("write failed: " + log_path.string());

  save_checkpoint(Checkpoint::capture(config, config.steps, model), fs::path(args.out) / kCheckpointFile);
  return kExitOk;
}

int run_eval(const EvalArgs& args) {
  const Checkpoint ckpt = load_checkpoint(args.ckpt);
  const Detector model = restore(ckpt);
  const std::vector<Scene> scenes = load_scenes(args.data);

  EvalOptions options;
  options.score_threshold = args.threshold.value_or(ckpt.config.score_threshold);
  const EvalReport report = evaluate(run_inference(model, scenes), options);
  if (!args.out.empty()) write_file(args.out, to_csv(report));
  std::cout << to_text(report);
  return kExitOk;
}

int run_predict(const PredictArgs& args) {
  const Checkpoint ckpt = load_checkpoint(args.ckpt);
  const Detector model = restore(ckpt);
  const std::vector<Scene> scenes = load_scenes(args.data);

  std::ostringstream csv;
  csv << "image,cx,cy,w,h,p_obj,alpha,beta\n";
  const std::vector<ImageResult> results = run_inference(model, scenes);
  for (std::size_t i = 0; i < results.size(); ++i) {
    for (const Detection& d : results[i].detections) {
      csv << format("%zu,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", i, d.box.cx, d.box.cy, d.box.w, d.box.h,
                    d.p_obj, d.maturity.alpha(), d.maturity.beta());
    }
  }
  if (args.out.empty()) {
    std::cout << csv.str();
  } else {
    write_file(args.out, csv.str());
  }
  return kExitOk;
}

int run_plot_beta(const PlotBetaArgs& args) {
  const BetaParams p(args.alpha, args.beta);
  std::ostringstream csv;
  csv << "y,pdf\n";
  // y = i / 500 with the two endpoints pulled in to the target clamp.
  const std::size_t last = kPlotRows - 1;
  for (std::size_t i = 0; i <= last; ++i) {
    double y = static_cast<double>(i) / static_cast<double>(last);
    if (i == 0) y = kTargetEpsilon;
    if (i == last) y = 1.0 - kTargetEpsilon;
    csv << format("%.9g,%.9g\n", y, std::exp(log_pdf(p, y)));
  }
  write_file(args.out, csv.str());
  return kExitOk;
}

int run_gradcheck(const GradcheckArgs& args) {
  if (!args.fault_op.empty()) ag::testing::set_backward_fault(args.fault_op, args.fault_factor);
  GradcheckOptions options;
  options.seed = args.seed;
  const GradcheckReport report = gradcheck(options);
  ag::testing::set_backward_fault("", 1.0);

  const bool pass = report.max_relative_error <= kGradcheckTolerance;
  std::cout << format("checked      %zu parameters\n", report.checked)
            << format("max rel err  %.6e\n", report.max_relative_error)
            << format("worst        %s[%zu] analytic %.9e numeric %.9e\n", report.worst_parameter.c_str(),
                      report.worst_index, report.worst_analytic, report.worst_numeric)
            << (pass ? "PASS" : "FAIL") << format(" (tolerance %.0e)\n", kGradcheckTolerance);
  return pass ? kExitOk : kExitVerification;
}

}  // namespace betadet::cli
