// contactservo: collect / augment / train / eval / servo / scrape / plot
// pipeline driver. Every run is determined by (config file, seed).

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "contactservo/experiment.hpp"

namespace {

using namespace contactservo;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitMissingFile = 2;
constexpr int kExitSchema = 3;
constexpr int kExitNonFinite = 4;

std::string default_model_path(const ExperimentConfig& cfg,
                               const std::string& variant) {
  return (fs::path(cfg.output_dir) / "models" / ("model_" + variant + ".json"))
      .string();
}

std::string default_manifest(const ExperimentConfig& cfg, bool augmented) {
  return (fs::path(cfg.output_dir) /
          (augmented ? "dataset_aug" : "dataset") / "manifest.json")
      .string();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"extrinsic contact servoing pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  int64_t seed_override = -1;
  int threads_override = 0;

  app.add_option("--config", config_path, "experiment config JSON")
      ->required();
  app.add_option("--set", overrides,
                 "dotted-path config override, e.g. dataset.length=30");
  app.add_option("--seed", seed_override, "master seed override");
  app.add_option("--threads", threads_override, "worker thread cap");

  auto* collect = app.add_subcommand("collect", "collect labeled episodes");
  auto* augment = app.add_subcommand("augment", "occlusion-augment a dataset");
  auto* train_cmd = app.add_subcommand("train", "train a dynamics model");
  auto* eval_cmd = app.add_subcommand("eval", "prediction metrics on the test split");
  auto* servo_cmd = app.add_subcommand("servo", "contact servoing + IoU report");
  auto* scrape_cmd = app.add_subcommand("scrape", "scraping experiment");
  auto* plot_cmd = app.add_subcommand("plot", "render charts from reports");

  std::string variant = "full";
  train_cmd->add_option("--variant", variant, "full|no_offset|vision_only");
  bool use_augmented = false;
  train_cmd->add_flag("--augmented", use_augmented, "train on dataset_aug");

  std::vector<std::string> eval_models;
  bool eval_baseline = false, eval_unseen = false;
  eval_cmd->add_option("--models", eval_models, "model file(s)");
  eval_cmd->add_flag("--baseline", eval_baseline, "include the rigid baseline");
  eval_cmd->add_flag("--unseen", eval_unseen, "evaluate on the unseen tool");

  std::string servo_model;
  bool servo_baseline = false, servo_unseen = false;
  servo_cmd->add_option("--model", servo_model, "model file");
  servo_cmd->add_flag("--baseline", servo_baseline, "rigid-baseline dynamics");
  servo_cmd->add_flag("--unseen", servo_unseen, "run on the unseen tool");

  std::string scrape_model;
  bool scrape_obstacles = false;
  scrape_cmd->add_option("--model", scrape_model, "model file");
  scrape_cmd->add_flag("--obstacles", scrape_obstacles, "obstacle scenario");

  CLI11_PARSE(app, argc, argv);

  try {
    if (seed_override >= 0)
      overrides.push_back("seed=" + std::to_string(seed_override));
    if (threads_override > 0)
      overrides.push_back("train.threads=" + std::to_string(threads_override));
    const ExperimentConfig cfg = load_config(config_path, overrides);

    if (collect->parsed()) {
      const std::string manifest = cmd_collect(cfg);
      std::cout << "manifest: " << manifest << "\n";
    } else if (augment->parsed()) {
      const std::string manifest = cmd_augment(cfg, default_manifest(cfg, false));
      std::cout << "manifest: " << manifest << "\n";
    } else if (train_cmd->parsed()) {
      const std::string model = cmd_train(cfg, default_manifest(cfg, use_augmented),
                                          variant_from_name(variant));
      std::cout << "model: " << model << "\n";
    } else if (eval_cmd->parsed()) {
      if (eval_models.empty())
        eval_models.push_back(default_model_path(cfg, "full"));
      const auto reports = cmd_eval(cfg, default_manifest(cfg, false),
                                    eval_models, eval_baseline, eval_unseen);
      for (const auto& r : reports) {
        std::cout << r.label << ": step-3 acc "
                  << r.binary_accuracy.back() << ", line rms "
                  << r.line_rms.back() << " m, force rms "
                  << r.force_rms.back() << " N\n";
        if (!std::isfinite(r.binary_accuracy.back())) return kExitNonFinite;
      }
    } else if (servo_cmd->parsed()) {
      if (servo_model.empty()) servo_model = default_model_path(cfg, "full");
      const auto trials = cmd_servo(cfg, servo_model, servo_baseline, servo_unseen);
      double mean = 0;
      for (const auto& t : trials) {
        std::cout << t.trajectory << " seed " << t.seed << " iou " << t.iou
                  << (t.aborted ? " (aborted)" : "") << "\n";
        mean += t.iou;
        if (!std::isfinite(t.iou)) return kExitNonFinite;
      }
      std::cout << "mean iou: " << mean / trials.size() << "\n";
    } else if (scrape_cmd->parsed()) {
      if (scrape_model.empty()) scrape_model = default_model_path(cfg, "full");
      const auto trials = cmd_scrape(cfg, scrape_model, scrape_obstacles);
      for (const auto& t : trials)
        std::cout << t.trajectory << " seed " << t.seed << " mass "
                  << t.mass_removed << " footprint " << t.footprint_removed
                  << " collisions " << t.collisions << "\n";
    } else if (plot_cmd->parsed()) {
      cmd_plot(cfg);
      std::cout << "plots: " << cfg.output_dir << "/plots\n";
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    std::cerr << "error: schema: " << msg << "\n";
    return msg.find("cannot open") != std::string::npos ? kExitMissingFile
                                                        : kExitSchema;
  } catch (const DatasetError& e) {
    const std::string msg = e.what();
    std::cerr << "error: dataset: " << msg << "\n";
    return msg.find("cannot open") != std::string::npos ? kExitMissingFile
                                                        : kExitError;
  } catch (const ModelError& e) {
    const std::string msg = e.what();
    std::cerr << "error: model: " << msg << "\n";
    if (msg.find("cannot open") != std::string::npos) return kExitMissingFile;
    return msg.find("diverged") != std::string::npos ? kExitNonFinite
                                                     : kExitError;
  } catch (const ControllerError& e) {
    std::cerr << "error: controller: " << e.what() << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
}
