#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "dhal/error.hpp"

using namespace dhal::cli;

namespace {

void add_common(CLI::App* cmd, CommonOptions& common) {
  cmd->add_option("--config", common.config_path, "key=value config file");
  cmd->add_option("--set", common.sets, "override a config key (key=value), repeatable");
  cmd->add_option("--seed", common.seed, "random seed");
  cmd->add_option("--mode", common.mode, "full | teacher_only | teacher_generator_only");
  cmd->add_option("--epochs", common.epochs, "total training epochs");
  cmd->add_option("--out", common.out, "output directory (default $DEPTH_HALLUC_OUT/<command>)");
  cmd->add_option("--checkpoint", common.checkpoint,
                  "checkpoint directory or G_A2B archive; 'identity' for a passthrough");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Depth hallucination from RGB faces with teacher-student adversarial training"};
  app.require_subcommand(1);

  CommonOptions common;
  TrainOptions train;
  HallucinateOptions hallucinate;
  EvalQualityOptions quality;
  EvalRecognitionOptions recognition;
  MakeSyntheticOptions synthetic;
  ExportSamplesOptions samples;

  auto* train_cmd = app.add_subcommand("train", "train the teacher/student generators");
  add_common(train_cmd, common);
  train_cmd->add_flag("--resume", train.resume, "continue from the latest checkpoint in --out");

  auto* hal_cmd = app.add_subcommand("hallucinate", "write a depth image for every RGB image");
  add_common(hal_cmd, common);
  hal_cmd->add_option("--input", hallucinate.input, "directory of RGB images")->required();
  hal_cmd->add_option("--size", hallucinate.size, "model input size");

  auto* q_cmd = app.add_subcommand("eval-quality", "pixel metrics and FID on a paired set");
  add_common(q_cmd, common);
  q_cmd->add_option("--data", quality.data, "paired dataset root")->required();
  q_cmd->add_option("--size", quality.size, "model input size");

  auto* r_cmd = app.add_subcommand("eval-recognition", "k-fold rank-1 identification");
  add_common(r_cmd, common);
  r_cmd->add_option("--data", recognition.data, "paired dataset root")->required();
  r_cmd->add_option("--size", recognition.size, "model input size");
  r_cmd->add_option("--folds", recognition.folds, "number of folds")->capture_default_str();
  r_cmd->add_option("--backbone-epochs", recognition.backbone_epochs, "backbone training epochs")
      ->capture_default_str();
  r_cmd->add_flag("!--no-ground-truth", recognition.ground_truth, "skip the real-depth columns");

  auto* s_cmd = app.add_subcommand("make-synthetic", "render a synthetic paired RGB-D face set");
  add_common(s_cmd, common);
  s_cmd->add_option("--count", synthetic.count, "number of images")->capture_default_str();
  s_cmd->add_option("--size", synthetic.size, "image size")->capture_default_str();
  s_cmd->add_option("--identities", synthetic.identities, "number of identities")
      ->capture_default_str();

  auto* e_cmd = app.add_subcommand("export-samples", "RGB | depth | hallucinated | reconstruction grid");
  add_common(e_cmd, common);
  e_cmd->add_option("--data", samples.data, "paired dataset root")->required();
  e_cmd->add_option("--size", samples.size, "model input size");
  e_cmd->add_option("--count", samples.count, "number of rows")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(common, train);
    if (hal_cmd->parsed()) return cmd_hallucinate(common, hallucinate);
    if (q_cmd->parsed()) return cmd_eval_quality(common, quality);
    if (r_cmd->parsed()) return cmd_eval_recognition(common, recognition);
    if (s_cmd->parsed()) return cmd_make_synthetic(common, synthetic);
    if (e_cmd->parsed()) return cmd_export_samples(common, samples);
  } catch (const dhal::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
