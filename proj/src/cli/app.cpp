// Copyright 2026 The evshot Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "evshot/cli/app.hpp"

#include <memory>

#include "CLI11.hpp"
#include "evshot/cli/commands.hpp"
#include "evshot/simd/kernels.hpp"

namespace evshot::cli {

namespace {

// Config files are flat key=value lists; unsectioned keys belong to whichever
// subcommand is being run.
class SubcommandConfig : public CLI::ConfigINI {
 public:
  explicit SubcommandConfig(const CLI::App* app) : app_(app) {}

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    auto items = CLI::ConfigINI::from_config(input);
    const auto subs = app_->get_subcommands();
    if (!subs.empty()) {
      for (auto& item : items) {
        if (item.parents.empty()) item.parents = {subs.front()->get_name()};
      }
    }
    return items;
  }

 private:
  const CLI::App* app_;
};

void add_alpha(CLI::App* sub, AlphaSpec& spec) {
  sub->add_option("--alpha", spec.text, "timestep weights: uniform, grid, or a comma-separated list")
      ->capture_default_str();
}

}  // namespace

int exit_code_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MissingArtifact:
      return kExitMissingArtifact;
    case ErrorCode::AllZeroWeights:
    case ErrorCode::InvalidConfig:
    case ErrorCode::NonFiniteLoss:
      return kExitConfigError;
    case ErrorCode::InsufficientSamples:
      return kExitInsufficientData;
    case ErrorCode::NonFiniteState:
    case ErrorCode::MissingForwardRecord:
      return kExitInternal;
    default:
      return kExitInputError;
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"evshot: zero- and few-shot classification of event-camera recordings", "evshot"};
  app.require_subcommand(1);
  app.fallthrough();
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.config_formatter(std::make_shared<SubcommandConfig>(&app));
  app.set_config("--config", "", "key=value file; command-line flags take precedence");
  std::string isa = "auto";
  app.add_option("--kernels", isa, "kernel variant: auto, scalar, avx2, neon")->capture_default_str();

  ProjectOptions project;
  auto* p = app.add_subcommand("project", "convert raw recordings into tri-level frame stacks");
  p->add_option("--root", project.root, "dataset directory")->required();
  p->add_option("--kind", project.kind, "nmnist, cifar10dvs or csv")->capture_default_str();
  p->add_option("--out", project.out, "output directory")->required();
  p->add_option("-T,--timesteps", project.timesteps, "frames per recording")->capture_default_str();
  p->add_option("--window", project.window, "equal-duration or equal-count")->capture_default_str();
  p->add_option("--overwrite", project.overwrite, "last-event-wins or on-dominates")->capture_default_str();
  p->add_option("--width", project.width, "sensor width (csv)");
  p->add_option("--height", project.height, "sensor height (csv)");
  p->add_option("--test-fraction", project.test_fraction, "held-out fraction when there is no train/test split")
      ->capture_default_str();
  p->add_flag("--aedat-on-bit-set", project.aedat_on_bit_set, "treat AEDAT polarity bit 1 as ON");
  p->add_option("-j,--workers", project.workers, "parallel workers")->capture_default_str();

  ZeroShotOptions zero;
  auto* z = app.add_subcommand("zeroshot", "classify embedded frames against text embeddings");
  z->add_option("--manifest", zero.manifest, "manifest.json written by project")->required();
  z->add_option("--split", zero.split, "test, train or all")->capture_default_str();
  add_alpha(z, zero.alpha);
  z->add_option("--logit-scale", zero.logit_scale)->capture_default_str();
  z->add_flag("--no-normalize", zero.no_normalize, "use embeddings as stored");
  z->add_option("--checkpoint", zero.checkpoint, "classify through a trained adapter");
  z->add_option("--report", zero.report, "write the JSON report here");
  z->add_option("--predictions", zero.predictions, "write per-sample predictions (JSON lines)");
  z->add_flag("--probabilities", zero.with_probabilities, "include class probabilities in predictions");
  z->add_option("-j,--workers", zero.workers)->capture_default_str();

  FewShotOptions few;
  auto* f = app.add_subcommand("fewshot", "train the spiking adapter on K shots per class");
  f->add_option("--manifest", few.manifest)->required();
  f->add_option("--shots", few.shots)->capture_default_str();
  f->add_option("--epochs", few.epochs)->capture_default_str();
  f->add_option("--lr", few.learning_rate)->capture_default_str();
  f->add_option("--patience", few.patience)->capture_default_str();
  f->add_option("--val-per-class", few.val_per_class, "0 means as many as shots")->capture_default_str();
  f->add_option("--seed", few.seed)->capture_default_str();
  f->add_option("--bottleneck", few.bottleneck, "0 means dim/4")->capture_default_str();
  f->add_option("--residual-ratio", few.residual_ratio)->capture_default_str();
  f->add_option("--leak", few.leak)->capture_default_str();
  f->add_option("--threshold", few.threshold)->capture_default_str();
  f->add_option("--surrogate-width", few.surrogate_width)->capture_default_str();
  f->add_option("--reset", few.reset, "soft or hard")->capture_default_str();
  f->add_flag("--detach-reset", few.detach_reset, "stop gradients through the reset term");
  f->add_option("--down-bound", few.down_bound, "W_down init half-width, 0 for the default")->capture_default_str();
  add_alpha(f, few.alpha);
  f->add_option("--logit-scale", few.logit_scale)->capture_default_str();
  f->add_flag("--no-normalize", few.no_normalize);
  f->add_option("--checkpoint", few.checkpoint, "adapter output path")->capture_default_str();
  f->add_option("--report", few.report);
  f->add_option("-j,--workers", few.workers)->capture_default_str();

  EvalOptions eval;
  auto* e = app.add_subcommand("eval", "score a predictions file");
  e->add_option("--manifest", eval.manifest)->required();
  e->add_option("--predictions", eval.predictions)->required();
  e->add_option("--report", eval.report);

  ReproduceOptions repro;
  auto* r = app.add_subcommand("reproduce", "compare zero-shot and few-shot accuracy with published numbers");
  r->add_option("--nmnist", repro.nmnist, "N-MNIST manifest");
  r->add_option("--cifar10dvs", repro.cifar10dvs, "CIFAR10-DVS manifest");
  r->add_option("--shots", repro.shots)->capture_default_str();
  r->add_option("--seed", repro.seed)->capture_default_str();
  r->add_option("--tolerance", repro.tolerance, "percentage points")->capture_default_str();
  r->add_option("--report", repro.report);
  r->add_option("-j,--workers", repro.workers)->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfigError;
  }

  try {
    if (isa == "auto") {
      simd::set_active_isa(simd::best_isa());
    } else if (isa == "scalar") {
      simd::set_active_isa(simd::Isa::Scalar);
    } else if (isa == "avx2") {
      simd::set_active_isa(simd::Isa::Avx2);
    } else if (isa == "neon") {
      simd::set_active_isa(simd::Isa::Neon);
    } else {
      throw Error(ErrorCode::InvalidConfig, "unknown kernel variant '" + isa + "'");
    }

    nlohmann::json report;
    if (p->parsed()) {
      report = cmd_project(project, err);
    } else if (z->parsed()) {
      report = cmd_zeroshot(zero, err);
    } else if (f->parsed()) {
      report = cmd_fewshot(few, err);
    } else if (e->parsed()) {
      report = cmd_eval(eval, err);
    } else {
      report = cmd_reproduce(repro, err);
    }
    out << report.dump(2) << "\n";
    return kExitOk;
  } catch (const Error& ex) {
    err << "error: " << ex.what() << "\n";
    return exit_code_for(ex.code());
  } catch (const std::exception& ex) {
    err << "internal error: " << ex.what() << "\n";
    return kExitInternal;
  }
}

}  // namespace evshot::cli
