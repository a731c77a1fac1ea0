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

#include "evshot/cli/commands.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "evshot/cli/atomic_file.hpp"
#include "evshot/error.hpp"
#include "evshot/manifest.hpp"
#include "evshot/simd/kernels.hpp"

namespace evshot::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

WindowPolicy parse_window(const std::string& s) {
  if (s == "equal-duration") return WindowPolicy::EqualDuration;
  if (s == "equal-count") return WindowPolicy::EqualCount;
  throw Error(ErrorCode::InvalidConfig, "unknown window policy '" + s + "'");
}

OverwritePolicy parse_overwrite(const std::string& s) {
  if (s == "last-event-wins") return OverwritePolicy::LastEventWins;
  if (s == "on-dominates") return OverwritePolicy::OnDominates;
  throw Error(ErrorCode::InvalidConfig, "unknown overwrite policy '" + s + "'");
}

ResetMode parse_reset(const std::string& s) {
  if (s == "soft") return ResetMode::Soft;
  if (s == "hard") return ResetMode::Hard;
  throw Error(ErrorCode::InvalidConfig, "unknown reset mode '" + s + "'");
}

json nan_to_null(double v) { return std::isnan(v) ? json(nullptr) : json(v); }

json evaluation_json(const Evaluation& ev, const std::vector<std::string>& classes) {
  json per_class = json::object();
  for (std::size_t k = 0; k < classes.size(); ++k) per_class[classes[k]] = nan_to_null(ev.per_class_accuracy[k]);
  return {{"accuracy", ev.accuracy},
          {"correct", ev.correct},
          {"total", ev.total},
          {"per_class_accuracy", per_class},
          {"confusion", ev.confusion}};
}

std::string bridge_instructions(const fs::path& manifest_path, const DatasetManifest& m) {
  const fs::path base = manifest_path.parent_path();
  std::ostringstream s;
  s << "embed step (run the encoder bridge, then retry):\n"
    << "  bridge encode-text --classes " << (base / "classes.txt").string() << " --template '"
    << default_prompt(m.dataset) << "' --out " << (base / (m.text_embeddings.empty() ? "text.ncem" : m.text_embeddings)).string()
    << "\n"
    << "  bridge encode-frames --manifest " << manifest_path.string() << "\n";
  return s.str();
}

struct LoadedSet {
  DatasetManifest manifest;
  EmbeddingSet set;
};

LoadedSet load_set(const fs::path& manifest_path, bool normalize) {
  LoadedSet out;
  out.manifest = load_manifest(manifest_path);
  const fs::path base = manifest_path.parent_path();
  const auto missing = missing_embeddings(out.manifest, base);
  if (!missing.empty()) {
    std::ostringstream msg;
    msg << missing.size() << " embedding file(s) missing for " << manifest_path.string() << "\n";
    for (std::size_t i = 0; i < missing.size() && i < 10; ++i) msg << "  expected: " << missing[i].string() << "\n";
    if (missing.size() > 10) msg << "  ... and " << missing.size() - 10 << " more\n";
    msg << bridge_instructions(manifest_path, out.manifest);
    throw Error(ErrorCode::MissingArtifact, msg.str());
  }
  out.set = load_embedding_set(out.manifest, base, normalize);
  return out;
}

struct Selection {
  std::vector<EmbeddingMatrix> features;
  std::vector<std::uint32_t> labels;
  std::vector<std::string> ids;
};

Selection select_split(const EmbeddingSet& set, const std::string& split) {
  if (split != "train" && split != "test" && split != "all") {
    throw Error(ErrorCode::InvalidConfig, "split must be train, test or all");
  }
  Selection sel;
  for (const EmbeddedSample& s : set.samples) {
    if (split == "all" || s.split == split) {
      sel.features.push_back(s.features);
      sel.labels.push_back(s.label);
      sel.ids.push_back(s.id);
    }
  }
  return sel;
}

std::vector<std::size_t> argmaxes(const std::vector<Prediction>& preds) {
  std::vector<std::size_t> out;
  out.reserve(preds.size());
  for (const Prediction& p : preds) out.push_back(p.argmax);
  return out;
}

std::string predictions_jsonl(const Selection& sel, const std::vector<Prediction>& preds, bool with_probs) {
  std::string out;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    json rec{{"id", sel.ids[i]}, {"label", sel.labels[i]}, {"argmax", preds[i].argmax}, {"top5", preds[i].top_k(5)}};
    if (with_probs) rec["probabilities"] = preds[i].probabilities;
    out += rec.dump();
    out += '\n';
  }
  return out;
}

FusionConfig fusion_for(const AlphaSpec& spec, const EmbeddingSet& set, double logit_scale, unsigned workers) {
  Selection search = select_split(set, "train");
  if (search.features.empty()) search = select_split(set, "all");
  FusionConfig cfg;
  cfg.logit_scale = logit_scale;
  cfg.alphas = resolve_alphas(spec, set.timesteps(), set.text, search.features, search.labels, logit_scale, workers);
  cfg.validate();
  return cfg;
}

void write_report(const fs::path& path, const json& report) {
  if (!path.empty()) write_text_atomic(path, report.dump(2) + "\n");
}

}  // namespace

std::string default_prompt(std::string_view dataset) {
  if (dataset == "nmnist") return "a photo of the number {class}";
  return "a photo of a {class}";
}

std::vector<double> resolve_alphas(const AlphaSpec& spec, std::size_t timesteps, const EmbeddingMatrix& text,
                                   std::span<const EmbeddingMatrix> search_samples,
                                   std::span<const std::uint32_t> search_labels, double logit_scale,
                                   unsigned workers) {
  if (spec.text == "uniform") return FusionConfig::uniform(timesteps).alphas;
  if (spec.text == "grid") {
    return grid_search_alphas(text, search_samples, search_labels, logit_scale, 0.25, workers).alphas;
  }
  std::vector<double> alphas;
  std::string_view rest = spec.text;
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    std::string field(rest.substr(0, comma));
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    char* end = nullptr;
    const double v = std::strtod(field.c_str(), &end);
    if (field.empty() || end != field.c_str() + field.size()) {
      throw Error(ErrorCode::InvalidConfig, "bad timestep weight '" + field + "'");
    }
    alphas.push_back(v);
  }
  if (alphas.size() != timesteps) {
    throw Error(ErrorCode::InvalidConfig, std::to_string(alphas.size()) + " timestep weights given for T=" +
                                              std::to_string(timesteps));
  }
  return alphas;
}

json cmd_project(const ProjectOptions& opts, std::ostream& log) {
  const DatasetKind kind = parse_dataset_kind(opts.kind);
  ProjectionConfig pcfg;
  pcfg.timesteps = opts.timesteps;
  pcfg.window = parse_window(opts.window);
  pcfg.overwrite = parse_overwrite(opts.overwrite);
  if (pcfg.timesteps < 1) throw Error(ErrorCode::InvalidConfig, "timesteps must be >= 1");
  RecordingFormat format;
  format.kind = kind;
  format.width = opts.width;
  format.height = opts.height;
  format.aedat.on_when_bit_clear = !opts.aedat_on_bit_set;
  if (kind == DatasetKind::Csv && (opts.width == 0 || opts.height == 0)) {
    throw Error(ErrorCode::InvalidConfig, "csv datasets need --width and --height");
  }
  if (opts.out.empty()) throw Error(ErrorCode::InvalidConfig, "--out is required");

  const DatasetLayout layout = discover_dataset(opts.root, kind, opts.test_fraction);

  std::error_code ec;
  const bool out_existed = fs::exists(opts.out, ec);
  std::vector<fs::path> written(layout.recordings.size());
  std::vector<std::exception_ptr> errors;
  std::mutex errors_mu;

  auto work = [&](std::size_t first, std::size_t stride) {
    for (std::size_t i = first; i < layout.recordings.size(); i += stride) {
      try {
        const Recording& rec = layout.recordings[i];
        const FrameStack frames = project(load_recording(rec.path, format), pcfg);
        const fs::path target = opts.out / "frames" / (rec.id + ".ncfs");
        write_file_atomic(target, write_framestack(frames));
        written[i] = target;
      } catch (...) {
        std::lock_guard lock(errors_mu);
        errors.push_back(std::current_exception());
        return;
      }
    }
  };
  const unsigned workers = std::max(1u, opts.workers);
  if (workers == 1) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w, workers);
  }

  auto cleanup = [&] {
    for (const fs::path& p : written) {
      if (!p.empty()) fs::remove(p, ec);
    }
    if (!out_existed) fs::remove_all(opts.out, ec);
  };
  if (!errors.empty()) {
    cleanup();
    std::rethrow_exception(errors.front());
  }

  DatasetManifest m;
  m.dataset = std::string(to_string(kind));
  m.classes = layout.classes;
  m.timesteps = pcfg.timesteps;
  m.text_embeddings = "text.ncem";
  for (const Recording& rec : layout.recordings) {
    m.samples.push_back({rec.id, rec.label, rec.split, "frames/" + rec.id + ".ncfs", "embeddings/" + rec.id + ".ncem"});
  }
  const fs::path manifest_path = opts.out / "manifest.json";
  try {
    std::string classes_txt;
    for (const auto& c : m.classes) classes_txt += c + "\n";
    write_text_atomic(opts.out / "classes.txt", classes_txt);
    write_text_atomic(manifest_path, manifest_to_json(m));
  } catch (...) {
    cleanup();
    fs::remove(opts.out / "classes.txt", ec);
    throw;
  }

  log << "projected " << layout.recordings.size() << " recordings into " << (opts.out / "frames").string() << "\n"
      << bridge_instructions(manifest_path, m);

  std::size_t n_train = 0;
  for (const auto& r : layout.recordings) n_train += r.split == "train" ? 1 : 0;
  return {{"command", "project"},
          {"config",
           {{"root", opts.root.string()},
            {"kind", opts.kind},
            {"out", opts.out.string()},
            {"timesteps", opts.timesteps},
            {"window", opts.window},
            {"overwrite", opts.overwrite},
            {"width", opts.width},
            {"height", opts.height},
            {"test_fraction", opts.test_fraction},
            {"aedat_on_bit_set", opts.aedat_on_bit_set},
            {"workers", opts.workers}}},
          {"recordings", layout.recordings.size()},
          {"train_recordings", n_train},
          {"classes", m.classes},
          {"manifest", manifest_path.string()}};
}

json cmd_zeroshot(const ZeroShotOptions& opts, std::ostream& log) {
  const LoadedSet loaded = load_set(opts.manifest, !opts.no_normalize);
  const EmbeddingSet& set = loaded.set;
  const Selection sel = select_split(set, opts.split);
  if (sel.features.empty()) throw Error(ErrorCode::EmptyEvaluation, "no samples in split '" + opts.split + "'");
  const FusionConfig cfg = fusion_for(opts.alpha, set, opts.logit_scale, opts.workers);

  std::vector<Prediction> preds;
  if (!opts.checkpoint.empty()) {
    const AdapterParams params = read_ncad(read_file_bytes(opts.checkpoint));
    preds = classify_adapted_batch(set.text, sel.features, params, cfg, opts.workers);
  } else {
    preds = classify_batch(set.text, sel.features, cfg, opts.workers);
  }
  const Evaluation ev = evaluate(argmaxes(preds), sel.labels, set.num_classes());
  if (!opts.predictions.empty()) {
    write_text_atomic(opts.predictions, predictions_jsonl(sel, preds, opts.with_probabilities));
  }
  log << "zero-shot accuracy on " << sel.features.size() << " samples: " << ev.accuracy << " (kernels: "
      << simd::to_string(simd::active_isa()) << ")\n";

  json report{{"command", "zeroshot"},
              {"config",
               {{"manifest", opts.manifest.string()},
                {"split", opts.split},
                {"alpha", opts.alpha.text},
                {"alphas", cfg.alphas},
                {"logit_scale", cfg.logit_scale},
                {"normalize", !opts.no_normalize},
                {"checkpoint", opts.checkpoint.string()},
                {"workers", opts.workers}}},
              {"dataset", set.dataset},
              {"classes", set.classes}};
  report.update(evaluation_json(ev, set.classes));
  write_report(opts.report, report);
  return report;
}

json cmd_fewshot(const FewShotOptions& opts, std::ostream& log) {
  const LoadedSet loaded = load_set(opts.manifest, !opts.no_normalize);
  const EmbeddingSet& set = loaded.set;
  const Selection test = select_split(set, "test");
  if (test.features.empty()) throw Error(ErrorCode::EmptyEvaluation, "few-shot evaluation needs a test split");

  TrainConfig tcfg;
  tcfg.shots = opts.shots;
  tcfg.epochs = opts.epochs;
  tcfg.learning_rate = opts.learning_rate;
  tcfg.patience = opts.patience;
  tcfg.val_per_class = opts.val_per_class;
  tcfg.seed = opts.seed;
  tcfg.bottleneck = opts.bottleneck;
  tcfg.residual_ratio = opts.residual_ratio;
  tcfg.lif = {opts.leak, opts.threshold, opts.surrogate_width, parse_reset(opts.reset)};
  tcfg.lif.validate();
  tcfg.detach_reset = opts.detach_reset;
  tcfg.down_bound = opts.down_bound;
  tcfg.fusion = fusion_for(opts.alpha, set, opts.logit_scale, opts.workers);
  tcfg.workers = opts.workers;

  const auto zero_preds = classify_batch(set.text, test.features, tcfg.fusion, opts.workers);
  const Evaluation before = evaluate(argmaxes(zero_preds), test.labels, set.num_classes());

  AdapterParams params;
  json training = nullptr;
  if (opts.shots == 0) {
    AdapterInit init;
    init.dim = set.dim();
    init.bottleneck = opts.bottleneck;
    init.residual_ratio = 0.0f;
    init.lif = tcfg.lif;
    init.down_bound = opts.down_bound;
    init.seed = opts.seed;
    params = init_adapter(init);
    log << "shots=0: no training, writing an identity adapter (residual ratio 0)\n";
  } else {
    const FewShotResult result = train_few_shot(set, tcfg);
    params = result.params;
    json curve = json::array();
    for (const EpochLog& e : result.curve) {
      curve.push_back({{"epoch", e.epoch},
                       {"train_loss", nan_to_null(e.train_loss)},
                       {"val_loss", e.val_loss},
                       {"val_accuracy", e.val_accuracy}});
    }
    training = {{"best_epoch", result.best_epoch},
                {"best_val_accuracy", result.best_val_accuracy},
                {"epochs_run", result.curve.size() - 1},
                {"train_samples", result.train_indices.size()},
                {"val_samples", result.val_indices.size()},
                {"curve", curve}};
    log << "trained " << result.curve.size() - 1 << " epochs, best validation accuracy " << result.best_val_accuracy
        << " at epoch " << result.best_epoch << "\n";
  }

  const auto after_preds = classify_adapted_batch(set.text, test.features, params, tcfg.fusion, opts.workers);
  const Evaluation after = evaluate(argmaxes(after_preds), test.labels, set.num_classes());

  AdapterParams bypass = params;
  bypass.residual_ratio = 0.0f;
  const auto bypass_preds = classify_adapted_batch(set.text, test.features, bypass, tcfg.fusion, opts.workers);
  const bool bypass_matches = argmaxes(bypass_preds) == argmaxes(zero_preds);
  if (!bypass_matches) {
    throw Error(ErrorCode::NonFiniteState, "residual ratio 0 did not reproduce the zero-shot predictions");
  }

  write_file_atomic(opts.checkpoint, write_ncad(params));
  log << "zero-shot " << before.accuracy << " -> few-shot " << after.accuracy << "; checkpoint "
      << opts.checkpoint.string() << "\n";

  json report{{"command", "fewshot"},
              {"config",
               {{"manifest", opts.manifest.string()},
                {"shots", opts.shots},
                {"epochs", opts.epochs},
                {"learning_rate", opts.learning_rate},
                {"patience", opts.patience},
                {"val_per_class", opts.val_per_class},
                {"seed", opts.seed},
                {"bottleneck", params.bottleneck},
                {"residual_ratio", opts.residual_ratio},
                {"leak", opts.leak},
                {"threshold", opts.threshold},
                {"surrogate_width", opts.surrogate_width},
                {"reset", opts.reset},
                {"detach_reset", opts.detach_reset},
                {"down_bound", opts.down_bound},
                {"alpha", opts.alpha.text},
                {"alphas", tcfg.fusion.alphas},
                {"logit_scale", opts.logit_scale},
                {"normalize", !opts.no_normalize},
                {"checkpoint", opts.checkpoint.string()},
                {"workers", opts.workers}}},
              {"dataset", set.dataset},
              {"zero_shot_accuracy", before.accuracy},
              {"few_shot_accuracy", after.accuracy},
              {"bypass_accuracy", evaluate(argmaxes(bypass_preds), test.labels, set.num_classes()).accuracy},
              {"bypass_matches_zero_shot", bypass_matches},
              {"few_shot", evaluation_json(after, set.classes)},
              {"training", training}};
  write_report(opts.report, report);
  return report;
}

json cmd_eval(const EvalOptions& opts, std::ostream& log) {
  const DatasetManifest m = load_manifest(opts.manifest);
  std::ifstream in(opts.predictions);
  if (!in) throw Error(ErrorCode::MissingArtifact, "cannot read predictions " + opts.predictions.string());

  std::vector<std::size_t> predicted;
  std::vector<std::uint32_t> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json rec = json::parse(line);
      const std::string id = rec.at("id").get<std::string>();
      const auto it = std::find_if(m.samples.begin(), m.samples.end(), [&](const SampleRecord& s) { return s.id == id; });
      if (it == m.samples.end()) {
        throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": id '" + id + "' not in manifest");
      }
      predicted.push_back(rec.at("argmax").get<std::size_t>());
      labels.push_back(it->label);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  const Evaluation ev = evaluate(predicted, labels, m.classes.size());
  log << "accuracy " << ev.accuracy << " over " << ev.total << " predictions\n";
  json report{{"command", "eval"},
              {"config", {{"manifest", opts.manifest.string()}, {"predictions", opts.predictions.string()}}},
              {"classes", m.classes}};
  report.update(evaluation_json(ev, m.classes));
  write_report(opts.report, report);
  return report;
}

json cmd_reproduce(const ReproduceOptions& opts, std::ostream& log) {
  struct Target {
    std::string dataset;
    fs::path manifest;
    double zero_shot;
    double few_shot;
  };
  // Published accuracies (percent) for the two desk-scale datasets.
  const std::vector<Target> targets{{"nmnist", opts.nmnist, 45.41, 90.40},
                                    {"cifar10dvs", opts.cifar10dvs, 25.31, 60.72}};

  std::ostringstream missing;
  for (const Target& t : targets) {
    if (t.manifest.empty()) {
      missing << "  " << t.dataset << ": no manifest given (--" << t.dataset << "); create one with\n"
              << "    evshot project --kind " << t.dataset << " --root <dataset dir> --out <dir>\n";
      continue;
    }
    if (!fs::exists(t.manifest)) {
      missing << "  " << t.dataset << ": manifest " << t.manifest.string() << " not found\n";
      continue;
    }
    const DatasetManifest m = load_manifest(t.manifest);
    const auto absent = missing_embeddings(m, t.manifest.parent_path());
    if (!absent.empty()) {
      missing << "  " << t.dataset << ": " << absent.size() << " embedding file(s) missing, e.g. "
              << absent.front().string() << "\n"
              << bridge_instructions(t.manifest, m);
    }
  }
  if (!missing.str().empty()) throw Error(ErrorCode::MissingArtifact, "missing assets:\n" + missing.str());

  json rows = json::array();
  for (const Target& t : targets) {
    ZeroShotOptions z;
    z.manifest = t.manifest;
    z.workers = opts.workers;
    const json zs = cmd_zeroshot(z, log);

    FewShotOptions f;
    f.manifest = t.manifest;
    f.shots = opts.shots;
    f.seed = opts.seed;
    f.workers = opts.workers;
    f.checkpoint = t.manifest.parent_path() / "reproduce_adapter.ncad";
    const json fsr = cmd_fewshot(f, log);

    for (const auto& [setting, published, measured] :
         {std::tuple{std::string("zero-shot"), t.zero_shot, zs["accuracy"].get<double>() * 100.0},
          std::tuple{std::to_string(opts.shots) + "-shot", t.few_shot, fsr["few_shot_accuracy"].get<double>() * 100.0}}) {
      const double delta = measured - published;
      rows.push_back({{"dataset", t.dataset},
                      {"setting", setting},
                      {"published", published},
                      {"measured", measured},
                      {"delta", delta},
                      {"status", std::abs(delta) <= opts.tolerance ? "PASS" : "FAIL"}});
      log << t.dataset << " " << setting << ": published " << published << "%, measured " << measured << "%, delta "
          << delta << "\n";
    }
  }
  json report{{"command", "reproduce"},
              {"config",
               {{"nmnist", opts.nmnist.string()},
                {"cifar10dvs", opts.cifar10dvs.string()},
                {"shots", opts.shots},
                {"seed", opts.seed},
                {"tolerance", opts.tolerance},
                {"workers", opts.workers}}},
              {"rows", rows}};
  write_report(opts.report, report);
  return report;
}

}  // namespace evshot::cli
