// Copyright (c) 2026 The devc Authors
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

#include "cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "devc/analysis.hpp"
#include "devc/error.hpp"
#include "devc/evaluation.hpp"
#include "devc/pipeline.hpp"
#include "devc/schedule.hpp"

namespace devc::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

json preset_config(const std::string& preset) {
  const bool paper = preset == "paper";
  if (!paper && preset != "toy") throw UsageError("unknown preset '" + preset + "' (expected toy or paper)");
  const EncoderDims dims = paper ? EncoderDims::paper() : EncoderDims::toy();
  const DecoderConfig dec = paper ? DecoderConfig::paper(dims.total()) : DecoderConfig::toy(dims.total());
  json decoder = to_json(dec);
  decoder.erase("conditioning_dim");
  const CorpusConfig corpus = paper ? CorpusConfig::paper_shaped() : CorpusConfig{};
  TrainConfig train;
  if (paper) {
    train.batch_size = 16;
    train.steps = 1200000;
    train.crop_segments = 16;
  } else {
    train.steps = 30000;
    train.batch_size = 8;
    train.crop_segments = 8;
    train.learning_rate = 1e-3;
    train.waveform_scale = 3.0;
  }
  json tj = to_json(train);
  for (const char* k : {"manifest", "embeddings", "out_dir"}) tj.erase(k);
  return {{"preset", preset},
          {"seed", 1},
          {"paths", {{"corpus", "corpus"}, {"embeddings", "embeddings"}, {"checkpoints", "checkpoints"}, {"reports", "reports"}}},
          {"dims", to_json(dims)},
          {"decoder", decoder},
          {"schedule", {{"steps", kDefaultSteps}, {"beta_start", kDefaultBetaStart}, {"beta_end", kDefaultBetaEnd}}},
          {"corpus",
           {{"train_per_cell", corpus.train_per_cell},
            {"reference_per_cell", corpus.reference_per_cell},
            {"test_per_cell", corpus.test_per_cell},
            {"generator", to_json(corpus.generator)}}},
          {"train", tj},
          {"evaluate", {{"pairs_per_cell", 16}, {"self_recon_pairs", 16}, {"emotion_source", "source"}, {"baseline", true}}},
          {"analyze", {{"max_per_speaker", 240}, {"export_per_speaker", 50}}}};
}

// Objects merge key by key; any key absent from the preset is rejected.
// Arrays and scalars replace.
void merge_checked(json& base, const json& over, const std::string& where) {
  if (!over.is_object()) throw UsageError("config " + where + " must be an object");
  for (const auto& [k, v] : over.items()) {
    const std::string path = where.empty() ? k : where + "." + k;
    if (!base.contains(k)) throw UsageError("unknown config key '" + path + "'");
    if (base[k].is_object() && v.is_object()) {
      merge_checked(base[k], v, path);
    } else {
      if (base[k].is_object() != v.is_object()) throw UsageError("config key '" + path + "' has the wrong type");
      base[k] = v;
    }
  }
}

struct Context {
  std::ostream& out;
  std::ostream& err;
  json config;

  fs::path path(const char* key) const { return config.at("paths").at(key).get<std::string>(); }
  EncoderDims dims() const { return encoder_dims_from_json(config.at("dims")); }
  DecoderConfig decoder() const {
    json d = config.at("decoder");
    d["conditioning_dim"] = dims().total();
    return decoder_config_from_json(d);
  }
  ScheduleSpec schedule() const {
    const auto& s = config.at("schedule");
    return {s.at("steps").get<int>(), s.at("beta_start").get<double>(), s.at("beta_end").get<double>()};
  }
  void echo(const std::string& command) const {
    err << "effective-config " << command << ": " << config.dump() << '\n';
  }
};

void require_fresh_dir(const fs::path& dir) {
  if (fs::exists(dir) && !(fs::is_directory(dir) && fs::is_empty(dir))) {
    throw DataError("output directory " + dir.string() + " already exists and is not empty");
  }
}

fs::path manifest_file(const fs::path& p) { return fs::is_directory(p) ? p / "manifest.json" : p; }

std::string join(const std::vector<double>& v) {
  std::string s = "[";
  char buf[32];
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.10g", v[i]);
    s += (i ? ", " : "") + std::string(buf);
  }
  return s + "]";
}

// ---------------------------------------------------------------------------

void cmd_synth(Context& ctx) {
  ctx.echo("synth-corpus");
  const json& c = ctx.config.at("corpus");
  CorpusConfig cfg;
  json gen = to_json(GeneratorParams::defaults());
  merge_checked(gen, c.at("generator"), "corpus.generator");
  cfg.generator = generator_params_from_json(gen);
  cfg.train_per_cell = c.at("train_per_cell");
  cfg.reference_per_cell = c.at("reference_per_cell");
  cfg.test_per_cell = c.at("test_per_cell");
  const fs::path out = ctx.path("corpus");
  require_fresh_dir(out);
  const CorpusManifest m = generate_corpus(cfg, out);
  ctx.out << "manifest " << (out / "manifest.json").string() << '\n';
  ctx.out << "utterances " << m.utterances.size() << '\n';
}

void cmd_embed(Context& ctx, const std::string& external) {
  ctx.echo("embed");
  const CorpusManifest m = load_manifest(manifest_file(ctx.path("corpus")));
  const EncoderDims dims = ctx.dims();
  const fs::path out = ctx.path("embeddings");
  require_fresh_dir(out);
  const Backend backend = parse_backend(ctx.config.at("train").at("backend").get<std::string>());
  const std::vector<Split> all = {Split::kTrain, Split::kReference, Split::kTest, Split::kHeldout};
  EmbeddingStore store;
  if (backend == Backend::kOracle) {
    store = embed_corpus(m, Encoders::oracle(m.config.generator, dims), all);
  } else {
    if (external.empty()) throw UsageError("embed with the external backend needs --external STORE");
    const Encoders enc = Encoders::external(load_store(external), dims, m.config.generator.hop);
    store = embed_corpus(m, enc, all);
  }
  save_store(store, out);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(checksum(store)));
  ctx.out << "embeddings " << out.string() << '\n' << "records " << store.size() << '\n' << "checksum " << buf << '\n';
}

void cmd_train(Context& ctx, const std::string& resume) {
  ctx.echo("train");
  TrainConfig tc;
  merge_train_config(tc, ctx.config.at("train"));
  tc.manifest = manifest_file(ctx.path("corpus"));
  tc.embeddings = ctx.path("embeddings");
  tc.out_dir = ctx.path("checkpoints");
  const CorpusManifest m = load_manifest(tc.manifest);
  const EmbeddingStore store = load_store(tc.embeddings);
  const EncoderDims dims = ctx.dims();
  const int hop = m.config.generator.hop;
  Checkpoint init;
  if (!resume.empty()) {
    init = load_checkpoint(resume);
    if (!(init.dims == dims)) throw ShapeError("resume checkpoint dims differ from the configured dims");
  } else {
    require_fresh_dir(tc.out_dir);
    init = initial_checkpoint(ctx.decoder(), ctx.schedule(), dims, hop, tc.seed);
    init.backend = tc.backend;
    if (tc.backend == Backend::kOracle) init.generator = m.config.generator;
  }
  const auto data = build_training_set(m, store, dims, hop);
  const auto result = train(tc, std::move(init), data, [&](const StepRecord& r) {
    if (r.step % (tc.log_every * 10) == 0 || r.step == tc.steps) {
      ctx.err << "step " << r.step << " loss " << r.loss << " t " << r.wallclock << "s\n";
    }
  });
  ctx.out << "checkpoint " << result.checkpoint.string() << '\n';
}

void cmd_convert(Context& ctx, const ConversionRequest& req, const std::string& embeddings, bool force) {
  ctx.echo("convert");
  if (fs::exists(req.output) && !force) {
    throw DataError("output " + req.output.string() + " exists (pass --force to overwrite)");
  }
  std::optional<EmbeddingStore> store;
  if (!embeddings.empty()) store = load_store(embeddings);
  const Waveform out = convert(req, store ? &*store : nullptr);
  ctx.out << "output " << req.output.string() << '\n' << "samples " << out.size() << '\n';
}

void cmd_evaluate(Context& ctx, const fs::path& checkpoint, const std::string& wav_dir) {
  ctx.echo("evaluate");
  const json& e = ctx.config.at("evaluate");
  EvalConfig ec;
  ec.pairs_per_cell = e.at("pairs_per_cell");
  ec.self_recon_pairs = e.at("self_recon_pairs");
  ec.emotion_source = parse_emotion_source(e.at("emotion_source").get<std::string>());
  ec.seed = ctx.config.at("seed");
  if (!wav_dir.empty()) ec.wav_dir = wav_dir;
  const CorpusManifest m = load_manifest(manifest_file(ctx.path("corpus")));
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  std::optional<EmbeddingStore> store;
  if (ckpt.backend == Backend::kExternal) store = load_store(ctx.path("embeddings"));
  const fs::path out = ctx.path("reports");
  require_fresh_dir(out);
  const Converter conv(ckpt, encoders_for(ckpt, store ? &*store : nullptr));
  std::optional<Converter> base;
  if (e.at("baseline").get<bool>()) {
    Checkpoint init = initial_checkpoint(ckpt.decoder, ckpt.schedule, ckpt.dims, ckpt.hop, ckpt.seed);
    init.backend = ckpt.backend;
    init.generator = ckpt.generator;
    base.emplace(init, encoders_for(init, store ? &*store : nullptr));
  }
  const EvalReport report = evaluate(m, conv, ec, base ? &*base : nullptr);
  fs::create_directories(out);
  std::ofstream(out / "report.json") << to_json(report).dump(1) << '\n';
  const std::string table = format_table(report);
  std::ofstream(out / "report.txt") << table;
  ctx.out << table << "report " << (out / "report.json").string() << '\n';
}

void cmd_analyze(Context& ctx, const std::vector<int>& speakers, const std::string& export_path) {
  ctx.echo("analyze");
  const json& a = ctx.config.at("analyze");
  const std::uint64_t seed = ctx.config.at("seed");
  const CorpusManifest m = load_manifest(manifest_file(ctx.path("corpus")));
  const EmbeddingStore store = load_store(ctx.path("embeddings"));
  const fs::path out = ctx.path("reports");
  require_fresh_dir(out);
  fs::create_directories(out);
  std::vector<int> list = speakers;
  if (list.empty()) {
    for (int s = 0; s < m.config.generator.num_speakers(); ++s) list.push_back(s);
  }
  json tables = json::array();
  std::string text;
  bool all_dominant = true;
  for (int s : list) {
    const auto emb = speaker_embeddings(store, m, s, a.at("max_per_speaker").get<std::size_t>(), seed);
    const DistanceTable t = distance_table(emb, s, seed);
    const auto dom = diagonal_dominance(t);
    all_dominant = all_dominant && dom.dominant;
    tables.push_back(to_json(t));
    text += format_table(t) + "diagonal_dominance " + (dom.dominant ? "true" : "false") + "\n";
    for (const auto& v : dom.violations) text += "  " + v + "\n";
    text += "\n";
  }
  std::ofstream(out / "analysis.json") << json{{"tables", tables}, {"all_dominant", all_dominant}}.dump(1) << '\n';
  std::ofstream(out / "analysis.txt") << text;
  ctx.out << text;
  if (!export_path.empty()) {
    std::vector<std::string> ids;
    const auto per = a.at("export_per_speaker").get<std::size_t>();
    for (int s : list) {
      for (const auto& e : speaker_embeddings(store, m, s, per, seed)) ids.push_back(e.id);
    }
    export_embeddings(store, ids, EmbeddingKind::kSpeaker, export_path);
    ctx.out << "exported " << ids.size() << " rows to " << export_path << '\n';
  }
}

void cmd_schedule(Context& ctx) {
  ctx.echo("schedule-info");
  const ScheduleSpec spec = ctx.schedule();
  const NoiseSchedule s = spec.build();
  std::vector<double> alpha, sigma;
  for (int t = 1; t <= s.steps(); ++t) {
    alpha.push_back(s.alpha(t));
    sigma.push_back(s.sigma(t));
  }
  ctx.out << "T = " << s.steps() << '\n'
          << "beta = " << join(s.betas()) << '\n'
          << "alpha = " << join(alpha) << '\n'
          << "alpha_bar = " << join(s.alpha_bars()) << '\n'
          << "sigma = " << join(sigma) << '\n';
}

int report(std::ostream& err, const char* kind, const std::string& msg, int code) {
  err << "error[" << kind << "]: " << msg << '\n';
  return code;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Expressive voice conversion with a conditional diffusion decoder", "devc"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path, preset;
  std::uint64_t seed = 0;
  app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--preset", preset, "Model preset: toy or paper");
  auto* seed_opt = app.add_option("--seed", seed, "Seed (stage RNG, corpus master seed)");

  std::string corpus, embeddings, checkpoints, reports;
  auto add_paths = [&](CLI::App* sub, bool c, bool e, bool k, bool r) {
    if (c) sub->add_option("--manifest,--corpus", corpus, "Corpus directory or manifest.json");
    if (e) sub->add_option("--embeddings", embeddings, "Embedding store directory");
    if (k) sub->add_option("--checkpoints", checkpoints, "Checkpoint directory");
    if (r) sub->add_option("--reports", reports, "Report directory");
  };

  auto* synth = app.add_subcommand("synth-corpus", "Render the synthetic corpus");
  std::string synth_out;
  int train_pc = -1, ref_pc = -1, test_pc = -1;
  synth->add_option("--out", synth_out, "Output directory");
  synth->add_option("--train-per-cell", train_pc);
  synth->add_option("--reference-per-cell", ref_pc);
  synth->add_option("--test-per-cell", test_pc);

  auto* embed = app.add_subcommand("embed", "Encode the corpus into an embedding store");
  std::string embed_out, external, backend;
  add_paths(embed, true, false, false, false);
  embed->add_option("--out", embed_out, "Output store directory");
  embed->add_option("--backend", backend, "oracle or external");
  embed->add_option("--external", external, "Externally computed store to ingest");

  auto* train_cmd = app.add_subcommand("train", "Train the diffusion decoder");
  std::string train_out, resume;
  int steps = -1, batch = -1, crop = -1, ckpt_every = -1;
  double lr = -1.0;
  add_paths(train_cmd, true, true, false, false);
  train_cmd->add_option("--out", train_out, "Checkpoint directory");
  train_cmd->add_option("--steps", steps);
  train_cmd->add_option("--batch-size", batch);
  train_cmd->add_option("--learning-rate,--lr", lr);
  train_cmd->add_option("--crop-segments", crop);
  train_cmd->add_option("--checkpoint-every", ckpt_every);
  train_cmd->add_option("--resume", resume, "Checkpoint to continue from");

  auto* conv = app.add_subcommand("convert", "Convert one utterance");
  ConversionRequest req;
  std::string emotion_from = "source", conv_ckpt, conv_emb;
  bool force = false;
  conv->add_option("--checkpoint", conv_ckpt, "Checkpoint JSON")->required();
  conv->add_option("--source", req.source, "Source utterance WAV")->required();
  conv->add_option("--reference", req.reference, "Reference utterance WAV of the target speaker")->required();
  conv->add_option("--out", req.output, "Output WAV")->required();
  conv->add_option("--emotion-from", emotion_from, "Emotion vector source: source or reference")
      ->check(CLI::IsMember({"source", "reference"}));
  conv->add_option("--embeddings", conv_emb, "Embedding store (external backend)");
  conv->add_flag("--force", force, "Overwrite an existing output file");

  auto* eval = app.add_subcommand("evaluate", "Objective evaluation over the test split");
  std::string eval_ckpt, wav_dir, eval_emotion;
  int pairs = -1, self_pairs = -1;
  bool no_baseline = false;
  add_paths(eval, true, true, false, false);
  eval->add_option("--checkpoint", eval_ckpt, "Checkpoint JSON")->required();
  eval->add_option("--out", reports, "Report directory");
  eval->add_option("--pairs-per-cell", pairs);
  eval->add_option("--self-recon-pairs", self_pairs);
  eval->add_option("--emotion-from", eval_emotion)->check(CLI::IsMember({"source", "reference"}));
  eval->add_option("--wav-dir", wav_dir, "Also write converted WAVs here");
  eval->add_flag("--no-baseline", no_baseline, "Skip the untrained-model self-reconstruction baseline");

  auto* analyze = app.add_subcommand("analyze", "Emotion-pair distance tables and embedding export");
  std::vector<int> speakers;
  std::string export_path;
  int max_per = -1;
  add_paths(analyze, true, true, false, false);
  analyze->add_option("--out", reports, "Report directory");
  analyze->add_option("--speakers", speakers, "Speaker ids (default: all)");
  analyze->add_option("--max-per-speaker", max_per);
  analyze->add_option("--export", export_path, "Write speaker vectors as TSV");

  auto* sched = app.add_subcommand("schedule-info", "Print the noise schedule tables");
  int T = -1;
  double bs = -1.0, be = -1.0;
  sched->add_option("--T,--steps", T);
  sched->add_option("--beta-start", bs);
  sched->add_option("--beta-end", be);

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    if (!rev.empty()) rev.pop_back();  // program name
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    return report(err, "usage", e.what(), 1);
  }

  try {
    json file_cfg = json::object();
    if (!config_path.empty()) {
      std::ifstream is(config_path);
      try {
        file_cfg = json::parse(is);
      } catch (const json::exception& e) {
        throw UsageError("config " + config_path + ": " + e.what());
      }
      if (!file_cfg.is_object()) throw UsageError("config file must hold a JSON object");
    }
    if (preset.empty()) preset = file_cfg.value("preset", std::string("toy"));
    Context ctx{out, err, preset_config(preset)};
    merge_checked(ctx.config, file_cfg, "");
    ctx.config["preset"] = preset;
    json& cfg = ctx.config;
    if (seed_opt->count() > 0) {
      cfg["seed"] = seed;
      cfg["train"]["seed"] = seed;
      cfg["corpus"]["generator"]["master_seed"] = seed;
    }
    if (!corpus.empty()) cfg["paths"]["corpus"] = corpus;
    if (!embeddings.empty()) cfg["paths"]["embeddings"] = embeddings;
    if (!checkpoints.empty()) cfg["paths"]["checkpoints"] = checkpoints;
    if (!reports.empty()) cfg["paths"]["reports"] = reports;

    if (*synth) {
      if (!synth_out.empty()) cfg["paths"]["corpus"] = synth_out;
      if (train_pc >= 0) cfg["corpus"]["train_per_cell"] = train_pc;
      if (ref_pc >= 0) cfg["corpus"]["reference_per_cell"] = ref_pc;
      if (test_pc >= 0) cfg["corpus"]["test_per_cell"] = test_pc;
      cmd_synth(ctx);
    } else if (*embed) {
      if (!embed_out.empty()) cfg["paths"]["embeddings"] = embed_out;
      if (!backend.empty()) cfg["train"]["backend"] = std::string(backend_name(parse_backend(backend)));
      cmd_embed(ctx, external);
    } else if (*train_cmd) {
      if (!train_out.empty()) cfg["paths"]["checkpoints"] = train_out;
      if (steps >= 0) cfg["train"]["steps"] = steps;
      if (batch >= 0) cfg["train"]["batch_size"] = batch;
      if (crop >= 0) cfg["train"]["crop_segments"] = crop;
      if (ckpt_every >= 0) cfg["train"]["checkpoint_every"] = ckpt_every;
      if (lr >= 0.0) cfg["train"]["learning_rate"] = lr;
      cmd_train(ctx, resume);
    } else if (*conv) {
      req.checkpoint = conv_ckpt;
      req.emotion_source = parse_emotion_source(emotion_from);
      req.seed = seed_opt->count() > 0 ? seed : cfg.at("seed").get<std::uint64_t>();
      cfg["convert"] = {{"checkpoint", conv_ckpt},
                        {"source", req.source.string()},
                        {"reference", req.reference.string()},
                        {"output", req.output.string()},
                        {"emotion_source", emotion_from},
                        {"seed", req.seed}};
      cmd_convert(ctx, req, conv_emb, force);
    } else if (*eval) {
      if (pairs >= 0) cfg["evaluate"]["pairs_per_cell"] = pairs;
      if (self_pairs >= 0) cfg["evaluate"]["self_recon_pairs"] = self_pairs;
      if (!eval_emotion.empty()) cfg["evaluate"]["emotion_source"] = eval_emotion;
      if (no_baseline) cfg["evaluate"]["baseline"] = false;
      cmd_evaluate(ctx, eval_ckpt, wav_dir);
    } else if (*analyze) {
      if (max_per >= 0) cfg["analyze"]["max_per_speaker"] = max_per;
      cmd_analyze(ctx, speakers, export_path);
    } else if (*sched) {
      if (T >= 0) cfg["schedule"]["steps"] = T;
      if (bs >= 0.0) cfg["schedule"]["beta_start"] = bs;
      if (be >= 0.0) cfg["schedule"]["beta_end"] = be;
      cmd_schedule(ctx);
    }
  } catch (const UsageError& e) {
    return report(err, "usage", e.what(), 1);
  } catch (const NumericError& e) {
    return report(err, "numeric", e.what(), 3);
  } catch (const DataError& e) {
    return report(err, "data", e.what(), 2);
  } catch (const Error& e) {
    return report(err, "data", e.what(), 2);
  } catch (const json::exception& e) {
    return report(err, "data", e.what(), 2);
  } catch (const fs::filesystem_error& e) {
    return report(err, "data", e.what(), 2);
  }
  return 0;
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args(argv, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace devc::cli
