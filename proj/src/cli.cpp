// Copyright 2026 The Translit Authors. All Rights Reserved.
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

#include "translit/cli.hpp"

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <sstream>

#include "translit/corpus.hpp"
#include "translit/decoding.hpp"
#include "translit/finetune.hpp"
#include "translit/llm_client.hpp"
#include "translit/manifest.hpp"
#include "translit/metrics.hpp"
#include "translit/mlm.hpp"
#include "translit/model.hpp"
#include "translit/report.hpp"
#include "translit/splitter.hpp"
#include "translit/tokenizer.hpp"

namespace fs = std::filesystem;

namespace translit {

namespace {

// ---------------------------------------------------------------------------
// Config files: flat key=value lines. Keys name long flags without the
// leading dashes; a flag given on the command line wins.

std::vector<std::pair<std::string, std::string>> read_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path.string());
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  int line_no = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected key=value");
    }
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

std::vector<std::string> expand_config(std::vector<std::string> args) {
  fs::path config;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) config = args[i + 1];
    if (args[i].starts_with("--config=")) config = args[i].substr(9);
  }
  if (config.empty()) return args;
  for (const auto& [key, value] : read_config_file(config)) {
    const std::string flag = "--" + key;
    const bool given = std::any_of(args.begin(), args.end(), [&](const std::string& a) {
      return a == flag || a.starts_with(flag + "=");
    });
    if (!given) args.push_back(flag + "=" + value);
  }
  return args;
}

/// Effective value of every long option, for the manifest.
nlohmann::json effective_config(const CLI::App& app) {
  nlohmann::json j = nlohmann::json::object();
  for (const CLI::Option* opt : app.get_options()) {
    const auto& names = opt->get_lnames();
    if (names.empty() || names[0] == "help" || names[0] == "config") continue;
    if (opt->count() > 0) {
      const auto& results = opt->results();
      j[names[0]] = results.size() == 1 ? nlohmann::json(results[0]) : nlohmann::json(results);
    } else {
      j[names[0]] = opt->get_default_str();
    }
  }
  return j;
}

// ---------------------------------------------------------------------------
// File helpers.

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

void write_pairs(const fs::path& path, std::span<const SentencePair> pairs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_jsonl(out, pairs);
}

CorpusFormat format_for(const fs::path& path) {
  return path.extension() == ".tsv" ? CorpusFormat::kTsv : CorpusFormat::kJsonl;
}

/// Pairs from a JSONL/TSV file, or the chosen subset of a split directory.
std::vector<SentencePair> load_pairs(const fs::path& path, std::string_view subset = "train") {
  if (fs::is_directory(path)) {
    const auto split = read_split(path);
    if (subset == "train") return split.train;
    if (subset == "val_small") return split.val_small;
    if (subset == "test_small") return split.test_small;
    if (subset == "val_full") return split.val_full;
    if (subset == "test_full") return split.test_full;
    throw PreconditionError("unknown subset " + std::string(subset));
  }
  auto result = ingest(path, format_for(path));
  if (!result.errors.empty()) {
    throw FormatError(path.string() + ":" + std::to_string(result.errors[0].line_no) + ": " +
                      result.errors[0].message);
  }
  return std::move(result.pairs);
}

std::string manifest_name(const std::string& command) { return command + ".manifest.json"; }

struct ModelFlags {
  int d_model = 128;
  int heads = 4;
  int enc_layers = 3;
  int dec_layers = 3;
  int ffn_dim = 256;
  int max_len = kDefaultMaxLen;
  double dropout = 0.1;

  void add(CLI::App* app) {
    app->add_option("--d-model", d_model, "Model width")->capture_default_str();
    app->add_option("--heads", heads, "Attention heads")->capture_default_str();
    app->add_option("--enc-layers", enc_layers, "Encoder layers")->capture_default_str();
    app->add_option("--dec-layers", dec_layers, "Decoder layers")->capture_default_str();
    app->add_option("--ffn-dim", ffn_dim, "Feed-forward width")->capture_default_str();
    app->add_option("--max-len", max_len, "Maximum sequence length in tokens")->capture_default_str();
    app->add_option("--dropout", dropout, "Dropout rate")->capture_default_str();
  }

  ModelConfig config(int vocab_size, std::uint64_t seed) const {
    ModelConfig c;
    c.vocab_size = vocab_size;
    c.d_model = d_model;
    c.n_heads = heads;
    c.enc_layers = enc_layers;
    c.dec_layers = dec_layers;
    c.ffn_dim = ffn_dim;
    c.max_len = max_len;
    c.dropout_rate = dropout;
    c.seed = seed;
    return c;
  }
};

void add_config_flag(CLI::App* app) {
  app->add_option("--config", "Flat key=value file; command-line flags take precedence");
}

// ---------------------------------------------------------------------------
// Subcommands. Each registers its flags and returns the action to run.

using Action = std::function<int(std::ostream&, std::ostream&)>;

Action add_ingest(CLI::App& root) {
  auto* app = root.add_subcommand("ingest", "Normalize a parallel corpus file into JSONL");
  struct Opts {
    fs::path input, output_dir;
    std::string format, origin = "other";
  };
  auto o = std::make_shared<Opts>();
  app->add_option("--input", o->input, "Corpus file (TSV source<TAB>target, or JSONL)")->required()->check(CLI::ExistingFile);
  app->add_option("--format", o->format, "tsv or jsonl (default: from the file extension)")->check(CLI::IsMember({"tsv", "jsonl"}));
  app->add_option("--origin", o->origin, "rup, dakshina, synthetic or other")->capture_default_str()->check(CLI::IsMember({"rup", "dakshina", "synthetic", "other"}));
  app->add_option("--output-dir", o->output_dir, "Output directory")->required();
  add_config_flag(app);
  return [o, app](std::ostream& out, std::ostream&) {
    RunManifest manifest("ingest");
    manifest.set_config(effective_config(*app));
    manifest.add_input(o->input);
    const auto format = o->format.empty() ? format_for(o->input) : parse_format(o->format);
    const auto result = ingest(o->input, format, parse_origin(o->origin));
    fs::create_directories(o->output_dir);
    write_pairs(o->output_dir / "pairs.jsonl", result.pairs);
    std::string rejects;
    for (const auto& e : result.errors) {
      rejects += nlohmann::json{{"line_no", e.line_no}, {"message", e.message}}.dump() + "\n";
    }
    write_text(o->output_dir / "rejects.jsonl", rejects);
    manifest.add_output(o->output_dir / "pairs.jsonl");
    manifest.add_output(o->output_dir / "rejects.jsonl");
    manifest.write(o->output_dir / manifest_name("ingest"));
    out << "ingested " << result.pairs.size() << " pairs, rejected " << result.errors.size() << " rows\n";
    return 0;
  };
}

Action add_synth(CLI::App& root) {
  auto* app = root.add_subcommand("synth", "Generate a synthetic parallel corpus");
  struct Opts {
    fs::path output_dir;
    SynthConfig cfg;
    std::string domain = "A";
  };
  auto o = std::make_shared<Opts>();
  app->add_option("--output-dir", o->output_dir, "Output directory")->required();
  app->add_option("--groups", o->cfg.group_count, "Number of source sentences")->capture_default_str();
  app->add_option("--max-variants", o->cfg.max_variants, "Largest variant count per group")->capture_default_str();
  app->add_option("--seed", o->cfg.seed, "Random seed")->capture_default_str();
  app->add_option("--min-words", o->cfg.min_words, "Fewest words per sentence")->capture_default_str();
  app->add_option("--max-words", o->cfg.max_words, "Most words per sentence")->capture_default_str();
  app->add_option("--min-word-len", o->cfg.min_word_len, "Shortest word in letters")->capture_default_str();
  app->add_option("--max-word-len", o->cfg.max_word_len, "Longest word in letters")->capture_default_str();
  app->add_option("--variant-rules", o->cfg.variant_rule_count, "Letters allowed to vary (-1: all)")->capture_default_str();
  app->add_option("--singleton-fraction", o->cfg.singleton_fraction, "Fraction of single-variant groups")->capture_default_str();
  app->add_option("--lexicon-size", o->cfg.lexicon_size, "Draw words from a lexicon of this size (0: fresh words)")->capture_default_str();
  app->add_option("--domain", o->domain, "Romanization convention A or B")->capture_default_str()->check(CLI::IsMember({"A", "B"}));
  app->add_flag("--for-default-split", o->cfg.for_default_split, "Require enough groups for the default split sizes");
  add_config_flag(app);
  return [o, app](std::ostream& out, std::ostream&) {
    RunManifest manifest("synth");
    manifest.set_config(effective_config(*app));
    o->cfg.domain = o->domain == "B" ? SynthDomain::kB : SynthDomain::kA;
    const auto pairs = generate_synthetic(o->cfg);
    fs::create_directories(o->output_dir);
    write_pairs(o->output_dir / "pairs.jsonl", pairs);
    manifest.add_output(o->output_dir / "pairs.jsonl");
    manifest.write(o->output_dir / manifest_name("synth"));
    out << "generated " << pairs.size() << " pairs in " << o->cfg.group_count << " groups\n";
    return 0;
  };
}

void print_audit(std::ostream& out, const AuditReport& report) {
  out << "overlap violations: " << report.overlap_violations.size() << '\n';
  for (const auto& v : report.overlap_violations) {
    out << "  " << v.side << " sentence in " << to_string(v.first) << " and " << to_string(v.second)
        << ": " << v.sentence << '\n';
  }
  out << "variation inclusion: " << (report.variation_inclusion_ok ? "ok" : "FAILED") << '\n';
  for (const auto& p : report.variation_inclusion_problems) out << "  " << p << '\n';
  out << "counts: unique " << report.unique_counts.val << "/" << report.unique_counts.test << ", multi "
      << report.multi_counts.val << "/" << report.multi_counts.test << ", small "
      << report.small_counts.val << "/" << report.small_counts.test << " ("
      << (report.counts_ok ? "ok" : "FAILED") << ")\n";
  out << "partial repetitions: " << report.partial_repetition_hits.size() << '\n';
  for (const auto& h : report.partial_repetition_hits) {
    out << "  " << to_string(h.relation) << ": train \"" << h.train_sentence << "\" vs eval \""
        << h.eval_sentence << "\"\n";
  }
  out << "audit " << (report.passed ? "passed" : "FAILED") << '\n';
}

Action add_split(CLI::App& root) {
  auto* app = root.add_subcommand("split", "Build a leakage-free train/validation/test split");
  struct Opts {
    fs::path input, output_dir;
    SplitConfig cfg;
  };
  auto o = std::make_shared<Opts>();
  app->add_option("--input", o->input, "Pairs file (JSONL or TSV)")->required()->check(CLI::ExistingFile);
  app->add_option("--output-dir", o->output_dir, "Output directory")->required();
  app->add_option("--seed", o->cfg.seed, "Random seed")->required();
  app->add_option("--unique-val", o->cfg.unique_val, "Singleton groups in validation")->capture_default_str();
  app->add_option("--unique-test", o->cfg.unique_test, "Singleton groups in test")->capture_default_str();
  app->add_option("--multi-val", o->cfg.multi_val_groups, "Multi-variant groups in validation")->capture_default_str();
  app->add_option("--multi-test", o->cfg.multi_test_groups, "Multi-variant groups in test")->capture_default_str();
  app->add_option("--band-min", o->cfg.multi_band_min, "Smallest variant count of eval groups")->capture_default_str();
  app->add_option("--band-max", o->cfg.multi_band_max, "Largest variant count of eval groups")->capture_default_str();
  add_config_flag(app);
  return [o, app](std::ostream& out, std::ostream& err) {
    RunManifest manifest("split");
    manifest.set_config(effective_config(*app));
    manifest.add_input(o->input);
    const auto pairs = load_pairs(o->input);
    const auto groups = group_by_source(pairs);
    const auto split = build_split(groups, o->cfg);
    write_split(o->output_dir, split, o->cfg);
    const auto report = audit(split, o->cfg);
    write_text(o->output_dir / "audit.json", to_json(report).dump(2) + "\n");
    for (const char* f : {"train.jsonl", "val_full.jsonl", "test_full.jsonl", "val_small.jsonl",
                          "test_small.jsonl", "split.json", "audit.json"}) {
      manifest.add_output(o->output_dir / f);
    }
    manifest.write(o->output_dir / manifest_name("split"));
    out << "train " << split.train.size() << ", val " << split.val_full.size() << " (small "
        << split.val_small.size() << "), test " << split.test_full.size() << " (small "
        << split.test_small.size() << ")\n";
    if (!report.passed) err << "warning: the new split does not pass the audit; run verify for details\n";
    return 0;
  };
}

Action add_verify(CLI::App& root) {
  auto* app = root.add_subcommand("verify", "Audit a split directory; exits 1 on any violation");
  struct Opts {
    fs::path input, output_dir;
    bool lenient = false;
  };
  auto o = std::make_shared<Opts>();
  app->add_option("--input", o->input, "Split directory")->required()->check(CLI::ExistingDirectory);
  app->add_option("--output-dir", o->output_dir, "Where to write audit.json (optional)");
  app->add_flag("--lenient-partial-repetition", o->lenient, "Report partial repetitions without failing");
  add_config_flag(app);
  return [o, app](std::ostream& out, std::ostream&) {
    RunManifest manifest("verify");
    manifest.set_config(effective_config(*app));
    SplitConfig cfg;
    std::vector<std::string> mismatches;
    const auto split = read_split(o->input, &cfg, &mismatches);
    AuditOptions options;
    options.strict_partial_repetition = !o->lenient;
    auto report = audit(split, cfg, options);
    for (const auto& m : mismatches) out << "digest mismatch: " << m << " changed after splitting\n";
    print_audit(out, report);
    const bool passed = report.passed && mismatches.empty();
    if (!o->output_dir.empty()) {
      fs::create_directories(o->output_dir);
      auto j = to_json(report);
      j["digest_mismatches"] = mismatches;
      write_text(o->output_dir / "audit.json", j.dump(2) + "\n");
      manifest.add_input(o->input);
      manifest.add_output(o->output_dir / "audit.json");
      manifest.write(o->output_dir / manifest_name("verify"));
    }
    return passed ? 0 : 1;
  };
}

Action add_build_vocab(CLI::App& root) {
  auto* app = root.add_subcommand("build-vocab", "Build the character vocabulary");
  struct Opts {
    std::vector<fs::path> inputs;
    fs::path output_dir;
  };
  auto o = std::make_shared<Opts>();
  app->add_option("--input", o->inputs, "Pairs files or split directories (train subset)")->required()->check(CLI::ExistingPath);
  app->add_option("--output-dir", o->output_dir, "Output directory")->required();
  add_config_flag(app);
  return [o, app](std::ostream& out, std::ostream&) {
    RunManifest manifest("build-vocab");
    manifest.set_config(effective_config(*app));
    std::vector<SentencePair> pairs;
    for (const auto& in : o->inputs) {
      manifest.add_input(in);
      auto p = load_pairs(in);
      pairs.insert(pairs.end(), p.begin(), p.end());
    }
    const std::vector<std::string> langs = {std::string(kRomanUrdu), std::string(kUrdu)};
    const auto vocab = Vocabulary::build(pairs, langs);
    fs::create_directories(o->output_dir);
    vocab.save(o->output_dir / "vocab.txt");
    manifest.add_output(o->output_dir / "vocab.txt");
    manifest.write(o->output_dir / manifest_name("build-vocab"));
    out << "vocabulary of " << vocab.size() << " symbols\n";
    return 0;
  };
}

Action add_pretrain(CLI::App& root) {
  auto* app = root.add_subcommand("pretrain", "Masked-denoising pretraining with the MLM freeze policy");
  struct Opts {
    std::vector<fs::path> inputs;
    fs::path vocab, output_dir, init;
    std::uint64_t seed = 0;
    std::string corpus_mode = "roman_plus_urdu";
    PretrainConfig cfg;
    MaskingConfig masking;
    ModelFlags model;
  };
  auto o = std::make_shared<Opts>();
  app->add_option("--input", o->inputs, "Pairs files or split directories (train subset)")->required()->check(CLI::ExistingPath);
  app->add_option("--vocab", o->vocab, "Vocabulary file")->required()->check(CLI::ExistingFile);
  app->add_option("--output-dir", o->output_dir, "Output directory")->required();
  app->add_option("--seed", o->seed, "Random seed")->required();
  app->add_option("--init", o->init, "Start from this checkpoint instead of a fresh model")->check(CLI::ExistingFile);
  app->add_option("--corpus-mode", o->corpus_mode, "roman_only or roman_plus_urdu")->capture_default_str()->check(CLI::IsMember({"roman_only", "roman_plus_urdu"}));
  app->add_option("--epochs", o->cfg.epochs, "Epochs")->capture_default_str();
  app->add_option("--batch-size", o->cfg.batch_size, "Sequences per micro-batch")->capture_default_str();
  app->add_option("--grad-accum-steps", o->cfg.grad_accum_steps, "Micro-batches per optimizer step")->capture_default_str();
  app->add_option("--learning-rate", o->cfg.learning_rate, "Peak learning rate")->capture_default_str();
  app->add_option("--warmup-ratio", o->cfg.warmup_ratio, "Fraction of steps spent warming up")->capture_default_str();
  app->add_option("--weight-decay", o->cfg.weight_decay, "Decoupled weight decay")->capture_default_str();
  app->add_option("--max-grad-norm", o->cfg.max_grad_norm, "Gradient clipping norm (0 disables)")->capture_default_str();
  app->add_option("--mask-rate", o->masking.mask_rate, "Fraction of maskable tokens replaced by MASK")->capture_default_str();
  o->model.add(app);
  add_config_flag(app);
  return [o, app](std::ostream& out, std::ostream&) {
    RunManifest manifest("pretrain");
    manifest.set_config(effective_config(*app));
    manifest.add_input(o->vocab);
    const auto vocab = Vocabulary::load(o->vocab);
    std::vector<SentencePair> pairs;
    for (const auto& in : o->inputs) {
      manifest.add_input(in);
      auto p = load_pairs(in);
      pairs.insert(pairs.end(), p.begin(), p.end());
    }
    ModelState model = o->init.empty() ? init_model(o->model.config(vocab.size(), o->seed))
                                       : load_checkpoint(o->init);
    if (!o->init.empty()) manifest.add_input(o->init);
    set_freeze(model, FreezePolicy::kMlm);
    o->cfg.corpus_mode = parse_mlm_corpus_mode(o->corpus_mode);
    o->cfg.seed = o->seed;
    o->masking.seed = o->seed;
    const auto corpus = build_mlm_corpus(pairs, o->cfg.corpus_mode);
    const auto result = pretrain(model, vocab, corpus, o->cfg, o->masking, o->output_dir);
    manifest.add_output(o->output_dir / "loss.csv");
    for (const auto& c : result.checkpoints) manifest.add_output(c);
    manifest.write(o->output_dir / manifest_name("pretrain"));
    out << "initial loss " << format_number(result.initial_loss);
    for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) {
      out << ", epoch " << e + 1 << " " << format_number(result.epoch_loss[e]);
    }
    out << "\nfinal checkpoint " << result.checkpoints.back().string() << '\n';
    return 0;
  };
}

std::vector<EvalSet> parse_eval_sets(const std::vector<std::string>& specs,
                                     const std::vector<fs::path>& split_dirs) {
  std::vector<EvalSet> sets;
  for (const auto& spec : specs) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos) throw PreconditionError("--eval expects NAME=PATH, got " + spec);
    sets.push_back({spec.substr(0, eq), load_pairs(spec.substr(eq + 1), "test_small")});
  }
  if (sets.empty()) {
    for (const auto& dir : split_dirs) {
      if (fs::is_directory(dir)) {
        sets.push_back({fs::absolute(dir).lexically_normal().filename().string(), load_pairs(dir, "test_small")});
      }
    }
  }
  if (sets.empty()) throw PreconditionError("no evaluation sets: pass --eval NAME=PATH");
  return sets;
}

Action add_finetune(CLI::App& root) {
  auto* app = root.add_subcommand("finetune", "Two-phase supervised fine-tuning");
  struct Opts {
    fs::path input, phase2_input, vocab, output_dir, init;
    std::vector<std::string> evals;
    std::uint64_t seed = 0;
    std::string direction = "roman2ur";
    FinetuneConfig cfg;
    ModelFlags model;
  };
  auto o = std::make_shared<Opts>();
  app->add_option("--input", o->input, "Phase-1 pairs file or split directory")->required()->check(CLI::ExistingPath);
  app->add_option("--phase2-input", o->phase2_input, "Phase-2 pairs file or split directory")->check(CLI::ExistingPath);
  app->add_option("--eval", o->evals, "Evaluation set NAME=PATH (split directories use test_small); repeatable");
  app->add_option("--vocab", o->vocab, "Vocabulary file")->required()->check(CLI::ExistingFile);
  app->add_option("--output-dir", o->output_dir, "Run directory")->required();
  app->add_option("--seed", o->seed, "Random seed")->required();
  app->add_option("--init", o->init, "Start from this checkpoint (e.g. an MLM checkpoint)")->check(CLI::ExistingFile);
  app->add_option("--direction", o->direction, "roman2ur or ur2roman")->capture_default_str()->check(CLI::IsMember({"roman2ur", "ur2roman"}));
  app->add_option("--phase1-epochs", o->cfg.phase1_epochs, "Phase-1 epochs")->capture_default_str();
  app->add_option("--phase1-checkpoint-epoch", o->cfg.phase1_checkpoint_epoch, "Phase-1 epoch whose checkpoint starts phase 2")->capture_default_str();
  app->add_option("--phase2-epochs", o->cfg.phase2_epochs, "Phase-2 epochs")->capture_default_str();
  app->add_option("--phase2-eval-epochs", o->cfg.phase2_eval_epochs, "Phase-2 epochs marked as reported")->delimiter(',')->capture_default_str();
  app->add_option("--batch-size", o->cfg.batch_size, "Sequences per micro-batch")->capture_default_str();
  app->add_option("--grad-accum-steps", o->cfg.grad_accum_steps, "Micro-batches per optimizer step")->capture_default_str();
  app->add_option("--learning-rate", o->cfg.learning_rate, "Peak learning rate")->capture_default_str();
  app->add_option("--warmup-ratio", o->cfg.warmup_ratio, "Fraction of steps spent warming up")->capture_default_str();
  app->add_option("--weight-decay", o->cfg.weight_decay, "Decoupled weight decay")->capture_default_str();
  app->add_option("--max-grad-norm", o->cfg.max_grad_norm, "Gradient clipping norm (0 disables)")->capture_default_str();
  app->add_option("--eval-batch-size", o->cfg.eval_batch_size, "Sentences decoded together")->capture_default_str();
  o->model.add(app);
  add_config_flag(app);
  return [o, app](std::ostream& out, std::ostream&) {
    RunManifest manifest("finetune");
    manifest.set_config(effective_config(*app));
    manifest.add_input(o->vocab);
    manifest.add_input(o->input);
    const auto vocab = Vocabulary::load(o->vocab);
    o->cfg.direction = parse_direction(o->direction);
    o->cfg.seed = o->seed;
    ModelState model = o->init.empty() ? init_model(o->model.config(vocab.size(), o->seed))
                                       : load_checkpoint(o->init);
    if (!o->init.empty()) manifest.add_input(o->init);
    const auto phase1 = load_pairs(o->input);
    const auto evals = parse_eval_sets(o->evals, {o->input, o->phase2_input});
    fs::create_directories(o->output_dir);

    auto print_record = [&](const TrainRunRecord& r) {
      for (const auto& e : r.epochs) {
        out << to_string(r.phase) << " epoch " << e.epoch;
        if (e.train_loss) out << " loss " << format_number(*e.train_loss);
        for (const auto& [name, score] : e.char_bleu) out << " " << name << " " << format_number(score);
        out << '\n';
      }
    };
    if (o->phase2_input.empty()) {
      if (o->cfg.phase2_epochs != 0) {
        throw PreconditionError("--phase2-input is required unless --phase2-epochs=0");
      }
      o->cfg.phase2_eval_epochs.clear();
      o->cfg.validate();
      set_freeze(model, FreezePolicy::kNone);
      model.tags.clear();
      write_text(o->output_dir / "config.json", to_json(o->cfg).dump(2) + "\n");
      const auto record =
          train_phase(model, vocab, phase1, o->cfg, Phase::kPhase1, o->cfg.phase1_epochs, evals,
                      o->output_dir / "phase1");
      write_text(o->output_dir / "record.json",
                 nlohmann::json{{"phase1", to_json(record)}}.dump(2) + "\n");
      print_record(record);
    } else {
      manifest.add_input(o->phase2_input);
      const auto phase2 = load_pairs(o->phase2_input);
      const auto result = run_schedule(model, vocab, o->cfg, phase1, phase2, evals, o->output_dir);
      print_record(result.phase1);
      print_record(result.phase2);
    }
    manifest.add_output(o->output_dir / "config.json");
    manifest.add_output(o->output_dir / "record.json");
    manifest.add_output(o->output_dir / "phase1");
    if (fs::exists(o->output_dir / "phase2")) manifest.add_output(o->output_dir / "phase2");
    manifest.write(o->output_dir / manifest_name("finetune"));
    return 0;
  };
}

void write_metric_outputs(const fs::path& dir, const MetricReport& report, RunManifest& manifest) {
  write_text(dir / "metrics.json", to_json(report).dump(2) + "\n");
  write_text(dir / "metrics.md",
             "| Label | BLEU | Char-BLEU | CHRF |\n| --- | ---: | ---: | ---: |\n" +
                 report.markdown_row() + "\n");
  manifest.add_output(dir / "metrics.json");
  manifest.add_output(dir / "metrics.md");
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(normalize(line));
  }
  return lines;
}

Action add_evaluate(CLI::App& root) {
  auto* app = root.add_subcommand("evaluate", "Score a checkpoint, or hypothesis/reference files");
  struct Opts {
    fs::path checkpoint, vocab, input, hyps, refs, output_dir;
    std::string direction = "roman2ur", subset = "test_small", label;
    int beam = 1;
  };
  auto o = std::make_shared<Opts>();
  app->add_option("--checkpoint", o->checkpoint, "Model checkpoint")->check(CLI::ExistingFile);
  app->add_option("--vocab", o->vocab, "Vocabulary file")->check(CLI::ExistingFile);
  app->add_option("--input", o->input, "Pairs file or split directory")->check(CLI::ExistingPath);
  app->add_option("--subset", o->subset, "Split subset used when --input is a directory")->capture_default_str();
  app->add_option("--direction", o->direction, "roman2ur or ur2roman")->capture_default_str()->check(CLI::IsMember({"roman2ur", "ur2roman"}));
  app->add_option("--beam", o->beam, "Beam width (1: greedy)")->capture_default_str();
  app->add_option("--hyps", o->hyps, "Hypotheses, one per line (instead of a checkpoint)")->check(CLI::ExistingFile);
  app->add_option("--refs", o->refs, "References, one per line")->check(CLI::ExistingFile);
  app->add_option("--label", o->label, "Row label in metrics.md");
  app->add_option("--output-dir", o->output_dir, "Output directory")->required();
  add_config_flag(app);
  return [o, app](std::ostream& out, std::ostream&) {
    RunManifest manifest("evaluate");
    manifest.set_config(effective_config(*app));
    std::vector<std::string> hyps, refs;
    if (!o->hyps.empty() || !o->refs.empty()) {
      if (o->hyps.empty() || o->refs.empty()) throw PreconditionError("--hyps and --refs go together");
      manifest.add_input(o->hyps);
      manifest.add_input(o->refs);
      hyps = read_lines(o->hyps);
      refs = read_lines(o->refs);
    } else {
      if (o->checkpoint.empty() || o->vocab.empty() || o->input.empty()) {
        throw PreconditionError("evaluate needs --checkpoint, --vocab and --input (or --hyps/--refs)");
      }
      manifest.add_input(o->checkpoint);
      manifest.add_input(o->vocab);
      manifest.add_input(o->input);
      const auto model = load_checkpoint(o->checkpoint);
      const auto vocab = Vocabulary::load(o->vocab);
      const auto direction = parse_direction(o->direction);
      const auto pairs = load_pairs(o->input, o->subset);
      std::vector<std::string> inputs;
      for (const auto& p : pairs) {
        inputs.push_back(input_text(p, direction));
        refs.push_back(output_text(p, direction));
      }
      DecodeOptions opts;
      opts.beam_width = o->beam;
      opts.max_len = model.config.max_len;
      hyps = transliterate(model, vocab, inputs, input_lang(direction), output_lang(direction), opts);
    }
    const auto report = evaluate_metrics(hyps, refs, o->label.empty() ? o->direction : o->label);
    fs::create_directories(o->output_dir);
    std::string text;
    for (const auto& h : hyps) text += h + "\n";
    write_text(o->output_dir / "hypotheses.txt", text);
    manifest.add_output(o->output_dir / "hypotheses.txt");
    write_metric_outputs(o->output_dir, report, manifest);
    manifest.write(o->output_dir / manifest_name("evaluate"));
    out << "BLEU " << format_number(report.bleu.score) << ", Char-BLEU "
        << format_number(report.char_bleu.score) << ", CHRF " << format_number(report.chrf.score) << '\n';
    return 0;
  };
}

Action add_llm_eval(CLI::App& root) {
  auto* app = root.add_subcommand("llm-eval", "Zero-shot baseline through a chat-completion service");
  struct Opts {
    fs::path input, fixture, output_dir;
    std::string direction = "roman2ur", transport = "http", subset = "test_small";
    std::size_t limit = 0;
    LlmConfig cfg;
    int timeout_ms = 60000;
  };
  auto o = std::make_shared<Opts>();
  app->add_option("--input", o->input, "Pairs file or split directory")->required()->check(CLI::ExistingPath);
  app->add_option("--subset", o->subset, "Split subset used when --input is a directory")->capture_default_str();
  app->add_option("--direction", o->direction, "roman2ur or ur2roman")->capture_default_str()->check(CLI::IsMember({"roman2ur", "ur2roman"}));
  app->add_option("--transport", o->transport, "http or mock")->capture_default_str()->check(CLI::IsMember({"http", "mock"}));
  app->add_option("--fixture", o->fixture, "Mock fixture JSONL (mock transport)")->check(CLI::ExistingFile);
  app->add_option("--limit", o->limit, "Only the first N pairs (0: all)")->capture_default_str();
  app->add_option("--endpoint", o->cfg.endpoint, "Chat-completion URL")->capture_default_str();
  app->add_option("--model", o->cfg.model, "Model name")->capture_default_str();
  app->add_option("--api-key-env", o->cfg.api_key_env, "Environment variable holding the API key")->capture_default_str();
  app->add_option("--max-retries", o->cfg.max_retries, "Retries per item")->capture_default_str();
  app->add_option("--timeout-ms", o->timeout_ms, "Request timeout")->capture_default_str();
  app->add_option("--output-dir", o->output_dir, "Output directory")->required();
  add_config_flag(app);
  return [o, app](std::ostream& out, std::ostream&) {
    RunManifest manifest("llm-eval");
    manifest.set_config(effective_config(*app));
    manifest.add_input(o->input);
    o->cfg.timeout = std::chrono::milliseconds(o->timeout_ms);
    const auto direction = parse_direction(o->direction);
    auto pairs = load_pairs(o->input, o->subset);
    if (o->limit > 0 && pairs.size() > o->limit) pairs.resize(o->limit);
    std::vector<LlmItem> items;
    std::vector<std::string> refs;
    for (const auto& p : pairs) {
      items.push_back({input_text(p, direction), direction});
      refs.push_back(output_text(p, direction));
    }
    Transcript transcript;
    if (o->transport == "mock") {
      if (o->fixture.empty()) throw PreconditionError("--transport mock needs --fixture");
      manifest.add_input(o->fixture);
      auto mock = MockTransport::from_jsonl(o->fixture);
      transcript = transliterate_batch(items, o->cfg, mock, [](std::chrono::milliseconds) {});
    } else {
      HttpTransport http(o->cfg);
      transcript = transliterate_batch(items, o->cfg, http);
    }
    const auto report = score_transcript(transcript, refs, "llm " + o->direction);
    fs::create_directories(o->output_dir);
    {
      std::ofstream t(o->output_dir / "transcript.jsonl", std::ios::binary);
      write_transcript(t, transcript);
    }
    manifest.add_output(o->output_dir / "transcript.jsonl");
    write_metric_outputs(o->output_dir, report, manifest);
    manifest.write(o->output_dir / manifest_name("llm-eval"));
    std::size_t failed = 0;
    for (const auto& e : transcript.entries) failed += e.failed;
    out << transcript.entries.size() << " items, " << failed << " failed; BLEU "
        << format_number(report.bleu.score) << ", Char-BLEU " << format_number(report.char_bleu.score)
        << ", CHRF " << format_number(report.chrf.score) << '\n';
    return 0;
  };
}

Action add_report(CLI::App& root) {
  auto* app = root.add_subcommand("report", "Render score tables as Markdown and CSV");
  struct Opts {
    fs::path input, output_dir;
  };
  auto o = std::make_shared<Opts>();
  app->add_option("--input", o->input, "Report description JSON")->required()->check(CLI::ExistingFile);
  app->add_option("--output-dir", o->output_dir, "Output directory")->required();
  add_config_flag(app);
  return [o, app](std::ostream& out, std::ostream&) {
    RunManifest manifest("report");
    manifest.set_config(effective_config(*app));
    manifest.add_input(o->input);
    std::ifstream in(o->input);
    nlohmann::json spec;
    try {
      spec = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(o->input.string() + ": " + e.what());
    }
    const auto table = build_report(spec, o->input.parent_path());
    fs::create_directories(o->output_dir);
    const auto md = to_markdown(table);
    write_text(o->output_dir / "table.md", md);
    write_text(o->output_dir / "table.csv", to_csv(table));
    manifest.add_output(o->output_dir / "table.md");
    manifest.add_output(o->output_dir / "table.csv");
    manifest.write(o->output_dir / manifest_name("report"));
    out << md;
    return 0;
  };
}

}  // namespace

int run_cli(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Transliteration toolkit: corpus preparation, training and evaluation", "translit"};
  app.set_version_flag("--version", std::string(toolkit_version()));
  app.require_subcommand(1);
  std::map<const CLI::App*, Action> actions;
  for (auto add : {add_ingest, add_synth, add_split, add_verify, add_build_vocab, add_pretrain,
                   add_finetune, add_evaluate, add_llm_eval, add_report}) {
    Action action = add(app);
    actions.emplace(app.get_subcommands({}).back(), std::move(action));
  }

  try {
    std::vector<std::string> args = expand_config(raw_args);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  for (const auto& [sub, action] : actions) {
    if (!sub->parsed()) continue;
    try {
      return action(out, err);
    } catch (const std::exception& e) {
      err << "error: " << e.what() << '\n';
      return 1;
    }
  }
  return 1;
}

}  // namespace translit
