#include "mesh_cli/cli.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>

#include "mesh/checkpoint.hpp"
#include "mesh/evaluation.hpp"
#include "mesh/history.hpp"
#include "mesh/run_config.hpp"
#include "mesh/semantic.hpp"
#include "mesh/synthetic.hpp"
#include "mesh/training.hpp"

namespace mesh::cli {

namespace fs = std::filesystem;

namespace {

// Settings gathered from the command line of one subcommand.
struct Invocation {
  std::string dataset;
  std::string config_file;
  std::vector<std::string> assignments;  // --set key=value
  Settings flags;

  [[nodiscard]] Settings flag_layer() const {
    Settings out = flags;
    for (const std::string& a : assignments) {
      const auto eq = a.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + a + "'");
      RunConfig probe;
      (void)probe.get(a.substr(0, eq));  // unknown keys fail here
      out[a.substr(0, eq)] = a.substr(eq + 1);
    }
    if (!dataset.empty()) out["dataset"] = dataset;
    return out;
  }

  [[nodiscard]] RunConfig resolve(const Settings& base = {}) const {
    Settings file = base;
    if (!config_file.empty())
      for (auto& [k, v] : read_settings_file(config_file)) file[k] = v;
    RunConfig c = resolve_config(file, environment_settings(), flag_layer());
    c.validate();
    return c;
  }
};

std::string dashed(std::string key) {
  for (char& ch : key)
    if (ch == '_') ch = '-';
  return key;
}

// One flag per configuration key; boolean keys become switches.
void add_config_flags(CLI::App& sub, Invocation& inv) {
  const RunConfig probe;
  sub.add_option("--config", inv.config_file, "flat key = value configuration file");
  sub.add_option("--set", inv.assignments, "override any configuration key as key=value");
  for (const std::string& key : RunConfig::keys()) {
    if (key == "dataset") continue;
    const std::string value = probe.get(key);
    if (value == "true" || value == "false") {
      sub.add_flag_callback("--" + dashed(key), [&inv, key] { inv.flags[key] = "true"; }, "set " + key);
    } else {
      sub.add_option_function<std::string>(
          "--" + dashed(key), [&inv, key](const std::string& v) { inv.flags[key] = v; }, key);
    }
  }
}

fs::path prepare_out_dir(const RunConfig& c) {
  const fs::path dir = c.out;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw DataError("cannot write " + file.string());
  out << text;
}

Dataset load_for_run(const RunConfig& c) {
  if (c.dataset.empty()) throw ConfigError("no dataset directory given");
  Dataset ds = load_dataset(c.dataset);
  if (c.max_timestamps > 0 && c.max_timestamps < ds.vocab.num_timestamps)
    ds = truncate_timestamps(ds, c.max_timestamps);
  return ds;
}

// Dataset, augmented query view, semantic table and model of one run.
struct Workspace {
  RunConfig config;
  Dataset raw;
  std::unique_ptr<QueryContext> context;
  std::unique_ptr<MeshModel> model;
};

Workspace open_workspace(RunConfig c) {
  Workspace w;
  w.raw = load_for_run(c);
  w.context = std::make_unique<QueryContext>(w.raw);
  const Vocabulary& vocab = w.context->vocab();
  SemanticEmbeddingTable table;
  if (!c.embeddings.empty()) {
    table = load_semantic_embeddings(c.embeddings, vocab);
    c.llm_dim = table.dim();
  } else {
    table = synthetic_embeddings(vocab, c.llm_dim, c.synthetic_seed);
  }
  w.model = std::make_unique<MeshModel>(c.model_config(vocab), std::move(table));
  w.config = std::move(c);
  return w;
}

struct TrainOutcome {
  TrainResult result;
  EvaluationResult test;
};

TrainOutcome train_run(const RunConfig& requested, std::ostream& err) {
  Workspace w = open_workspace(requested);
  const RunConfig& c = w.config;
  const fs::path dir = prepare_out_dir(c);
  write_text(dir / "config.echo", c.echo());

  std::ofstream stage0_log(dir / "stage0.log", std::ios::binary);
  std::ofstream train_log(dir / "train.log", std::ios::binary);
  if (!stage0_log || !train_log) throw DataError("cannot write logs under " + dir.string());
  const auto start = std::chrono::steady_clock::now();
  auto on_epoch = [&](const EpochRecord& r) {
    std::ofstream& log = r.stage == 0 ? stage0_log : train_log;
    log << format_epoch(r);
    log.flush();
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    char line[128];
    std::snprintf(line, sizeof line, "[train] stage %d epoch %zu loss %.6f valid_mrr %.4f (%.1fs)\n", r.stage,
                  r.epoch, r.train_loss, r.valid_mrr, secs);
    err << line << std::flush;
  };

  TrainOutcome outcome;
  outcome.result = train(*w.model, *w.context, c.train_config(), on_epoch);
  save_checkpoint(*w.model, c.echo(), c.seed, dir / "model.ckpt");
  outcome.test = evaluate(*w.model, *w.context, Split::test);
  write_text(dir / "metrics.txt", format_metrics_text(outcome.test.metrics));
  write_text(dir / "metrics.tsv", format_metrics_tsv(outcome.test.metrics));
  return outcome;
}

// Configuration stored in a checkpoint, overridden by the command line.
std::pair<Workspace, fs::path> open_checkpoint(const Invocation& inv, const std::string& checkpoint_path) {
  if (checkpoint_path.empty()) throw ConfigError("--checkpoint is required");
  const Checkpoint ckpt = read_checkpoint(checkpoint_path);
  Settings stored = parse_settings(ckpt.config_echo, checkpoint_path + " (config echo)");
  RunConfig c = inv.resolve(stored);
  Workspace w = open_workspace(c);
  restore_parameters(*w.model, ckpt);
  const fs::path dir = prepare_out_dir(w.config);
  write_text(dir / "config.echo", w.config.echo());
  return {std::move(w), dir};
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
  return buf;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Temporal knowledge graph reasoning with event-aware mixtures of structural and semantic experts",
               "mesh"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "show help for every subcommand");

  // prepare
  std::string prepare_dir, prepare_out;
  bool prepare_synthetic = false;
  SyntheticSpec synth;
  auto* prepare = app.add_subcommand("prepare", "validate, normalize or synthesize a dataset directory");
  prepare->add_option("dataset", prepare_dir, "dataset directory")->required();
  prepare->add_option("--out", prepare_out, "write the normalized dataset here");
  prepare->add_flag("--synthetic", prepare_synthetic, "write a synthetic dataset into the directory");
  prepare->add_option("--entities", synth.entities, "synthetic entity count");
  prepare->add_option("--relations", synth.relations, "synthetic relation count");
  prepare->add_option("--timestamps", synth.timestamps, "synthetic timestamp count");
  prepare->add_option("--facts-per-timestamp", synth.facts_per_timestamp, "synthetic facts per timestamp");
  prepare->add_option("--seed", synth.seed, "synthetic generator seed");

  // stats
  std::string stats_dir, stats_format = "table";
  auto* stats = app.add_subcommand("stats", "print dataset statistics with the historical-event rate");
  stats->add_option("dataset", stats_dir, "dataset directory")->required();
  stats->add_option("--format", stats_format, "table or kv")->check(CLI::IsMember({"table", "kv"}));

  // naive
  std::string naive_dir;
  auto* naive = app.add_subcommand("naive", "rank test objects by training frequency");
  naive->add_option("dataset", naive_dir, "dataset directory")->required();

  // emit-prompts
  std::string prompt_dir, prompt_file;
  PromptTemplate prompt;
  auto* emit = app.add_subcommand("emit-prompts", "write entity and relation prompts for embedding extraction");
  emit->add_option("dataset", prompt_dir, "dataset directory")->required();
  emit->add_option("--output", prompt_file, "prompt file")->required();
  emit->add_option("--domain", prompt.domain, "data domain wording");
  emit->add_option("--datatype", prompt.datatype, "data type wording");
  emit->add_option("--entity-template", prompt.entity_template, "entity prompt template");
  emit->add_option("--relation-template", prompt.relation_template, "relation prompt template");

  // train
  Invocation train_inv;
  auto* train_cmd = app.add_subcommand("train", "run both training stages, write checkpoint, logs and test metrics");
  train_cmd->add_option("dataset", train_inv.dataset, "dataset directory");
  add_config_flags(*train_cmd, train_inv);

  // eval
  Invocation eval_inv;
  std::string eval_ckpt, eval_split = "test";
  auto* eval_cmd = app.add_subcommand("eval", "score a split with a checkpoint and write metric reports");
  eval_cmd->add_option("dataset", eval_inv.dataset, "dataset directory (defaults to the checkpoint's)");
  eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  eval_cmd->add_option("--split", eval_split, "valid or test")->check(CLI::IsMember({"valid", "test"}));
  add_config_flags(*eval_cmd, eval_inv);

  // analyze
  Invocation analyze_inv;
  std::string analyze_ckpt;
  auto* analyze = app.add_subcommand("analyze", "gate-weight statistics of test queries by event type");
  analyze->add_option("dataset", analyze_inv.dataset, "dataset directory (defaults to the checkpoint's)");
  analyze->add_option("--checkpoint", analyze_ckpt, "checkpoint file")->required();
  add_config_flags(*analyze, analyze_inv);

  // sweep
  Invocation sweep_inv;
  std::string sweep_omega, sweep_experts;
  auto* sweep = app.add_subcommand("sweep", "train once per omega value or expert layout");
  sweep->add_option("dataset", sweep_inv.dataset, "dataset directory");
  sweep->add_option("--omega-values", sweep_omega, "comma-separated expert-loss weights");
  sweep->add_option("--expert-grid", sweep_experts, "comma-separated MxN layouts, e.g. 1x1,2x1");
  add_config_flags(*sweep, sweep_inv);

  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
      return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
      return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
      app.exit(e, out, err);
      err << app.help();
      return kConfigError;
    }

    if (*prepare) {
      if (prepare_synthetic) {
        save_dataset(synthetic_dataset(synth), prepare_dir);
        out << "wrote synthetic dataset to " << prepare_dir << "\n";
        return kSuccess;
      }
      const Dataset ds = load_dataset(prepare_dir);
      out << "ok\t" << ds.vocab.num_entities() << " entities\t" << ds.vocab.num_relations() << " relations\t"
          << ds.vocab.num_timestamps << " timestamps\t" << ds.train.fact_count() << "/" << ds.valid.fact_count()
          << "/" << ds.test.fact_count() << " facts\n";
      if (!prepare_out.empty()) {
        fs::create_directories(prepare_out);
        save_dataset(ds, prepare_out);
        out << "normalized dataset written to " << prepare_out << "\n";
      }
      return kSuccess;
    }
    if (*stats) {
      const Dataset ds = load_dataset(stats_dir);
      const DatasetStats s = dataset_stats(ds);
      out << (stats_format == "kv" ? format_stats_kv(s) : format_stats_table(s, fs::path(stats_dir).filename()));
      return kSuccess;
    }
    if (*naive) {
      const NaiveResult r = evaluate_naive(load_dataset(naive_dir));
      out << "queries\tMRR\tH@1\tH@3\tH@10\n"
          << r.queries << '\t' << percent(r.mrr) << '\t' << percent(r.hits1) << '\t' << percent(r.hits3) << '\t'
          << percent(r.hits10) << '\n';
      return kSuccess;
    }
    if (*emit) {
      const Dataset ds = load_dataset(prompt_dir);
      emit_prompts(add_inverse_relations(ds.vocab), prompt, prompt_file);
      out << "wrote prompts to " << prompt_file << "\n";
      return kSuccess;
    }
    if (*train_cmd) {
      const TrainOutcome o = train_run(train_inv.resolve(), err);
      out << format_metrics_text(o.test.metrics);
      return kSuccess;
    }
    if (*eval_cmd) {
      auto [w, dir] = open_checkpoint(eval_inv, eval_ckpt);
      const EvaluationResult r =
          evaluate(*w.model, *w.context, eval_split == "valid" ? Split::valid : Split::test);
      write_text(dir / "metrics.txt", format_metrics_text(r.metrics));
      write_text(dir / "metrics.tsv", format_metrics_tsv(r.metrics));
      out << format_metrics_text(r.metrics);
      return kSuccess;
    }
    if (*analyze) {
      auto [w, dir] = open_checkpoint(analyze_inv, analyze_ckpt);
      const EvaluationResult r = evaluate(*w.model, *w.context, Split::test);
      write_text(dir / "gates.txt", format_gate_table(r.gates));
      out << format_gate_table(r.gates);
      return kSuccess;
    }
    if (*sweep) {
      const RunConfig base = sweep_inv.resolve();
      std::vector<std::pair<std::string, Settings>> settings;
      for (const std::string& w : split_list(sweep_omega)) settings.push_back({"omega_" + w, {{"omega", w}}});
      for (const std::string& g : split_list(sweep_experts)) {
        const auto x = g.find('x');
        if (x == std::string::npos) throw ConfigError("expert layout must look like MxN, got '" + g + "'");
        settings.push_back(
            {"experts_" + g, {{"experts_historical", g.substr(0, x)}, {"experts_non_historical", g.substr(x + 1)}}});
      }
      if (settings.empty()) throw ConfigError("sweep needs --omega-values or --expert-grid");
      const fs::path root = prepare_out_dir(base);
      write_text(root / "config.echo", base.echo());
      std::string table = "setting\tMRR\tH@3\tH@10\n";
      for (const auto& [name, overrides] : settings) {
        RunConfig c = base;
        for (const auto& [k, v] : overrides) c.set(k, v);
        c.out = (root / name).string();
        c.validate();
        err << "[sweep] " << name << "\n";
        const MetricsReport m = train_run(c, err).test.metrics.overall;
        table += name + "\t" + percent(m.mrr) + "\t" + percent(m.hits3) + "\t" + percent(m.hits10) + "\n";
        write_text(root / "sweep.tsv", table);
      }
      out << table;
      return kSuccess;
    }
    err << app.help();
    return kConfigError;
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kConfigError;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kNumericError;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kInternalError;
  }
}

}  // namespace mesh::cli
