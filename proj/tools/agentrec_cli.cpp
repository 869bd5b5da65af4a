// agentrec: command-line front end for the agent recommendation engine.
//
//   agentrec ingest       raw JSONL prompts -> validated dataset
//   agentrec dedup        MinHash near-duplicate removal
//   agentrec split        train/test then finetune/reward splits
//   agentrec generate     synthetic prompts from a next-token source
//   agentrec build-cache  embed per-agent corpora into a binary cache
//   agentrec recommend    one-shot query against a cache
//   agentrec evaluate     top-k accuracy and score-function sweep
//   agentrec project      PCA plot data (CSV)
//   agentrec bench        recommend latency
//   agentrec serve        HTTP service

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "agentrec/config.hpp"
#include "agentrec/corpus.hpp"
#include "agentrec/dedup.hpp"
#include "agentrec/projection.hpp"
#include "agentrec/sampling.hpp"
#include "agentrec/scoring.hpp"
#include "agentrec/service.hpp"
#include "agentrec/text.hpp"

namespace fs = std::filesystem;
using namespace agentrec;

namespace {

// Engine options shared by the subcommands that embed or score. Every config
// key has a mirror flag: provider.timeout_ms -> --provider-timeout-ms.
struct EngineOptions {
  std::string config_file;
  std::map<std::string, std::string> flags;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_file, "Config file (TOML-style key = value)");
    for (const auto& key : config_keys()) {
      std::string flag = "--";
      for (char c : key) flag += (c == '.' || c == '_') ? '-' : c;
      if (key == "default_k") flag += ",--k";
      if (key == "cache_path") flag += ",--cache";
      if (key == "listen_address") flag += ",--listen";
      cmd->add_option_function<std::string>(flag, [this, key](const std::string& v) { flags[key] = v; },
                                            "Overrides config key " + key);
    }
  }

  // defaults < config file < AGENTREC_* environment < flags
  EngineConfig resolve() const {
    EngineConfig cfg;
    if (!config_file.empty()) apply_config_file(cfg, config_file);
    apply_env_overrides(cfg);
    for (const auto& [key, value] : flags) set_config_value(cfg, key, value);
    validate(cfg);
    return cfg;
  }
};

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = normalize_whitespace(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::io_error, "cannot open '" + path.string() + "' for writing");
  return out;
}

void print_json(const nlohmann::json& j) { std::cout << j.dump(2) << "\n"; }

CorpusMap require_cache(const EngineConfig& cfg) {
  if (cfg.cache_path.empty()) throw Error(ErrorCode::invalid_configuration, "--cache is required");
  return load_corpus_cache(cfg.cache_path);
}

std::vector<PromptRecord> require_ids(std::vector<PromptRecord> prompts) {
  for (const auto& p : prompts) {
    if (p.id.empty()) {
      throw Error(ErrorCode::invalid_input, "dataset records need ids; run 'agentrec ingest' first");
    }
  }
  return prompts;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Agent recommendation engine"};
  app.require_subcommand(1);

  // ingest ------------------------------------------------------------------
  std::string ingest_in, ingest_out, ingest_agents;
  auto* ingest = app.add_subcommand("ingest", "Validate JSONL prompts and assign ids");
  ingest->add_option("--in", ingest_in, "Input JSONL {agent, text[, id]}")->required();
  ingest->add_option("--out", ingest_out, "Output JSONL {id, agent, text}")->required();
  ingest->add_option("--agents", ingest_agents, "Comma-separated agent registry");

  // dedup -------------------------------------------------------------------
  std::string dedup_in, dedup_out, dedup_report;
  DedupParams dedup_params;
  auto* dedup = app.add_subcommand("dedup", "MinHash near-duplicate removal");
  dedup->add_option("--in", dedup_in)->required();
  dedup->add_option("--out", dedup_out)->required();
  dedup->add_option("--report", dedup_report, "JSONL report {dropped, kept, estimate}");
  dedup->add_option("--width", dedup_params.width, "Shingle width in tokens")->capture_default_str();
  dedup->add_option("--hashes", dedup_params.num_hashes, "MinHash functions")->capture_default_str();
  dedup->add_option("--seed", dedup_params.seed)->capture_default_str();
  dedup->add_option("--threshold", dedup_params.threshold)->capture_default_str();
  dedup->add_option("--bands", dedup_params.bands, "LSH bands (0 = exhaustive scan)")->capture_default_str();

  // split -------------------------------------------------------------------
  std::string split_in, split_dir;
  std::uint64_t split_seed = 0;
  SplitRatios split_ratios;
  auto* split = app.add_subcommand("split", "Per-agent train/test and finetune/reward splits");
  split->add_option("--in", split_in)->required();
  split->add_option("--out-dir", split_dir, "Receives train/test/finetune/reward .jsonl")->required();
  split->add_option("--seed", split_seed)->capture_default_str();
  split->add_option("--train-frac", split_ratios.train)->capture_default_str();
  split->add_option("--finetune-frac", split_ratios.finetune_of_train)->capture_default_str();

  // generate ----------------------------------------------------------------
  std::string gen_fixture, gen_endpoint, gen_vocab, gen_end, gen_agent, gen_out;
  int gen_count = 1;
  long long gen_timeout_ms = 10000;
  SamplingConfig gen_cfg;
  auto* generate = app.add_subcommand("generate", "Sample synthetic prompts from a next-token source");
  generate->add_option("--fixture", gen_fixture, "Markov fixture JSON");
  generate->add_option("--endpoint", gen_endpoint, "Remote logit source URL");
  generate->add_option("--vocab", gen_vocab, "Vocabulary file for --endpoint (one token per line)");
  generate->add_option("--end-token", gen_end, "End token for --endpoint");
  generate->add_option("--timeout-ms", gen_timeout_ms)->capture_default_str();
  generate->add_option("--agent", gen_agent)->required();
  generate->add_option("--count", gen_count)->capture_default_str();
  generate->add_option("--out", gen_out, "Output JSONL {agent, text}")->required();
  generate->add_option("--top-k", gen_cfg.top_k)->capture_default_str();
  generate->add_option("--top-p", gen_cfg.nucleus_p)->capture_default_str();
  generate->add_option("--repetition-penalty", gen_cfg.repetition_penalty)->capture_default_str();
  generate->add_option("--temperature", gen_cfg.temperature)->capture_default_str();
  generate->add_option("--max-tokens", gen_cfg.max_tokens)->capture_default_str();
  generate->add_option("--seed", gen_cfg.seed)->capture_default_str();

  // build-cache -------------------------------------------------------------
  EngineOptions build_opts;
  std::string build_dataset, build_out;
  std::size_t build_limit = 0;
  auto* build = app.add_subcommand("build-cache", "Embed per-agent corpora into a binary cache");
  build->add_option("--dataset", build_dataset, "JSONL {id, agent, text}")->required();
  build->add_option("--out", build_out, "Cache file to write")->required();
  build->add_option("--limit", build_limit, "Prompts per agent (0 = all)")->capture_default_str();
  build_opts.attach(build);

  // recommend ---------------------------------------------------------------
  EngineOptions rec_opts;
  std::string rec_prompt;
  auto* rec = app.add_subcommand("recommend", "Rank agents for one prompt");
  rec->add_option("--prompt", rec_prompt)->required();
  rec_opts.attach(rec);

  // evaluate ----------------------------------------------------------------
  EngineOptions eval_opts;
  std::string eval_dataset, eval_configs, eval_ks = "1,3";
  auto* evaluate = app.add_subcommand("evaluate", "Top-k accuracy and score-function sweep");
  evaluate->add_option("--dataset", eval_dataset, "Labeled JSONL prompts")->required();
  evaluate->add_option("--configs", eval_configs, "e.g. max,arith,geo,pmeans:200 (default: --score-kind)");
  evaluate->add_option("--ks", eval_ks, "Comma-separated k values")->capture_default_str();
  eval_opts.attach(evaluate);

  // project -----------------------------------------------------------------
  EngineOptions proj_opts;
  std::string proj_dataset, proj_out;
  int proj_dims = 2;
  auto* proj = app.add_subcommand("project", "PCA plot data for embeddings");
  proj->add_option("--dataset", proj_dataset, "Embed and project this JSONL (otherwise the --cache corpora)");
  proj->add_option("--dims", proj_dims, "2 or 3")->check(CLI::IsMember({2, 3}))->capture_default_str();
  proj->add_option("--out", proj_out, "CSV output")->required();
  proj_opts.attach(proj);

  // bench -------------------------------------------------------------------
  EngineOptions bench_opts;
  std::string bench_dataset;
  std::vector<std::string> bench_prompts;
  int bench_reps = 10, bench_warmup = 2, bench_agents = 0, bench_rows = 1000;
  auto* bench = app.add_subcommand("bench", "Recommend latency with identity rephrasing");
  bench->add_option("--dataset", bench_dataset, "Prompts to time (JSONL)");
  bench->add_option("--prompt", bench_prompts, "Prompt to time (repeatable)");
  bench->add_option("--repetitions", bench_reps)->capture_default_str();
  bench->add_option("--warmup", bench_warmup)->capture_default_str();
  bench->add_option("--synthetic-agents", bench_agents, "Build N synthetic corpora instead of --cache");
  bench->add_option("--synthetic-rows", bench_rows, "Rows per synthetic corpus")->capture_default_str();
  bench_opts.attach(bench);

  // serve -------------------------------------------------------------------
  EngineOptions serve_opts;
  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  serve_opts.attach(serve);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return 2;
  }

  try {
    if (*ingest) {
      std::set<std::string> registry;
      for (auto& a : split_list(ingest_agents)) registry.insert(a);
      const auto records = ingest_prompts(read_prompts_jsonl(ingest_in), registry);
      write_prompts_jsonl(records, fs::path(ingest_out));
      std::cerr << "ingested " << records.size() << " prompts\n";
    } else if (*dedup) {
      const auto prompts = read_prompts_jsonl(dedup_in);
      const auto result = deduplicate(prompts, dedup_params);
      write_prompts_jsonl(result.retained, fs::path(dedup_out));
      if (!dedup_report.empty()) {
        auto out = open_out(dedup_report);
        for (const auto& d : result.report) {
          nlohmann::ordered_json j;
          j["dropped"] = d.dropped;
          j["kept"] = d.kept;
          j["estimate"] = d.estimate;
          out << j.dump() << "\n";
        }
      }
      std::cerr << "retained " << result.retained.size() << ", dropped " << result.report.size() << "\n";
    } else if (*split) {
      const auto prompts = require_ids(read_prompts_jsonl(split_in));
      const auto splits = split_dataset(prompts, split_ratios, split_seed);
      fs::create_directories(split_dir);
      write_prompts_jsonl(splits.train, fs::path(split_dir) / "train.jsonl");
      write_prompts_jsonl(splits.test, fs::path(split_dir) / "test.jsonl");
      write_prompts_jsonl(splits.finetune, fs::path(split_dir) / "finetune.jsonl");
      write_prompts_jsonl(splits.reward, fs::path(split_dir) / "reward.jsonl");
      print_json({{"train", splits.train.size()},
                  {"test", splits.test.size()},
                  {"finetune", splits.finetune.size()},
                  {"reward", splits.reward.size()},
                  {"seed", splits.seed}});
    } else if (*generate) {
      std::unique_ptr<LogitSource> source;
      if (!gen_fixture.empty() == !gen_endpoint.empty()) {
        throw Error(ErrorCode::invalid_configuration, "give exactly one of --fixture or --endpoint");
      }
      if (!gen_fixture.empty()) {
        std::ifstream in(gen_fixture);
        if (!in) throw Error(ErrorCode::io_error, "cannot open '" + gen_fixture + "'");
        std::stringstream buf;
        buf << in.rdbuf();
        source = std::make_unique<MarkovFixture>(MarkovFixture::from_json(buf.str()));
      } else {
        std::ifstream in(gen_vocab);
        if (!in) throw Error(ErrorCode::io_error, "--endpoint needs a readable --vocab file");
        std::vector<std::string> vocab;
        for (std::string line; std::getline(in, line);) {
          if (!line.empty()) vocab.push_back(line);
        }
        source = std::make_unique<RemoteLogitSource>(gen_endpoint, std::move(vocab), gen_end,
                                                     std::chrono::milliseconds(gen_timeout_ms));
      }
      auto out = open_out(gen_out);
      for (int i = 0; i < gen_count; ++i) {
        SamplingConfig cfg = gen_cfg;
        cfg.seed = mix64(gen_cfg.seed + static_cast<std::uint64_t>(i));
        const auto prompt = generate_prompt(*source, cfg);
        nlohmann::ordered_json j;
        j["agent"] = gen_agent;
        j["text"] = prompt.text;
        out << j.dump() << "\n";
      }
    } else if (*build) {
      const EngineConfig cfg = build_opts.resolve();
      const auto prompts = require_ids(read_prompts_jsonl(build_dataset));
      const auto corpora = build_agent_corpora(
          prompts, cfg.provider, build_limit ? std::optional<std::size_t>(build_limit) : std::nullopt);
      const auto bytes = save_corpus_cache(corpora, build_out);
      nlohmann::json sizes;
      for (const auto& [agent, c] : corpora) sizes[agent] = c.size();
      print_json({{"path", build_out}, {"bytes", bytes}, {"dim", cfg.provider.dim}, {"corpora", sizes}});
    } else if (*rec) {
      const EngineConfig cfg = rec_opts.resolve();
      const auto corpora = require_cache(cfg);
      const Recommender recommender(cfg.provider, cfg.rephrase, cfg.score);
      print_json(to_json(recommender.recommend(rec_prompt, corpora, cfg.default_k)));
    } else if (*evaluate) {
      const EngineConfig cfg = eval_opts.resolve();
      const auto corpora = require_cache(cfg);
      const auto labeled = read_prompts_jsonl(eval_dataset);
      std::vector<ScoreConfig> configs;
      for (const auto& c : split_list(eval_configs)) {
        ScoreConfig sc = parse_score_config(c);
        sc.epsilon = cfg.score.epsilon;
        configs.push_back(sc);
      }
      if (configs.empty()) configs.push_back(cfg.score);
      std::vector<int> ks;
      for (const auto& k : split_list(eval_ks)) {
        try {
          ks.push_back(std::stoi(k));
        } catch (const std::exception&) {
          throw Error(ErrorCode::invalid_input, "bad k value '" + k + "'");
        }
      }
      const auto embedder = make_embedder(cfg.provider);
      print_json(to_json(score_function_sweep(corpora, labeled, *embedder, configs, ks)));
    } else if (*proj) {
      const EngineConfig cfg = proj_opts.resolve();
      Eigen::MatrixXd data;
      std::vector<std::string> labels;
      if (!proj_dataset.empty()) {
        const auto prompts = read_prompts_jsonl(proj_dataset);
        std::vector<std::string> texts;
        for (const auto& p : prompts) {
          texts.push_back(p.text);
          labels.push_back(p.agent);
        }
        const auto rows = embed_texts(cfg.provider, texts);
        data.resize(static_cast<Eigen::Index>(rows.size()), cfg.provider.dim);
        for (std::size_t i = 0; i < rows.size(); ++i) data.row(static_cast<Eigen::Index>(i)) = rows[i].values();
      } else {
        const auto corpora = require_cache(cfg);
        Eigen::Index total = 0;
        for (const auto& [a, c] : corpora) total += c.size();
        data.resize(total, corpora.begin()->second.dim());
        Eigen::Index at = 0;
        for (const auto& [agent, c] : corpora) {
          data.middleRows(at, c.size()) = c.embeddings().cast<double>();
          at += c.size();
          labels.insert(labels.end(), static_cast<std::size_t>(c.size()), agent);
        }
      }
      const PcaModel model = fit_pca(data, proj_dims);
      const auto n = export_plot_data(project(data, model), labels, fs::path(proj_out));
      std::vector<double> eig(model.eigenvalues.data(), model.eigenvalues.data() + model.eigenvalues.size());
      print_json({{"rows", n}, {"dims", proj_dims}, {"eigenvalues", eig}, {"out", proj_out}});
    } else if (*bench) {
      EngineConfig cfg = bench_opts.resolve();
      cfg.rephrase.kind = RephraseKind::identity;
      CorpusMap corpora;
      std::vector<std::string> prompts = bench_prompts;
      if (!bench_dataset.empty()) {
        for (const auto& p : read_prompts_jsonl(bench_dataset)) prompts.push_back(p.text);
      }
      if (bench_agents > 0) {
        std::mt19937_64 rng(cfg.provider.seed);
        std::vector<PromptRecord> synthetic;
        for (int a = 0; a < bench_agents; ++a) {
          for (int r = 0; r < bench_rows; ++r) {
            std::string text;
            for (int t = 0; t < 8; ++t) text += "w" + std::to_string(rng() % 5000) + " ";
            synthetic.push_back({"a" + std::to_string(a) + "-" + std::to_string(r), "agent" + std::to_string(a), text});
          }
        }
        corpora = build_agent_corpora(synthetic, cfg.provider);
        if (prompts.empty()) {
          for (int i = 0; i < 20; ++i) prompts.push_back(synthetic[static_cast<std::size_t>(i * 37) % synthetic.size()].text);
        }
      } else {
        corpora = require_cache(cfg);
      }
      if (prompts.empty()) throw Error(ErrorCode::invalid_input, "no prompts to benchmark (--dataset or --prompt)");
      const Recommender recommender(cfg.provider, cfg.rephrase, cfg.score);
      print_json(to_json(latency_benchmark(corpora, prompts, recommender, bench_reps, bench_warmup, cfg.default_k)));
    } else if (*serve) {
      return run_service(serve_opts.resolve());
    }
  } catch (const Error& e) {
    std::cerr << "error [" << code_name(e.code()) << "]: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
