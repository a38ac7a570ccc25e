#include "promptgrid/runner.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "promptgrid/dataset.hpp"
#include "promptgrid/optimizer.hpp"
#include "promptgrid/templates.hpp"

namespace promptgrid {
namespace {

constexpr std::string_view kLedgerSchema = "promptgrid-ledger-v1";

std::string failure_tag(const ExtractionResult& extracted) {
  if (!extracted.failure) return "";
  return *extracted.failure == ExtractionFailure::kNoAnswerLabelOrNumber ? "no-answer"
                                                                         : "non-numeric";
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

PromptTemplate load_mode_template(const RunConfig& config, bool cot,
                                  std::span<const IclExample> icl) {
  return PromptTemplate::load(
      config.template_dir / (cot ? "with_cot.tmpl" : "sans_cot.tmpl"), cot, icl);
}

std::unique_ptr<CompletionBackend> make_backend(const RunConfig& config) {
  if (!config.replay_path.empty())
    return std::make_unique<ReplayBackend>(ReplayBackend::load(config.replay_path));
  return std::make_unique<HttpBackend>(config.endpoint);
}

nlohmann::json config_snapshot(const RunConfig& config) {
  return nlohmann::json{
      {"model", config.endpoint.model_name},
      {"base_url", config.endpoint.base_url},
      {"decoding",
       {{"temperature", config.endpoint.decoding.temperature},
        {"max_new_tokens", config.endpoint.decoding.max_new_tokens},
        {"stop", config.endpoint.decoding.stop_sequences}}},
      {"dataset", config.dataset_path.string()},
      {"snippet_config", config.snippet_config.string()},
      {"template_dir", config.template_dir.string()},
      {"eval_sizes", config.eval_sizes},
      {"cot_modes", config.cot_modes},
      {"replay", !config.replay_path.empty()},
  };
}

std::string group_file_stem(bool cot, int questions) {
  return std::string("cot=") + (cot ? "yes" : "no") + "_q=" + std::to_string(questions);
}

}  // namespace

void RunConfig::validate() const {
  if (replay_path.empty()) {
    endpoint.validate();  // live runs need a reachable endpoint config
  } else {
    if (endpoint.model_name.empty())
      throw std::invalid_argument("config: model_name is required (it keys the request digests)");
  }
  if (eval_sizes.empty()) throw std::invalid_argument("config: no eval sizes requested");
  for (int size : eval_sizes)
    if (size < 1) throw std::invalid_argument("config: eval size must be >= 1");
  if (cot_modes.empty()) throw std::invalid_argument("config: no CoT modes requested");
  if (parallelism < 1) throw std::invalid_argument("config: parallelism must be >= 1");
  if (!std::filesystem::exists(dataset_path))
    throw std::invalid_argument("config: dataset not found: " + dataset_path.string());
  if (!snippet_config.empty() && !std::filesystem::exists(snippet_config))
    throw std::invalid_argument("config: snippet config not found: " + snippet_config.string());
  for (const char* name : {"sans_cot.tmpl", "with_cot.tmpl"})
    if (!std::filesystem::exists(template_dir / name))
      throw std::invalid_argument("config: template missing: " + (template_dir / name).string());
  if (!replay_path.empty() && !std::filesystem::exists(replay_path))
    throw std::invalid_argument("config: replay file not found: " + replay_path.string());
}

RunLedger run_grid(const RunConfig& config, CompletionBackend& backend, CompletionCache& cache) {
  config.validate();

  const std::vector<QAItem> items = load_dataset(config.dataset_path);
  const SnippetSet snippets =
      config.snippet_config.empty() ? SnippetSet::defaults() : SnippetSet::load(config.snippet_config);
  const int max_size = *std::max_element(config.eval_sizes.begin(), config.eval_sizes.end());
  const SplitPlan splits = make_splits(items, max_size, 0);
  const std::array<IclExample, 4> icl = default_icl_block(items);

  CachingClient client(backend, cache);

  RunLedger ledger;
  ledger.model = config.endpoint.model_name;
  ledger.config_snapshot = config_snapshot(config);

  for (bool cot : config.cot_modes) {
    const PromptTemplate tmpl = load_mode_template(config, cot, icl);
    const std::vector<PromptVariant> variants = enumerate_variants(snippets, {cot});

    ModeRecord mode;
    mode.cot = cot;
    mode.variants.resize(variants.size());

    // One flat job list over (variant, question); completions shared across
    // subset sizes via the cache.
    struct Job {
      std::size_t variant;
      int question;
    };
    std::vector<Job> jobs;
    jobs.reserve(variants.size() * splits.eval.size());
    for (std::size_t v = 0; v < variants.size(); ++v) {
      mode.variants[v].id = variants[v].id();
      mode.variants[v].label = variants[v].label(snippets);
      mode.variants[v].outcomes.resize(splits.eval.size());
      for (int q = 0; q < static_cast<int>(splits.eval.size()); ++q)
        jobs.push_back(Job{v, q});
    }

    parallel_for(jobs.size(), config.parallelism, [&](std::size_t j) {
      const Job& job = jobs[j];
      const QAItem& item = splits.eval[job.question];
      const SystemMessage system = assemble_system_message(snippets, variants[job.variant]);
      const RenderedPrompt prompt =
          render_prompt(system, tmpl, item.question, std::nullopt, variants[job.variant].id(),
                        item.index);
      const CompletionRequest request{config.endpoint.model_name, prompt.text,
                                      config.endpoint.decoding};
      const std::string completion = client.complete(request);
      const ExtractionResult extracted = extract_answer(completion, cot);

      OutcomeRecord& record = mode.variants[job.variant].outcomes[job.question];
      record.question = item.index;
      record.digest = request.digest();
      record.matched = extracted.ok() && exact_match(*extracted.value, item.gold);
      record.span = extracted.candidate_span;
      if (extracted.value) record.value = extracted.value->str();
      record.failure = failure_tag(extracted);
    });

    for (int size : config.eval_sizes) {
      LedgerGroup group;
      group.cot = cot;
      group.questions = size;
      for (const VariantRecord& variant : mode.variants) {
        std::int64_t matched = 0;
        for (int q = 0; q < size; ++q)
          if (variant.outcomes[q].matched) ++matched;
        group.variant_ems.push_back(Fraction::from_counts(matched, size));
      }
      group.stats = group_stats(group.variant_ems, 0);
      ledger.groups.push_back(std::move(group));
    }
    ledger.modes.push_back(std::move(mode));
  }
  return ledger;
}

void save_ledger(const RunLedger& ledger, const std::filesystem::path& path) {
  nlohmann::json j;
  j["schema"] = kLedgerSchema;
  j["model"] = ledger.model;
  j["config"] = ledger.config_snapshot;

  for (const ModeRecord& mode : ledger.modes) {
    nlohmann::json jm{{"cot", mode.cot}};
    for (const VariantRecord& variant : mode.variants) {
      nlohmann::json jv{{"id", variant.id}, {"label", variant.label}};
      for (const OutcomeRecord& o : variant.outcomes) {
        nlohmann::json jo{{"q", o.question},
                          {"digest", o.digest},
                          {"matched", o.matched},
                          {"span", o.span},
                          {"failure", o.failure}};
        jo["value"] = o.value ? nlohmann::json(*o.value) : nlohmann::json(nullptr);
        jv["outcomes"].push_back(std::move(jo));
      }
      jm["variants"].push_back(std::move(jv));
    }
    j["modes"].push_back(std::move(jm));
  }

  for (const LedgerGroup& group : ledger.groups) {
    nlohmann::json jg{{"cot", group.cot}, {"questions", group.questions}};
    for (const Fraction& em : group.variant_ems)
      jg["ems"].push_back({em.num(), em.den()});
    jg["stats"] = {{"baseline", group.stats.baseline_em.to_decimal(4)},
                   {"mean", group.stats.mean.to_decimal(4)},
                   {"std", group.stats.stddev},
                   {"min", group.stats.min.to_decimal(4)},
                   {"max", group.stats.max.to_decimal(4)},
                   {"n", group.stats.n_variants}};
    j["groups"].push_back(std::move(jg));
  }

  write_text_file(path, j.dump(2) + "\n");
}

RunLedger load_ledger(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("ledger: cannot open " + path.string());
  nlohmann::json j = nlohmann::json::parse(in);
  if (j.value("schema", "") != kLedgerSchema)
    throw std::runtime_error("ledger: unrecognized schema in " + path.string());

  RunLedger ledger;
  ledger.model = j.at("model").get<std::string>();
  ledger.config_snapshot = j.at("config");

  for (const auto& jm : j.value("modes", nlohmann::json::array())) {
    ModeRecord mode;
    mode.cot = jm.at("cot").get<bool>();
    for (const auto& jv : jm.value("variants", nlohmann::json::array())) {
      VariantRecord variant;
      variant.id = jv.at("id").get<std::string>();
      variant.label = jv.at("label").get<std::string>();
      for (const auto& jo : jv.value("outcomes", nlohmann::json::array())) {
        OutcomeRecord o;
        o.question = jo.at("q").get<int>();
        o.digest = jo.at("digest").get<std::string>();
        o.matched = jo.at("matched").get<bool>();
        o.span = jo.at("span").get<std::string>();
        o.failure = jo.at("failure").get<std::string>();
        if (!jo.at("value").is_null()) o.value = jo.at("value").get<std::string>();
        variant.outcomes.push_back(std::move(o));
      }
      mode.variants.push_back(std::move(variant));
    }
    ledger.modes.push_back(std::move(mode));
  }

  for (const auto& jg : j.value("groups", nlohmann::json::array())) {
    LedgerGroup group;
    group.cot = jg.at("cot").get<bool>();
    group.questions = jg.at("questions").get<int>();
    for (const auto& em : jg.at("ems"))
      group.variant_ems.push_back(
          Fraction::from_counts(em.at(0).get<std::int64_t>(), em.at(1).get<std::int64_t>()));
    // Stats are derived data; recompute rather than trust the file.
    group.stats = group_stats(group.variant_ems, 0);
    ledger.groups.push_back(std::move(group));
  }
  return ledger;
}

void render_grid_reports(const RunLedger& ledger, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);

  std::vector<StatsRow> rows;
  for (const LedgerGroup& group : ledger.groups)
    rows.push_back(StatsRow{ledger.model, group.questions, group.cot, group.stats});
  write_text_file(out_dir / "stats.md", render_stats_markdown(rows));
  write_text_file(out_dir / "stats.csv", render_stats_csv(rows));

  for (const LedgerGroup& group : ledger.groups) {
    const ModeRecord* mode = nullptr;
    for (const ModeRecord& m : ledger.modes)
      if (m.cot == group.cot) mode = &m;
    if (!mode || mode->variants.size() != group.variant_ems.size())
      throw std::runtime_error("ledger: group without a matching variant table");

    std::vector<RankedEntry> entries;
    for (std::size_t v = 0; v < group.variant_ems.size(); ++v)
      entries.push_back(RankedEntry{group.variant_ems[v], mode->variants[v].label});
    write_text_file(out_dir / ("ranked_" + group_file_stem(group.cot, group.questions) + ".txt"),
                    render_ranked_list(entries));
  }
}

int cmd_grid(const RunConfig& config) {
  config.validate();
  std::unique_ptr<CompletionBackend> backend = make_backend(config);
  CompletionCache cache(config.cache_path);

  RunLedger ledger = run_grid(config, *backend, cache);

  std::filesystem::create_directories(config.output_dir);
  save_ledger(ledger, config.output_dir / "ledger.json");
  render_grid_reports(ledger, config.output_dir);

  for (const LedgerGroup& group : ledger.groups)
    std::cout << "group cot=" << (group.cot ? "yes" : "no") << " q=" << group.questions
              << ": baseline " << group.stats.baseline_em.to_decimal(4) << ", mean "
              << group.stats.mean.to_decimal(4) << ", n=" << group.stats.n_variants << "\n";
  std::cout << "ledger: " << (config.output_dir / "ledger.json").string() << "\n";
  return 0;
}

int cmd_verify_stats(const std::filesystem::path& fixtures_dir) {
  std::vector<VerifyOutcome> outcomes = verify_stats(fixtures_dir);
  if (outcomes.empty()) {
    std::cerr << "verify-stats: no groups found under " << fixtures_dir << "\n";
    return 1;
  }
  bool all_pass = true;
  for (const VerifyOutcome& v : outcomes) {
    std::cout << (v.pass ? "PASS " : "FAIL ") << v.name;
    if (!v.pass) std::cout << " (" << v.detail << ")";
    std::cout << "\n";
    all_pass &= v.pass;
  }
  std::cout << (all_pass ? "all groups match\n" : "some groups mismatch\n");
  return all_pass ? 0 : 1;
}

int cmd_report(const std::filesystem::path& ledger_path, const std::filesystem::path& out_dir,
               const std::filesystem::path& publisher_csv) {
  RunLedger ledger = load_ledger(ledger_path);
  render_grid_reports(ledger, out_dir);

  if (!publisher_csv.empty()) {
    std::ifstream in(publisher_csv);
    if (!in) throw std::runtime_error("cannot open " + publisher_csv.string());
    std::vector<PublisherRow> rows;
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::istringstream fields(line);
      std::string model, reported, ours;
      std::getline(fields, model, ',');
      std::getline(fields, reported, ',');
      std::getline(fields, ours, ',');
      rows.push_back(PublisherRow{model, Fraction::parse_decimal(reported),
                                  Fraction::parse_decimal(ours)});
    }
    write_text_file(out_dir / "publisher_comparison.md", render_publisher_markdown(rows));
  }
  std::cout << "reports written to " << out_dir.string() << "\n";
  return 0;
}

int cmd_optimize(const OptimizeCmdConfig& config) {
  config.run.validate();
  if (config.questions < 1) throw std::invalid_argument("optimize: questions must be >= 1");

  const std::vector<QAItem> items = load_dataset(config.run.dataset_path);
  const SplitPlan splits = make_splits(items, config.questions, config.questions);
  const std::array<IclExample, 4> icl = default_icl_block(items);
  const PromptTemplate tmpl = load_mode_template(config.run, config.cot, icl);
  const SnippetSet snippets = config.run.snippet_config.empty()
                                  ? SnippetSet::defaults()
                                  : SnippetSet::load(config.run.snippet_config);

  std::unique_ptr<CompletionBackend> backend = make_backend(config.run);
  CompletionCache cache(config.run.cache_path);
  CachingClient client(*backend, cache);

  // Seeds: the empty baseline, plus the best grid variant when a grid
  // ledger is available (its ES EM also feeds the comparison row).
  std::vector<PromptCandidate> seeds;
  seeds.push_back(PromptCandidate{"", std::nullopt, "seed"});

  std::optional<Fraction> grid_best_es;
  std::optional<PromptCandidate> grid_best_seed;
  if (!config.grid_ledger.empty()) {
    RunLedger grid = load_ledger(config.grid_ledger);
    const ModeRecord* mode = nullptr;
    const LedgerGroup* group = nullptr;
    for (const ModeRecord& m : grid.modes)
      if (m.cot == config.cot) mode = &m;
    for (const LedgerGroup& g : grid.groups)
      if (g.cot == config.cot && g.questions == config.questions) group = &g;
    if (!mode || !group)
      throw std::invalid_argument("grid ledger has no cot=" + std::string(config.cot ? "yes" : "no") +
                                  " q=" + std::to_string(config.questions) + " group");
    std::size_t best = 0;
    for (std::size_t v = 1; v < group->variant_ems.size(); ++v)
      if (group->variant_ems[best] < group->variant_ems[v]) best = v;
    grid_best_es = group->variant_ems[best];

    // Recover the snippet texts behind the winning variant id.
    for (const PromptVariant& variant : enumerate_variants(snippets, {config.cot})) {
      if (variant.id() == mode->variants[best].id) {
        grid_best_seed = PromptCandidate{
            system_body(assemble_system_message(snippets, variant)), std::nullopt, "seed"};
        break;
      }
    }
    if (!grid_best_seed)
      throw std::invalid_argument("grid ledger variant ids do not match the snippet config");
    if (!(*grid_best_seed == seeds.front())) seeds.push_back(*grid_best_seed);
  } else {
    std::cerr << "warning: no grid ledger given; comparison row will be omitted\n";
  }

  std::ifstream meta_in(config.run.template_dir / "meta_prompt.tmpl");
  if (!meta_in)
    throw std::invalid_argument("optimize: missing meta_prompt.tmpl in " +
                                config.run.template_dir.string());
  std::string meta_scaffold((std::istreambuf_iterator<char>(meta_in)),
                            std::istreambuf_iterator<char>());

  PipelineEvaluator evaluator(client, config.run.endpoint, tmpl, config.run.parallelism);
  LlmProposer proposer(client, config.run.endpoint, meta_scaffold);

  std::filesystem::create_directories(config.run.output_dir);
  OptimizeOptions options;
  options.budget = config.budget;
  options.batch_k = config.batch_k;
  options.ledger_path = config.run.output_dir / "optimization_ledger.jsonl";
  options.resume = config.resume;

  OptimizationReport report =
      optimize(evaluator, proposer, splits.opt, splits.eval, seeds, options);

  std::string summary;
  summary += "Best candidate (" + report.best.provenance + "):\n";
  summary += render_candidate(report.best) + "\n\n";
  summary += "OS EM " + report.os_em.to_decimal(2) + ", ES EM " + report.es_em.to_decimal(2) +
             ", Avg " + report.avg_em.to_decimal(3) + ", Delta " + report.delta.to_decimal(2) +
             "\n";
  write_text_file(config.run.output_dir / "optimization_report.txt", summary);
  std::cout << summary;

  if (grid_best_es && grid_best_seed) {
    // The grid winner was seeded into round 0, so its OS EM is in history.
    std::optional<Fraction> pt_os;
    for (const ScoredCandidate& scored : report.history)
      if (scored.candidate == *grid_best_seed) pt_os = scored.os_em;
    if (pt_os) {
      GridComparison cmp = compare_against_grid(
          ComparisonRow{config.questions, *pt_os, *grid_best_es},
          ComparisonRow{config.questions, report.os_em, report.es_em});
      write_text_file(config.run.output_dir / "comparison.md", render_comparison_markdown(cmp));
      write_text_file(config.run.output_dir / "comparison.csv", render_comparison_csv(cmp));
      std::cout << "\n" << render_comparison_markdown(cmp);
    }
  }
  return 0;
}

}  // namespace promptgrid
