#include "decoy/adversary.hpp"
#include "decoy/config.hpp"
#include "decoy/corpus.hpp"
#include "decoy/errors.hpp"
#include "decoy/gateway.hpp"
#include "decoy/metrics.hpp"
#include "decoy/pipeline.hpp"
#include "decoy/text_util.hpp"
#include "decoy/trace.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace fs = std::filesystem;
using namespace decoy;

namespace {

constexpr int kExitConfigError = 1;
constexpr int kExitRecordErrors = 2;

// Flags shared by every subcommand that builds a RunConfig. Convenience flags
// funnel into apply_config_entry so the CLI and the config file stay one
// vocabulary.
struct CommonArgs {
    std::string config_file;
    std::vector<std::pair<std::string, std::string>> overrides; // flag order
    std::vector<std::string> sets;

    RunConfig build() const {
        RunConfig cfg;
        if (!config_file.empty()) cfg = load_run_config(config_file);
        for (const auto& [key, value] : overrides) apply_config_entry(cfg, key, value);
        for (const std::string& s : sets) {
            auto eq = s.find('=');
            if (eq == std::string::npos) {
                throw ConfigError("--set needs key=value, got: " + s);
            }
            apply_config_entry(cfg, s.substr(0, eq), s.substr(eq + 1));
        }
        cfg.validate();
        return cfg;
    }
};

void add_common_flags(CLI::App* cmd, CommonArgs& args) {
    auto pass = [&args](const char* key) {
        return [&args, key](const std::string& v) { args.overrides.emplace_back(key, v); };
    };
    cmd->add_option("--config", args.config_file, "key = value configuration file");
    cmd->add_option("--set", args.sets, "extra key=value override, repeatable");

    cmd->add_option_function<std::string>("--endpoint", pass("endpoint"),
                                          "OpenAI-compatible base URL shared by every role");
    cmd->add_option_function<std::string>("--model", pass("model"), "model name for every role");
    cmd->add_option_function<std::string>("--mock", pass("mock_script"),
                                          "mock script for every role (overrides endpoints)");
    cmd->add_option_function<std::string>("--anon-endpoint", pass("anon_endpoint"),
                                          "rewriter endpoint");
    cmd->add_option_function<std::string>("--anon-model", pass("anon_model"), "rewriter model");
    cmd->add_option_function<std::string>("--anon-mock", pass("anon_mock"),
                                          "rewriter mock script");
    cmd->add_option_function<std::string>("--adv-endpoint", pass("adv_endpoint"),
                                          "adversary endpoint");
    cmd->add_option_function<std::string>("--adv-model", pass("adv_model"), "adversary model");
    cmd->add_option_function<std::string>("--adv-mock", pass("adv_mock"),
                                          "adversary mock script");
    cmd->add_option_function<std::string>("--judge-endpoint", pass("judge_endpoint"),
                                          "judge endpoint (equivalence and utility)");
    cmd->add_option_function<std::string>("--judge-model", pass("judge_model"), "judge model");
    cmd->add_option_function<std::string>("--judge-mock", pass("judge_mock"),
                                          "judge mock script");

    cmd->add_option_function<std::string>("--data-dir", pass("data_dir"),
                                          "directory holding templates/, demos/, pools/");
    cmd->add_option_function<std::string>("--attributes", pass("attributes"),
                                          "comma-separated attribute tokens to protect");
    cmd->add_option_function<std::string>("--multi-attribute", pass("multi_attribute"),
                                          "on|off: one merged prompt per record");
    cmd->add_option_function<std::string>("--seed", pass("seed"),
                                          "seed for every random choice in the run");
    cmd->add_option_function<std::string>("--max-iterations", pass("max_iterations"),
                                          "rewrite budget per record");
    cmd->add_option_function<std::string>("--top-k", pass("match_top_k"),
                                          "score the top k adversary guesses (1 or 3)");
    cmd->add_option_function<std::string>("--target", pass("use_target"),
                                          "on|off: steer rewrites toward a wrong value");
    cmd->add_option_function<std::string>("--anon-cond", pass("anon_conditioning"),
                                          "rewriter conditioning: none, gt, inf or gt,inf");
    cmd->add_option_function<std::string>("--adv-gt", pass("adversary_sees_gt"),
                                          "on|off: disclose the true value to the adversary");
    cmd->add_option_function<std::string>("--early-stopping", pass("early_stopping"),
                                          "on|off: stop once the adversary is fooled");
    cmd->add_option_function<std::string>("--temperature", pass("temperature"),
                                          "sampling temperature");
    cmd->add_option_function<std::string>("--max-tokens", pass("max_tokens"),
                                          "completion token cap");
    cmd->add_option_function<std::string>("--retries", pass("retries"),
                                          "transport retries per call");
    cmd->add_option_function<std::string>("--budget-factor", pass("budget_factor"),
                                          "call ceiling multiplier per record-attribute");
    cmd->add_option_function<std::string>("--parallelism", pass("parallelism"),
                                          "concurrent records");
}

// Refuses to write into a non-empty directory unless told to.
void prepare_out_dir(const std::string& out, bool overwrite, bool resuming) {
    if (out.empty()) return;
    fs::path p(out);
    if (fs::exists(p) && fs::is_directory(p) && !fs::is_empty(p) && !overwrite && !resuming) {
        throw ConfigError("output directory is not empty: " + out +
                          " (pass --overwrite, or --resume where supported)");
    }
    fs::create_directories(p);
}

Gateways build_gateways(const RunConfig& run, bool need_anonymizer) {
    Gateways g;
    if (need_anonymizer) {
        if (!run.anonymizer.configured()) {
            throw ConfigError("no rewriter backend configured (--endpoint/--model or --mock)");
        }
        g.anonymizer = make_gateway(run.anonymizer, run);
    }
    if (!run.adversary.configured()) {
        throw ConfigError("no adversary backend configured (--endpoint/--model or --mock)");
    }
    g.adversary = make_gateway(run.adversary, run);
    if (run.judge.configured()) g.judge = make_gateway(run.judge, run);
    return g;
}

std::vector<AnonymizationTrace> read_traces(const std::string& run_dir) {
    std::istringstream in(read_file(run_dir + "/traces.jsonl"));
    std::vector<AnonymizationTrace> traces;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        traces.push_back(AnonymizationTrace::from_json(nlohmann::json::parse(line)));
    }
    return traces;
}

RunManifest read_manifest(const std::string& run_dir) {
    return RunManifest::from_json(nlohmann::json::parse(read_file(run_dir + "/manifest.json")));
}

std::map<StopCause, int> stop_counts(const std::vector<AnonymizationTrace>& traces) {
    std::map<StopCause, int> counts;
    for (const auto& t : traces) ++counts[t.stop_cause];
    return counts;
}

int error_exit(const std::vector<AnonymizationTrace>& traces, bool tolerate) {
    return !tolerate && stop_counts(traces)[StopCause::error] > 0 ? kExitRecordErrors : 0;
}

void print_run_summary(const BatchResult& result) {
    StepHistogram h = step_histogram(result.traces);
    auto causes = stop_counts(result.traces);
    std::printf("records=%zu reused=%d mean_rounds=%.2f adversary_fooled=%d max_iterations=%d "
                "error=%d\n",
                result.traces.size(), result.reused, h.mean,
                causes[StopCause::adversary_fooled], causes[StopCause::max_iterations],
                causes[StopCause::error]);
}

// Judges every finished trace, treating unusable replies as missing.
std::map<std::string, UtilityJudgment> run_utility_judge(const RunConfig& run,
                                                         const std::vector<AnonymizationTrace>& traces,
                                                         const std::string& out_dir) {
    std::map<std::string, UtilityJudgment> judgments;
    auto judge = make_gateway(run.judge, run);
    auto budget = std::make_shared<CallBudget>(
        std::max<long>(1, static_cast<long>(run.budget_factor) *
                              static_cast<long>(traces.size())));
    judge->set_budget(budget);
    if (!out_dir.empty()) {
        judge->set_log(std::make_shared<ExchangeLog>(out_dir + "/judge_exchanges.jsonl"));
    }
    TemplateSet templates = TemplateSet::load(run.template_dir());
    DecodingParams params{run.temperature, run.max_tokens};
    for (const AnonymizationTrace& t : traces) {
        if (t.stop_cause == StopCause::error) continue;
        try {
            judgments.emplace(t.record_id, judge_utility(templates, *judge, params,
                                                         t.original_text, t.final_text));
        } catch (const ParseFailure&) {
            // counted as missing by the report
        }
    }
    return judgments;
}

// ---- subcommands ------------------------------------------------------------

struct AnonymizeArgs {
    CommonArgs common;
    std::string corpus_path;
    std::string out_dir;
    bool overwrite = false;
    bool resume = false;
    bool tolerate = false;
};

int cmd_anonymize(const AnonymizeArgs& a) {
    RunConfig run = a.common.build();
    std::vector<Record> corpus = load_corpus(a.corpus_path);
    prepare_out_dir(a.out_dir, a.overwrite, a.resume);
    Gateways gateways = build_gateways(run, true);
    Pipeline pipeline(run, run.pipeline, gateways);
    BatchResult result = pipeline.run_batch(corpus, run.attributes, a.out_dir, a.resume);
    print_run_summary(result);
    return error_exit(result.traces, a.tolerate);
}

struct AttackArgs {
    CommonArgs common;
    std::string corpus_path;
    std::string out_dir;
    bool overwrite = false;
    bool tolerate = false;
};

int cmd_attack(const AttackArgs& a) {
    RunConfig run = a.common.build();
    std::vector<Record> corpus = load_corpus(a.corpus_path);
    prepare_out_dir(a.out_dir, a.overwrite, false);
    Gateways gateways = build_gateways(run, false);
    Pipeline pipeline(run, run.pipeline, gateways);

    std::shared_ptr<ExchangeLog> log;
    if (!a.out_dir.empty()) {
        log = std::make_shared<ExchangeLog>(a.out_dir + "/exchanges.jsonl");
        gateways.adversary->set_log(log);
        if (gateways.judge) gateways.judge->set_log(log);
    }
    RunManifest manifest;
    manifest.config = run.pipeline;
    manifest.anonymizer_backend = "";
    manifest.adversary_backend = gateways.adversary->backend_id();
    manifest.judge_backend = gateways.judge ? gateways.judge->backend_id() : "";
    manifest.template_checksums = pipeline.templates().checksums();
    manifest.demo_checksum = demo_checksum(run.demo_dir());
    manifest.corpus_id = corpus_fingerprint(corpus);
    manifest.attributes = run.attributes;
    manifest.started_at = iso8601_now();
    if (!a.out_dir.empty()) {
        write_file(a.out_dir + "/manifest.json", manifest.to_json().dump(2) + "\n");
    }

    std::vector<AnonymizationTrace> traces = pipeline.attack_only(corpus, run.attributes);

    std::map<Attribute, std::vector<MatchVerdict>> verdicts;
    for (const auto& t : traces) {
        if (t.stop_cause == StopCause::error) continue;
        for (const auto& [attr, rec] : t.final_attack) verdicts[attr].push_back(rec.verdict);
    }
    if (!verdicts.empty()) {
        PrivacyResult privacy = privacy_accuracy(verdicts);
        for (const auto& [attr, pct] : privacy.per_attribute) {
            std::printf("%-22s adversary accuracy %.1f%%\n",
                        std::string(attribute_display(attr)).c_str(), pct);
        }
        std::printf("%-22s adversary accuracy %.1f%%\n", "average", privacy.average);
    }
    if (!a.out_dir.empty()) {
        std::string lines;
        for (const auto& t : traces) lines += t.to_json().dump() + "\n";
        write_file(a.out_dir + "/traces.jsonl", lines);
        manifest.finished_at = iso8601_now();
        write_file(a.out_dir + "/manifest.json", manifest.to_json().dump(2) + "\n");
    }
    int errors = stop_counts(traces)[StopCause::error];
    if (errors > 0) std::fprintf(stderr, "failed records: %d\n", errors);
    return error_exit(traces, a.tolerate);
}

struct EvaluateArgs {
    CommonArgs common;
    std::string run_dir;
    std::string corpus_path;
    std::string out_dir;
    bool overwrite = false;
    bool tolerate = false;
};

int cmd_evaluate(const EvaluateArgs& a) {
    RunConfig run = a.common.build();
    RunManifest manifest = read_manifest(a.run_dir);
    std::vector<AnonymizationTrace> traces = read_traces(a.run_dir);
    std::vector<Record> originals = load_corpus(a.corpus_path);
    prepare_out_dir(a.out_dir, a.overwrite, false);

    bool utility_enabled = run.judge.configured();
    std::map<std::string, UtilityJudgment> judgments;
    if (utility_enabled) judgments = run_utility_judge(run, traces, a.out_dir);

    EvaluationReport report = build_report(traces, manifest, originals, judgments,
                                           utility_enabled);
    std::fputs(report.text_table().c_str(), stdout);
    if (!a.out_dir.empty()) {
        write_file(a.out_dir + "/report.json", report.to_json().dump(2) + "\n");
        write_file(a.out_dir + "/report.txt", report.text_table());
    }
    return !a.tolerate && report.errors > 0 ? kExitRecordErrors : 0;
}

struct AblateArgs {
    CommonArgs common;
    std::string corpus_path;
    std::string out_dir;
    bool overwrite = false;
    bool tolerate = false;
};

std::string anon_axis(const PipelineConfig& c) {
    if (c.anon_conditioning.ground_truth && c.anon_conditioning.adversary_inference)
        return "GT+Inf";
    if (c.anon_conditioning.ground_truth) return "GT";
    if (c.anon_conditioning.adversary_inference) return "Inf";
    return "none";
}

int cmd_ablate(const AblateArgs& a) {
    RunConfig base = a.common.build();
    std::vector<Record> corpus = load_corpus(a.corpus_path);
    prepare_out_dir(a.out_dir, a.overwrite, false);

    struct RowResult {
        PipelineConfig config;
        std::optional<MetricRow> summary;
        std::string error;
    };
    std::vector<RowResult> rows;
    bool utility_enabled = base.judge.configured();

    for (const PipelineConfig& cfg : ablation_rows(base.pipeline.seed)) {
        RowResult row{cfg, std::nullopt, ""};
        std::string row_dir =
            (fs::path(a.out_dir) / ("row-" + std::to_string(rows.size() + 1))).string();
        try {
            RunConfig run = base;
            run.pipeline = cfg;
            Gateways gateways = build_gateways(run, true);
            Pipeline pipeline(run, cfg, gateways);
            fs::create_directories(row_dir);
            BatchResult result = pipeline.run_batch(corpus, run.attributes, row_dir, false);
            std::map<std::string, UtilityJudgment> judgments;
            if (utility_enabled) judgments = run_utility_judge(run, result.traces, row_dir);
            EvaluationReport report = build_report(result.traces, result.manifest, corpus,
                                                   judgments, utility_enabled);
            write_file(row_dir + "/report.json", report.to_json().dump(2) + "\n");
            row.summary = report.summary;
            if (report.errors > 0) row.error = std::to_string(report.errors) + " failed records";
        } catch (const std::exception& e) {
            row.error = e.what();
        }
        rows.push_back(std::move(row));
    }

    std::ostringstream table;
    char line[200];
    std::snprintf(line, sizeof(line), "%2s  %-6s %-7s %-6s %-4s %8s %8s %8s %8s %5s\n", "#",
                  "Target", "Anon", "Adv", "ES", "privacy", "rouge-L", "bleu", "utility", "n");
    table << line;
    bool any_failed = false;
    nlohmann::json rows_json = nlohmann::json::array();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const RowResult& r = rows[i];
        std::string target = r.config.use_target ? "on" : "off";
        std::string adv = r.config.adversary_sees_gt ? "GT" : "uncond";
        std::string es = r.config.early_stopping ? "on" : "off";
        nlohmann::json row_json{{"config", r.config.to_json()},
                                {"config_hash", r.config.hash()},
                                {"axes", r.config.axes_label()}};
        if (r.summary) {
            std::string utility = "       -";
            if (r.summary->utility_percent) {
                char buf[16];
                std::snprintf(buf, sizeof(buf), "%8.1f", *r.summary->utility_percent);
                utility = buf;
            }
            std::snprintf(line, sizeof(line),
                          "%2zu  %-6s %-7s %-6s %-4s %8.1f %8.1f %8.1f %s %5d\n", i + 1,
                          target.c_str(), anon_axis(r.config).c_str(), adv.c_str(), es.c_str(),
                          r.summary->privacy_percent, r.summary->rougel_percent,
                          r.summary->bleu_percent, utility.c_str(), r.summary->n);
            row_json["summary"] = nlohmann::json{{"privacy_percent", r.summary->privacy_percent},
                                                 {"rougel_percent", r.summary->rougel_percent},
                                                 {"bleu_percent", r.summary->bleu_percent},
                                                 {"n", r.summary->n}};
            if (r.summary->utility_percent) {
                row_json["summary"]["utility_percent"] = *r.summary->utility_percent;
            }
            if (!r.error.empty()) row_json["error"] = r.error;
        } else {
            std::snprintf(line, sizeof(line), "%2zu  %-6s %-7s %-6s %-4s FAILED: %s\n", i + 1,
                          target.c_str(), anon_axis(r.config).c_str(), adv.c_str(), es.c_str(),
                          r.error.c_str());
            row_json["error"] = r.error;
        }
        if (!r.error.empty()) any_failed = true;
        table << line;
        rows_json.push_back(std::move(row_json));
    }
    std::fputs(table.str().c_str(), stdout);
    write_file(a.out_dir + "/ablation.txt", table.str());
    write_file(a.out_dir + "/ablation.json", rows_json.dump(2) + "\n");
    return !a.tolerate && any_failed ? kExitRecordErrors : 0;
}

struct ExportArgs {
    CommonArgs common;
    std::string pool_path;
    std::string corpus_path;
    std::string out_dir;
    bool overwrite = false;
    bool tolerate = false;
};

int cmd_export_finetune(const ExportArgs& a) {
    RunConfig run = a.common.build();
    if (a.pool_path.empty() == a.corpus_path.empty()) {
        throw ConfigError("pass exactly one of --pool (raw entries) or --corpus (filtered)");
    }
    prepare_out_dir(a.out_dir, a.overwrite, false);

    std::vector<Record> records;
    std::size_t dropped = 0;
    TemplateSet templates = TemplateSet::load(run.template_dir());
    if (!a.pool_path.empty()) {
        std::vector<PoolEntry> entries = load_pool_entries(a.pool_path);
        Matcher matcher(SynonymTable::load(run.resolved_synonyms_file()));
        std::shared_ptr<ChatGateway> judge;
        if (run.judge.configured()) {
            judge = make_gateway(run.judge, run);
            matcher.set_judge(&templates, judge, DecodingParams{run.temperature, run.max_tokens});
        }
        FilterResult filtered = filter_finetune_pool(entries, matcher);
        write_file(a.out_dir + "/drop_log.txt", filtered.drop_log());
        dropped = filtered.dropped.size();
        records = std::move(filtered.kept);
    } else {
        records = load_corpus(a.corpus_path, RecordSource::finetune_pool);
    }

    if (!run.anonymizer.configured()) {
        throw ConfigError("no teacher backend configured (--endpoint/--model or --mock)");
    }
    auto teacher = make_gateway(run.anonymizer, run);
    FinetuneExport result = export_finetune_dataset(records, run, teacher, a.out_dir);
    std::printf("exported=%zu train=%d validation=%d skipped=%d dropped=%zu\n",
                result.pairs.size(), result.train_count, result.validation_count, result.skipped,
                dropped);
    return !a.tolerate && result.skipped > 0 ? kExitRecordErrors : 0;
}

struct HistogramArgs {
    std::string run_dir;
    std::string out_dir;
    bool overwrite = false;
};

int cmd_histogram(const HistogramArgs& a) {
    StepHistogram h = step_histogram(read_traces(a.run_dir));
    std::fputs(h.text_table().c_str(), stdout);
    if (!a.out_dir.empty()) {
        prepare_out_dir(a.out_dir, a.overwrite, false);
        write_file(a.out_dir + "/histogram.json", h.to_json().dump(2) + "\n");
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"adversarial rewriting against attribute-inference attacks"};
    app.require_subcommand(1);

    AnonymizeArgs anon_args;
    CLI::App* anonymize = app.add_subcommand("anonymize", "rewrite a corpus until the adversary "
                                                          "guesses wrong");
    add_common_flags(anonymize, anon_args.common);
    anonymize->add_option("--corpus", anon_args.corpus_path, "corpus JSONL")->required();
    anonymize->add_option("-o,--out", anon_args.out_dir, "run directory for traces + manifest");
    anonymize->add_flag("--overwrite", anon_args.overwrite, "allow a non-empty run directory");
    anonymize->add_flag("--resume", anon_args.resume, "reuse finished traces from the directory");
    anonymize->add_flag("--tolerate", anon_args.tolerate, "exit 0 despite failed records");

    AttackArgs attack_args;
    CLI::App* attack = app.add_subcommand("attack", "run the attribute inference attack on raw "
                                                    "texts");
    add_common_flags(attack, attack_args.common);
    attack->add_option("--corpus", attack_args.corpus_path, "corpus JSONL")->required();
    attack->add_option("-o,--out", attack_args.out_dir, "directory for traces + manifest");
    attack->add_flag("--overwrite", attack_args.overwrite, "allow a non-empty directory");
    attack->add_flag("--tolerate", attack_args.tolerate, "exit 0 despite failed records");

    EvaluateArgs eval_args;
    CLI::App* evaluate = app.add_subcommand("evaluate", "score a finished run: privacy, overlap, "
                                                        "utility");
    add_common_flags(evaluate, eval_args.common);
    evaluate->add_option("--run", eval_args.run_dir, "run directory (manifest.json, traces.jsonl)")
        ->required();
    evaluate->add_option("--corpus", eval_args.corpus_path, "the corpus the run was made from")
        ->required();
    evaluate->add_option("-o,--out", eval_args.out_dir, "directory for report files");
    evaluate->add_flag("--overwrite", eval_args.overwrite, "allow a non-empty directory");
    evaluate->add_flag("--tolerate", eval_args.tolerate, "exit 0 despite failed records");

    AblateArgs ablate_args;
    CLI::App* ablate = app.add_subcommand("ablate", "run the six conditioning variants and "
                                                    "tabulate them");
    add_common_flags(ablate, ablate_args.common);
    ablate->add_option("--corpus", ablate_args.corpus_path, "corpus JSONL")->required();
    ablate->add_option("-o,--out", ablate_args.out_dir, "directory for per-variant runs")
        ->required();
    ablate->add_flag("--overwrite", ablate_args.overwrite, "allow a non-empty directory");
    ablate->add_flag("--tolerate", ablate_args.tolerate, "exit 0 despite failed variants");

    ExportArgs export_args;
    CLI::App* exporter = app.add_subcommand("export-finetune", "build the instruction-tuning "
                                                               "dataset from a teacher model");
    add_common_flags(exporter, export_args.common);
    exporter->add_option("--pool", export_args.pool_path,
                         "raw candidate JSONL with prior guesses (gets filtered)");
    exporter->add_option("--corpus", export_args.corpus_path, "already-filtered corpus JSONL");
    exporter->add_option("-o,--out", export_args.out_dir, "directory for the dataset files")
        ->required();
    exporter->add_flag("--overwrite", export_args.overwrite, "allow a non-empty directory");
    exporter->add_flag("--tolerate", export_args.tolerate, "exit 0 despite skipped records");

    HistogramArgs hist_args;
    CLI::App* histogram = app.add_subcommand("histogram", "count rewrite rounds across a run's "
                                                          "traces");
    histogram->add_option("--run", hist_args.run_dir, "run directory with traces.jsonl")
        ->required();
    histogram->add_option("-o,--out", hist_args.out_dir, "directory for histogram.json");
    histogram->add_flag("--overwrite", hist_args.overwrite, "allow a non-empty directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : kExitConfigError;
    }

    try {
        if (anonymize->parsed()) return cmd_anonymize(anon_args);
        if (attack->parsed()) return cmd_attack(attack_args);
        if (evaluate->parsed()) return cmd_evaluate(eval_args);
        if (ablate->parsed()) return cmd_ablate(ablate_args);
        if (exporter->parsed()) return cmd_export_finetune(export_args);
        if (histogram->parsed()) return cmd_histogram(hist_args);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfigError;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfigError;
    }
    return kExitConfigError;
}
