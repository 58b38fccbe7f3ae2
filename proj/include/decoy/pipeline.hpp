#pragma once

#include "decoy/adversary.hpp"
#include "decoy/anonymizer.hpp"
#include "decoy/config.hpp"
#include "decoy/gateway.hpp"
#include "decoy/prompts.hpp"
#include "decoy/target_pool.hpp"
#include "decoy/trace.hpp"

#include "json.hpp"

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace decoy {

struct Gateways {
    std::shared_ptr<ChatGateway> anonymizer;
    std::shared_ptr<ChatGateway> adversary;
    std::shared_ptr<ChatGateway> judge; // optional
};

/// Identifies one run: configuration, backends, template revisions, corpus.
/// Written to disk before the first model call.
struct RunManifest {
    static constexpr int kSchemaVersion = 1;

    PipelineConfig config;
    std::string anonymizer_backend;
    std::string adversary_backend;
    std::string judge_backend;
    nlohmann::json template_checksums;
    std::string demo_checksum;
    std::string corpus_id;
    std::vector<Attribute> attributes;
    std::string started_at;
    std::string finished_at;

    nlohmann::json to_json() const;
    static RunManifest from_json(const nlohmann::json& j);
};

struct BatchResult {
    std::vector<AnonymizationTrace> traces; // input order
    RunManifest manifest;
    int reused = 0; // records loaded from disk instead of executed
};

/// The rewrite-until-fooled loop plus batch orchestration around it.
///
/// Round shape: when the rewriter is conditioned on adversary inference and no
/// attack of the current text exists yet, attack it first and harvest the
/// reasoning; then rewrite; then, under early stopping, attack the rewrite and
/// stop once every targeted attribute is guessed wrong. Without early stopping
/// the loop always runs max_iterations rewrites and attacks only the final
/// text.
class Pipeline {
  public:
    Pipeline(const RunConfig& run, const PipelineConfig& config, Gateways gateways);

    AnonymizationTrace anonymize_record(const Record& record,
                                        const std::vector<Attribute>& attributes) const;

    // Runs the whole corpus with bounded parallelism. When out_dir is
    // non-empty, writes manifest.json first, one trace file per record as it
    // finishes, and traces.jsonl at the end; resume reuses stored traces keyed
    // on (corpus id, record id, config hash).
    BatchResult run_batch(const std::vector<Record>& corpus,
                          const std::vector<Attribute>& attributes, const std::string& out_dir,
                          bool resume) const;

    // Attacks every record's raw text once, no rewriting. Used for the
    // unprotected-accuracy baseline.
    std::vector<AnonymizationTrace> attack_only(const std::vector<Record>& corpus,
                                                const std::vector<Attribute>& attributes) const;

    const TemplateSet& templates() const { return templates_; }
    const Matcher& matcher() const { return matcher_; }
    const PipelineConfig& config() const { return config_; }

    // Attributes a record is processed with: the configured list, or every
    // attribute present in its truth map when none are configured.
    std::vector<Attribute> attributes_for(const Record& record) const;

  private:
    std::map<Attribute, AttackRecord> run_attacks(const std::string& text,
                                                  const std::map<Attribute, AttributeValue>& truth)
        const;

    RunConfig run_;
    PipelineConfig config_;
    Gateways gateways_;
    TemplateSet templates_;
    std::map<Attribute, AnonymizerDemo> anon_demos_;
    std::map<Attribute, AdversaryDemo> adv_demos_;
    TargetPools pools_;
    Matcher matcher_;
};

struct StepHistogram {
    std::map<int, int> counts; // rounds -> trace count (error traces excluded)
    int errors = 0;
    double mean = 0.0;

    nlohmann::json to_json() const;
    std::string text_table() const;
};

// Throws EmptyGroup on an empty trace list.
StepHistogram step_histogram(const std::vector<AnonymizationTrace>& traces);

// Stable fingerprint of a corpus: record ids hashed in order.
std::string corpus_fingerprint(const std::vector<Record>& corpus);

// Bounded-concurrency index loop; fn(i) runs for i in [0, n). fn must handle
// its own per-item errors.
void parallel_for(int n, int parallelism, const std::function<void(int)>& fn);

} // namespace decoy
