#pragma once

#include "decoy/adversary.hpp"
#include "decoy/attributes.hpp"
#include "decoy/errors.hpp"
#include "decoy/gateway.hpp"
#include "decoy/pipeline.hpp"
#include "decoy/prompts.hpp"
#include "decoy/trace.hpp"

#include "json.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace decoy {

struct Score {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

enum class RougeVariant { rouge1, rouge2, rougeL };

// N-gram overlap (variants 1, 2) or longest-common-subsequence (L) P/R/F1 on
// casefolded alphanumeric tokens. A side with zero n-grams scores 0. Throws
// EmptyReference when the reference has no tokens.
Score rouge(const std::string& candidate, const std::string& reference, RougeVariant variant);

// Sentence BLEU: geometric mean of clipped n-gram precisions over the orders
// the candidate is long enough to have, each precision floored at 1e-9, times
// brevity penalty exp(1 - r/c) when the candidate is shorter. Throws
// EmptyInput when either side has no tokens.
double bleu(const std::string& candidate, const std::string& reference, int max_n = 4);

struct UtilityJudgment {
    int readability = 1;
    int meaning = 1;
    int hallucinations = 1; // 10 = no invented content
    std::string readability_explanation;
    std::string meaning_explanation;
    std::string hallucinations_explanation;
    bool repaired = false;

    double utility_percent() const {
        return (readability + meaning + hallucinations) / 3.0 * 10.0;
    }

    nlohmann::json to_json() const;
    static UtilityJudgment from_json(const nlohmann::json& j);
};

/// Scores one rewrite against its original on readability, meaning and
/// hallucinations (1-10 each), with one format-correction retry. Throws
/// ParseFailure when the reply is unusable even after correction; callers
/// treat that judgment as missing.
UtilityJudgment judge_utility(const TemplateSet& templates, ChatGateway& gateway,
                              const DecodingParams& params, const std::string& original,
                              const std::string& rewritten);

struct PrivacyResult {
    std::map<Attribute, double> per_attribute; // matched / total * 100
    double average = 0.0;                      // unweighted over attributes
};

// Throws EmptyGroup when there are no attributes or an attribute has no verdicts.
PrivacyResult privacy_accuracy(const std::map<Attribute, std::vector<MatchVerdict>>& verdicts);

struct MetricRow {
    double privacy_percent = 0.0;
    double rouge1_percent = 0.0;
    double rouge2_percent = 0.0;
    double rougel_percent = 0.0; // also reported as the headline rouge_percent
    double bleu_percent = 0.0;
    std::optional<double> utility_percent; // absent when no judge ran
    int n = 0;
    int missing_judgments = 0;
};

struct EvaluationReport {
    static constexpr int kSchemaVersion = 1;

    std::string corpus_id;
    std::string config_hash;
    std::map<Attribute, MetricRow> rows;
    MetricRow summary; // unweighted mean over attribute rows
    int errors = 0;    // traces excluded for stop_cause=error

    nlohmann::json to_json() const;
    static EvaluationReport from_json(const nlohmann::json& j);
    std::string text_table() const;
};

/// Assembles the privacy / overlap / utility table from finished traces.
/// `judgments` maps record id to its utility judgment; pass utility_enabled =
/// false when no judge backend was configured. Throws ManifestMismatch when
/// traces or originals do not belong to the manifest, EmptyGroup when nothing
/// is evaluable.
EvaluationReport build_report(const std::vector<AnonymizationTrace>& traces,
                              const RunManifest& manifest, const std::vector<Record>& originals,
                              const std::map<std::string, UtilityJudgment>& judgments,
                              bool utility_enabled);

} // namespace decoy
