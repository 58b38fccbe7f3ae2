#include "decoy/metrics.hpp"

#include "decoy/anonymizer.hpp"
#include "decoy/text_util.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace decoy {

namespace {

std::map<std::string, int> ngram_counts(const std::vector<std::string>& tokens, int n) {
    std::map<std::string, int> counts;
    if (static_cast<int>(tokens.size()) < n) return counts;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        std::string key;
        for (int k = 0; k < n; ++k) {
            key += tokens[i + k];
            key += '\x1f';
        }
        ++counts[key];
    }
    return counts;
}

long total_count(const std::map<std::string, int>& counts) {
    long total = 0;
    for (const auto& [key, c] : counts) total += c;
    return total;
}

long clipped_overlap(const std::map<std::string, int>& cand,
                     const std::map<std::string, int>& ref) {
    long match = 0;
    for (const auto& [key, c] : cand) {
        auto it = ref.find(key);
        if (it != ref.end()) match += std::min(c, it->second);
    }
    return match;
}

int lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::vector<int> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

Score precision_recall_f1(double match, double cand_total, double ref_total) {
    Score s;
    if (cand_total > 0) s.precision = match / cand_total;
    if (ref_total > 0) s.recall = match / ref_total;
    if (s.precision + s.recall > 0) {
        s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
    }
    return s;
}

int clamp_score(int v) { return std::clamp(v, 1, 10); }

// Accepts {"score": 7, ...}, {"score": "7"}, or a bare number for an aspect.
std::optional<int> aspect_score(const nlohmann::json& aspect) {
    const nlohmann::json* s = &aspect;
    if (aspect.is_object()) {
        if (!aspect.contains("score")) return std::nullopt;
        s = &aspect.at("score");
    }
    if (s->is_number()) return clamp_score(static_cast<int>(std::lround(s->get<double>())));
    if (s->is_string()) {
        if (auto v = parse_int(trim(s->get<std::string>()))) {
            return clamp_score(static_cast<int>(*v));
        }
    }
    return std::nullopt;
}

std::string aspect_explanation(const nlohmann::json& aspect) {
    if (aspect.is_object() && aspect.contains("explanation") &&
        aspect.at("explanation").is_string()) {
        return aspect.at("explanation").get<std::string>();
    }
    return "";
}

bool parse_judgment(const std::string& raw, UtilityJudgment& out) {
    nlohmann::json j;
    try {
        j = extract_json_object(raw);
    } catch (const NoJsonFound&) {
        return false;
    }
    if (!j.contains("readability") || !j.contains("meaning") || !j.contains("hallucinations")) {
        return false;
    }
    auto r = aspect_score(j.at("readability"));
    auto m = aspect_score(j.at("meaning"));
    auto h = aspect_score(j.at("hallucinations"));
    if (!r || !m || !h) return false;
    out.readability = *r;
    out.meaning = *m;
    out.hallucinations = *h;
    out.readability_explanation = aspect_explanation(j.at("readability"));
    out.meaning_explanation = aspect_explanation(j.at("meaning"));
    out.hallucinations_explanation = aspect_explanation(j.at("hallucinations"));
    return true;
}

nlohmann::json row_to_json(const MetricRow& r) {
    nlohmann::json j{{"privacy_percent", r.privacy_percent},
                     {"rouge1_percent", r.rouge1_percent},
                     {"rouge2_percent", r.rouge2_percent},
                     {"rougel_percent", r.rougel_percent},
                     {"rouge_percent", r.rougel_percent},
                     {"bleu_percent", r.bleu_percent},
                     {"n", r.n},
                     {"missing_judgments", r.missing_judgments}};
    j["utility_percent"] = r.utility_percent ? nlohmann::json(*r.utility_percent)
                                             : nlohmann::json(nullptr);
    return j;
}

MetricRow row_from_json(const nlohmann::json& j) {
    MetricRow r;
    r.privacy_percent = j.at("privacy_percent").get<double>();
    r.rouge1_percent = j.at("rouge1_percent").get<double>();
    r.rouge2_percent = j.at("rouge2_percent").get<double>();
    r.rougel_percent = j.at("rougel_percent").get<double>();
    r.bleu_percent = j.at("bleu_percent").get<double>();
    if (j.contains("utility_percent") && !j.at("utility_percent").is_null()) {
        r.utility_percent = j.at("utility_percent").get<double>();
    }
    r.n = j.at("n").get<int>();
    r.missing_judgments = j.value("missing_judgments", 0);
    return r;
}

} // namespace

Score rouge(const std::string& candidate, const std::string& reference, RougeVariant variant) {
    std::vector<std::string> cand = tokenize(candidate);
    std::vector<std::string> ref = tokenize(reference);
    if (ref.empty()) throw EmptyReference("reference has no tokens");

    if (variant == RougeVariant::rougeL) {
        if (cand.empty()) return {};
        return precision_recall_f1(lcs_length(cand, ref), cand.size(), ref.size());
    }
    int n = variant == RougeVariant::rouge1 ? 1 : 2;
    auto cand_counts = ngram_counts(cand, n);
    auto ref_counts = ngram_counts(ref, n);
    if (cand_counts.empty() || ref_counts.empty()) return {};
    return precision_recall_f1(clipped_overlap(cand_counts, ref_counts),
                               total_count(cand_counts), total_count(ref_counts));
}

double bleu(const std::string& candidate, const std::string& reference, int max_n) {
    std::vector<std::string> cand = tokenize(candidate);
    std::vector<std::string> ref = tokenize(reference);
    if (cand.empty() || ref.empty()) throw EmptyInput("bleu needs tokens on both sides");

    double log_sum = 0.0;
    int orders = 0;
    for (int n = 1; n <= max_n; ++n) {
        auto cand_counts = ngram_counts(cand, n);
        if (cand_counts.empty()) continue; // candidate too short for this order
        auto ref_counts = ngram_counts(ref, n);
        double match = static_cast<double>(clipped_overlap(cand_counts, ref_counts));
        double precision = std::max(match, 1e-9) / static_cast<double>(total_count(cand_counts));
        log_sum += std::log(precision);
        ++orders;
    }
    double geometric_mean = std::exp(log_sum / orders);
    double brevity = cand.size() < ref.size()
                         ? std::exp(1.0 - static_cast<double>(ref.size()) / cand.size())
                         : 1.0;
    return brevity * geometric_mean;
}

nlohmann::json UtilityJudgment::to_json() const {
    return nlohmann::json{{"readability", readability},
                          {"meaning", meaning},
                          {"hallucinations", hallucinations},
                          {"readability_explanation", readability_explanation},
                          {"meaning_explanation", meaning_explanation},
                          {"hallucinations_explanation", hallucinations_explanation},
                          {"repaired", repaired},
                          {"utility_percent", utility_percent()}};
}

UtilityJudgment UtilityJudgment::from_json(const nlohmann::json& j) {
    UtilityJudgment u;
    u.readability = clamp_score(j.at("readability").get<int>());
    u.meaning = clamp_score(j.at("meaning").get<int>());
    u.hallucinations = clamp_score(j.at("hallucinations").get<int>());
    u.readability_explanation = j.value("readability_explanation", "");
    u.meaning_explanation = j.value("meaning_explanation", "");
    u.hallucinations_explanation = j.value("hallucinations_explanation", "");
    u.repaired = j.value("repaired", false);
    return u;
}

UtilityJudgment judge_utility(const TemplateSet& templates, ChatGateway& gateway,
                              const DecodingParams& params, const std::string& original,
                              const std::string& rewritten) {
    ChatExchange ex =
        gateway.complete(render_utility_judge(templates, original, rewritten), params);
    UtilityJudgment judgment;
    if (parse_judgment(ex.response, judgment)) return judgment;
    if (trim(ex.response).empty()) {
        throw ParseFailure("utility judge returned empty output");
    }
    ChatExchange fix = gateway.complete(
        render_format_fix(templates, TemplateName::utility_format_fix, ex.response), params);
    if (!parse_judgment(fix.response, judgment)) {
        throw ParseFailure("utility judgment unusable even after format correction");
    }
    judgment.repaired = true;
    return judgment;
}

PrivacyResult privacy_accuracy(const std::map<Attribute, std::vector<MatchVerdict>>& verdicts) {
    if (verdicts.empty()) throw EmptyGroup("no verdicts to score");
    PrivacyResult result;
    double sum = 0.0;
    for (const auto& [attr, list] : verdicts) {
        if (list.empty()) {
            throw EmptyGroup("no verdicts for attribute " + std::string(attribute_token(attr)));
        }
        int matched = 0;
        for (const MatchVerdict& v : list) matched += v.matched ? 1 : 0;
        double pct = 100.0 * matched / static_cast<double>(list.size());
        result.per_attribute[attr] = pct;
        sum += pct;
    }
    result.average = sum / static_cast<double>(result.per_attribute.size());
    return result;
}

EvaluationReport build_report(const std::vector<AnonymizationTrace>& traces,
                              const RunManifest& manifest, const std::vector<Record>& originals,
                              const std::map<std::string, UtilityJudgment>& judgments,
                              bool utility_enabled) {
    if (corpus_fingerprint(originals) != manifest.corpus_id) {
        throw ManifestMismatch("originals are not the corpus this manifest was produced from");
    }
    std::map<std::string, const Record*> by_id;
    for (const Record& r : originals) by_id[r.id] = &r;
    const std::string expected_hash = manifest.config.hash();

    struct Acc {
        int n = 0;
        int matched = 0;
        double r1 = 0, r2 = 0, rl = 0, bl = 0;
        double utility = 0;
        int utility_n = 0;
        int missing = 0;
    };
    std::map<Attribute, Acc> accs;
    int errors = 0;

    for (const AnonymizationTrace& t : traces) {
        if (t.corpus_id != manifest.corpus_id || t.config_hash != expected_hash) {
            throw ManifestMismatch("trace " + t.record_id + " belongs to a different run");
        }
        if (t.stop_cause == StopCause::error) {
            ++errors;
            continue;
        }
        auto it = by_id.find(t.record_id);
        if (it == by_id.end()) {
            throw ManifestMismatch("trace record " + t.record_id + " is not in the corpus");
        }
        Score r1, r2, rl;
        double b = 0.0;
        try {
            r1 = rouge(t.final_text, it->second->text, RougeVariant::rouge1);
            r2 = rouge(t.final_text, it->second->text, RougeVariant::rouge2);
            rl = rouge(t.final_text, it->second->text, RougeVariant::rougeL);
            b = bleu(t.final_text, it->second->text);
        } catch (const Error&) {
            ++errors; // degenerate text on one side; nothing to score
            continue;
        }
        const UtilityJudgment* judgment = nullptr;
        if (auto jt = judgments.find(t.record_id); jt != judgments.end()) judgment = &jt->second;

        for (const auto& [attr, rec] : t.final_attack) {
            Acc& a = accs[attr];
            ++a.n;
            a.matched += rec.verdict.matched ? 1 : 0;
            a.r1 += r1.f1;
            a.r2 += r2.f1;
            a.rl += rl.f1;
            a.bl += b;
            if (utility_enabled) {
                if (judgment) {
                    a.utility += judgment->utility_percent();
                    ++a.utility_n;
                } else {
                    ++a.missing;
                }
            }
        }
    }
    if (accs.empty()) throw EmptyGroup("no evaluable traces");

    EvaluationReport report;
    report.corpus_id = manifest.corpus_id;
    report.config_hash = expected_hash;
    report.errors = errors;

    double sum_privacy = 0, sum_r1 = 0, sum_r2 = 0, sum_rl = 0, sum_bl = 0, sum_util = 0;
    int util_rows = 0;
    for (const auto& [attr, a] : accs) {
        MetricRow row;
        row.n = a.n;
        row.privacy_percent = 100.0 * a.matched / a.n;
        row.rouge1_percent = 100.0 * a.r1 / a.n;
        row.rouge2_percent = 100.0 * a.r2 / a.n;
        row.rougel_percent = 100.0 * a.rl / a.n;
        row.bleu_percent = 100.0 * a.bl / a.n;
        row.missing_judgments = a.missing;
        if (a.utility_n > 0) row.utility_percent = a.utility / a.utility_n;
        report.rows.emplace(attr, row);

        sum_privacy += row.privacy_percent;
        sum_r1 += row.rouge1_percent;
        sum_r2 += row.rouge2_percent;
        sum_rl += row.rougel_percent;
        sum_bl += row.bleu_percent;
        if (row.utility_percent) {
            sum_util += *row.utility_percent;
            ++util_rows;
        }
        report.summary.n += row.n;
        report.summary.missing_judgments += row.missing_judgments;
    }
    double rows_n = static_cast<double>(report.rows.size());
    report.summary.privacy_percent = sum_privacy / rows_n;
    report.summary.rouge1_percent = sum_r1 / rows_n;
    report.summary.rouge2_percent = sum_r2 / rows_n;
    report.summary.rougel_percent = sum_rl / rows_n;
    report.summary.bleu_percent = sum_bl / rows_n;
    if (util_rows > 0) report.summary.utility_percent = sum_util / util_rows;
    return report;
}

nlohmann::json EvaluationReport::to_json() const {
    nlohmann::json rows_j = nlohmann::json::object();
    for (const auto& [attr, row] : rows) {
        rows_j[std::string(attribute_token(attr))] = row_to_json(row);
    }
    return nlohmann::json{{"schema_version", kSchemaVersion},
                          {"corpus_id", corpus_id},
                          {"config_hash", config_hash},
                          {"rows", rows_j},
                          {"summary", row_to_json(summary)},
                          {"errors", errors}};
}

EvaluationReport EvaluationReport::from_json(const nlohmann::json& j) {
    EvaluationReport report;
    report.corpus_id = j.at("corpus_id").get<std::string>();
    report.config_hash = j.at("config_hash").get<std::string>();
    for (auto it = j.at("rows").begin(); it != j.at("rows").end(); ++it) {
        auto attr = attribute_from_token(it.key());
        if (!attr) throw Error("report has unknown attribute: " + it.key());
        report.rows.emplace(*attr, row_from_json(it.value()));
    }
    report.summary = row_from_json(j.at("summary"));
    report.errors = j.value("errors", 0);
    return report;
}

std::string EvaluationReport::text_table() const {
    std::ostringstream out;
    char line[160];
    std::snprintf(line, sizeof(line), "%-22s %8s %8s %8s %8s %8s %8s %5s\n", "attribute",
                  "privacy", "rouge-L", "rouge-1", "rouge-2", "bleu", "utility", "n");
    out << line;
    auto emit = [&](const std::string& name, const MetricRow& r) {
        std::string util = r.utility_percent
                               ? [&] {
                                     char buf[16];
                                     std::snprintf(buf, sizeof(buf), "%8.1f", *r.utility_percent);
                                     return std::string(buf);
                                 }()
                               : std::string("       -");
        std::snprintf(line, sizeof(line), "%-22s %8.1f %8.1f %8.1f %8.1f %8.1f %s %5d\n",
                      name.c_str(), r.privacy_percent, r.rougel_percent, r.rouge1_percent,
                      r.rouge2_percent, r.bleu_percent, util.c_str(), r.n);
        out << line;
    };
    for (const auto& [attr, row] : rows) emit(std::string(attribute_display(attr)), row);
    emit("average", summary);
    if (summary.missing_judgments > 0) {
        out << "missing utility judgments: " << summary.missing_judgments << "\n";
    }
    if (errors > 0) out << "records excluded for errors: " << errors << "\n";
    return out.str();
}

} // namespace decoy
