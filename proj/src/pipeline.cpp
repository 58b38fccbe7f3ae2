#include "decoy/pipeline.hpp"

#include "decoy/text_util.hpp"

#include <atomic>
#include <filesystem>
#include <mutex>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;

namespace decoy {

namespace {

nlohmann::json attribute_tokens(const std::vector<Attribute>& attributes) {
    nlohmann::json arr = nlohmann::json::array();
    for (Attribute a : attributes) arr.push_back(std::string(attribute_token(a)));
    return arr;
}

} // namespace

nlohmann::json RunManifest::to_json() const {
    return nlohmann::json{{"schema_version", kSchemaVersion},
                          {"config", config.to_json()},
                          {"config_hash", config.hash()},
                          {"backends",
                           {{"anonymizer", anonymizer_backend},
                            {"adversary", adversary_backend},
                            {"judge", judge_backend}}},
                          {"template_checksums", template_checksums},
                          {"demo_checksum", demo_checksum},
                          {"corpus_id", corpus_id},
                          {"attributes", attribute_tokens(attributes)},
                          {"seed", config.seed},
                          {"started_at", started_at},
                          {"finished_at", finished_at}};
}

RunManifest RunManifest::from_json(const nlohmann::json& j) {
    RunManifest m;
    m.config = PipelineConfig::from_json(j.at("config"));
    const nlohmann::json& b = j.at("backends");
    m.anonymizer_backend = b.value("anonymizer", "");
    m.adversary_backend = b.value("adversary", "");
    m.judge_backend = b.value("judge", "");
    m.template_checksums = j.value("template_checksums", nlohmann::json::object());
    m.demo_checksum = j.value("demo_checksum", "");
    m.corpus_id = j.at("corpus_id").get<std::string>();
    for (const auto& token : j.value("attributes", nlohmann::json::array())) {
        auto attr = attribute_from_token(token.get<std::string>());
        if (!attr) throw Error("manifest has unknown attribute: " + token.get<std::string>());
        m.attributes.push_back(*attr);
    }
    m.started_at = j.value("started_at", "");
    m.finished_at = j.value("finished_at", "");
    return m;
}

Pipeline::Pipeline(const RunConfig& run, const PipelineConfig& config, Gateways gateways)
    : run_(run),
      config_(config),
      gateways_(std::move(gateways)),
      templates_(TemplateSet::load(run.template_dir())),
      pools_(TargetPools::load(run)),
      matcher_(SynonymTable::load(run.resolved_synonyms_file())) {
    config_.validate();
    if (!gateways_.adversary) {
        throw ConfigError("pipeline needs an adversary gateway");
    }
    for (Attribute a : all_attributes()) {
        anon_demos_.emplace(a, AnonymizerDemo::load(run.demo_dir(), a));
        adv_demos_.emplace(a, AdversaryDemo::load(run.demo_dir(), a));
    }
    DecodingParams params{run_.temperature, run_.max_tokens};
    if (gateways_.judge) matcher_.set_judge(&templates_, gateways_.judge, params);
}

std::vector<Attribute> Pipeline::attributes_for(const Record& record) const {
    if (!run_.attributes.empty()) return run_.attributes;
    std::vector<Attribute> attrs;
    for (const auto& [attr, value] : record.truth) attrs.push_back(attr);
    return attrs;
}

std::map<Attribute, AttackRecord>
Pipeline::run_attacks(const std::string& text,
                      const std::map<Attribute, AttributeValue>& truth) const {
    DecodingParams params{run_.temperature, run_.max_tokens};
    std::map<Attribute, AttackRecord> out;
    for (const auto& [attr, value] : truth) {
        AttackOutcome outcome =
            attack(templates_, *gateways_.adversary, params, text, attr, value,
                   config_.adversary_sees_gt, config_.match_top_k, adv_demos_.at(attr), matcher_);
        out.emplace(attr, AttackRecord{std::move(outcome.guess), outcome.verdict});
    }
    return out;
}

AnonymizationTrace Pipeline::anonymize_record(const Record& record,
                                              const std::vector<Attribute>& attributes) const {
    if (!gateways_.anonymizer) {
        throw ConfigError("the rewrite loop needs an anonymizer gateway");
    }
    AnonymizationTrace trace;
    trace.record_id = record.id;
    trace.config_hash = config_.hash();
    trace.original_text = record.text;
    trace.final_text = record.text;

    try {
        if (attributes.empty()) {
            throw ConfigError("record " + record.id + " resolved to zero attributes");
        }
        for (Attribute a : attributes) {
            auto it = record.truth.find(a);
            if (it == record.truth.end()) {
                throw Error("record " + record.id + " has no truth value for " +
                            std::string(attribute_token(a)));
            }
            trace.truth.emplace(a, it->second);
        }
        if (config_.use_target) {
            for (Attribute a : attributes) {
                AttributeValue target = sample_target_value(
                    pools_, a, trace.truth.at(a),
                    derive_seed(config_.seed, record.id, attribute_token(a)));
                trace.targets.emplace(a, target.value);
            }
        }
    } catch (const std::exception& e) {
        trace.stop_cause = StopCause::error;
        trace.error = e.what();
        return trace;
    }

    const bool inf = config_.anon_conditioning.adversary_inference;
    DecodingParams params{run_.temperature, run_.max_tokens};
    std::string current = record.text;
    // Attack results for `current`, present only while still fresh.
    std::optional<std::map<Attribute, AttackRecord>> standing;

    try {
        for (int r = 1; r <= config_.max_iterations; ++r) {
            Round round;
            round.index = r;

            if (inf) {
                if (!standing) {
                    standing = run_attacks(current, trace.truth);
                    if (r == 1) trace.pre_attack = *standing;
                    else trace.rounds[r - 2].attacks = *standing;
                }
                for (const auto& [attr, rec] : *standing) {
                    round.reasoning_used[attr] = rec.guess.reasoning;
                }
            }

            std::map<Attribute, RewriteSlot> slots;
            for (Attribute a : attributes) {
                RewriteSlot slot;
                if (config_.use_target) slot.target = trace.targets.at(a);
                if (config_.anon_conditioning.ground_truth) slot.truth = trace.truth.at(a).value;
                auto it = round.reasoning_used.find(a);
                if (it != round.reasoning_used.end() && !it->second.empty()) {
                    slot.reasoning = it->second;
                }
                slots.emplace(a, std::move(slot));
            }

            round.rewrite = rewrite(templates_, *gateways_.anonymizer, params, current, slots,
                                    anon_demos_.at(slots.begin()->first));
            current = round.rewrite.anonymized_text;
            standing.reset();

            if (config_.early_stopping) {
                std::map<Attribute, AttackRecord> attacks = run_attacks(current, trace.truth);
                round.attacks = attacks;
                trace.rounds.push_back(std::move(round));
                bool fooled = true;
                for (const auto& [attr, rec] : attacks) fooled = fooled && !rec.verdict.matched;
                if (fooled) {
                    trace.final_attack = std::move(attacks);
                    trace.final_text = current;
                    trace.stop_cause = StopCause::adversary_fooled;
                    return trace;
                }
                standing = std::move(attacks);
            } else {
                trace.rounds.push_back(std::move(round));
            }
        }

        if (config_.early_stopping) {
            trace.final_attack = trace.rounds.back().attacks;
        } else {
            std::map<Attribute, AttackRecord> attacks = run_attacks(current, trace.truth);
            trace.rounds.back().attacks = attacks;
            trace.final_attack = std::move(attacks);
        }
        trace.final_text = current;
        trace.stop_cause = StopCause::max_iterations;
    } catch (const std::exception& e) {
        trace.stop_cause = StopCause::error;
        trace.error = e.what();
        trace.final_text = current;
    }
    return trace;
}

BatchResult Pipeline::run_batch(const std::vector<Record>& corpus,
                                const std::vector<Attribute>& attributes,
                                const std::string& out_dir, bool resume) const {
    if (!gateways_.anonymizer) {
        throw ConfigError("the rewrite loop needs an anonymizer gateway");
    }
    RunManifest manifest;
    manifest.config = config_;
    manifest.anonymizer_backend = gateways_.anonymizer->backend_id();
    manifest.adversary_backend = gateways_.adversary->backend_id();
    manifest.judge_backend = gateways_.judge ? gateways_.judge->backend_id() : "";
    manifest.template_checksums = templates_.checksums();
    manifest.demo_checksum = demo_checksum(run_.demo_dir());
    manifest.corpus_id = corpus_fingerprint(corpus);
    manifest.attributes = attributes;
    manifest.started_at = iso8601_now();

    long attribute_slots = 0;
    for (const Record& rec : corpus) {
        attribute_slots += static_cast<long>(
            (attributes.empty() ? attributes_for(rec) : attributes).size());
    }
    auto budget = std::make_shared<CallBudget>(
        std::max<long>(1, run_.budget_factor * attribute_slots));

    std::shared_ptr<ExchangeLog> log;
    if (!out_dir.empty()) {
        fs::create_directories(fs::path(out_dir) / "traces");
        log = std::make_shared<ExchangeLog>((fs::path(out_dir) / "exchanges.jsonl").string());
        write_file((fs::path(out_dir) / "manifest.json").string(),
                   manifest.to_json().dump(2) + "\n");
    } else {
        log = std::make_shared<ExchangeLog>();
    }
    for (const auto& gw : {gateways_.anonymizer, gateways_.adversary, gateways_.judge}) {
        if (!gw) continue;
        gw->set_budget(budget);
        gw->set_log(log);
    }

    std::vector<AnonymizationTrace> traces(corpus.size());
    std::atomic<int> reused{0};
    const std::string expected_hash = config_.hash();

    parallel_for(static_cast<int>(corpus.size()), run_.parallelism, [&](int i) {
        const Record& rec = corpus[i];
        std::vector<Attribute> attrs = attributes.empty() ? attributes_for(rec) : attributes;
        std::string file;
        if (!out_dir.empty()) {
            file = (fs::path(out_dir) / "traces" / trace_file_name(rec.id, attrs)).string();
        }
        if (resume && !file.empty() && fs::exists(file)) {
            try {
                auto stored =
                    AnonymizationTrace::from_json(nlohmann::json::parse(read_file(file)));
                if (stored.corpus_id == manifest.corpus_id &&
                    stored.config_hash == expected_hash) {
                    traces[i] = std::move(stored);
                    reused.fetch_add(1);
                    return;
                }
            } catch (const std::exception&) {
                // stale or unreadable checkpoint: fall through and recompute
            }
        }
        AnonymizationTrace t = anonymize_record(rec, attrs);
        t.corpus_id = manifest.corpus_id;
        if (!file.empty()) write_file(file, t.to_json().dump(2) + "\n");
        traces[i] = std::move(t);
    });

    manifest.finished_at = iso8601_now();
    if (!out_dir.empty()) {
        std::string jsonl;
        for (const auto& t : traces) {
            jsonl += t.to_json().dump();
            jsonl += '\n';
        }
        write_file((fs::path(out_dir) / "traces.jsonl").string(), jsonl);
        write_file((fs::path(out_dir) / "manifest.json").string(),
                   manifest.to_json().dump(2) + "\n");
    }
    return {std::move(traces), std::move(manifest), reused.load()};
}

std::vector<AnonymizationTrace>
Pipeline::attack_only(const std::vector<Record>& corpus,
                      const std::vector<Attribute>& attributes) const {
    std::string corpus_id = corpus_fingerprint(corpus);
    std::vector<AnonymizationTrace> traces(corpus.size());
    parallel_for(static_cast<int>(corpus.size()), run_.parallelism, [&](int i) {
        const Record& rec = corpus[i];
        AnonymizationTrace t;
        t.record_id = rec.id;
        t.corpus_id = corpus_id;
        t.config_hash = config_.hash();
        t.original_text = rec.text;
        t.final_text = rec.text;
        try {
            std::vector<Attribute> attrs = attributes.empty() ? attributes_for(rec) : attributes;
            for (Attribute a : attrs) {
                auto it = rec.truth.find(a);
                if (it == rec.truth.end()) {
                    throw Error("record " + rec.id + " has no truth value for " +
                                std::string(attribute_token(a)));
                }
                t.truth.emplace(a, it->second);
            }
            t.pre_attack = run_attacks(rec.text, t.truth);
            t.final_attack = t.pre_attack;
            t.stop_cause = StopCause::max_iterations;
        } catch (const std::exception& e) {
            t.stop_cause = StopCause::error;
            t.error = e.what();
        }
        traces[i] = std::move(t);
    });
    return traces;
}

StepHistogram step_histogram(const std::vector<AnonymizationTrace>& traces) {
    if (traces.empty()) throw EmptyGroup("no traces to build a step histogram from");
    StepHistogram h;
    long total = 0;
    int counted = 0;
    for (const auto& t : traces) {
        if (t.stop_cause == StopCause::error) {
            ++h.errors;
            continue;
        }
        ++h.counts[t.round_count()];
        total += t.round_count();
        ++counted;
    }
    h.mean = counted > 0 ? static_cast<double>(total) / counted : 0.0;
    return h;
}

nlohmann::json StepHistogram::to_json() const {
    nlohmann::json counts_j = nlohmann::json::object();
    for (const auto& [rounds, n] : counts) counts_j[std::to_string(rounds)] = n;
    return nlohmann::json{{"counts", counts_j}, {"errors", errors}, {"mean", mean}};
}

std::string StepHistogram::text_table() const {
    std::ostringstream out;
    out << "rounds  traces\n";
    for (const auto& [rounds, n] : counts) {
        out << rounds << "       " << n << "\n";
    }
    out << "mean    " << mean << "\n";
    if (errors > 0) out << "errors  " << errors << "\n";
    return out.str();
}

std::string corpus_fingerprint(const std::vector<Record>& corpus) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const Record& r : corpus) {
        h = fnv1a64(r.id, h);
        h = fnv1a64("\n", h);
    }
    return to_hex(h);
}

void parallel_for(int n, int parallelism, const std::function<void(int)>& fn) {
    if (n <= 0) return;
    int workers = std::min(std::max(parallelism, 1), n);
    if (workers == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        threads.emplace_back([&] {
            for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(failure_mu);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& t : threads) t.join();
    if (failure) std::rethrow_exception(failure);
}

} // namespace decoy
