#include "decoy/corpus.hpp"

#include "decoy/anonymizer.hpp"
#include "decoy/prompts.hpp"
#include "decoy/target_pool.hpp"
#include "decoy/text_util.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

namespace decoy {

namespace {

nlohmann::json parse_line(const std::string& line, int line_no) {
    try {
        return nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError("line " + std::to_string(line_no) + ": " + e.what(),
                          "line " + std::to_string(line_no), "json");
    }
}

std::string required_string(const nlohmann::json& j, const std::string& id,
                            const std::string& field) {
    if (!j.contains(field) || !j.at(field).is_string()) {
        throw SchemaError("record " + id + ": missing string field '" + field + "'", id, field);
    }
    return j.at(field).get<std::string>();
}

std::string value_as_string(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    return {};
}

std::map<Attribute, AttributeValue> parse_truth(const nlohmann::json& j, const std::string& id) {
    std::map<Attribute, AttributeValue> truth;
    if (!j.contains("attributes")) return truth;
    const nlohmann::json& attrs = j.at("attributes");
    if (!attrs.is_object()) throw SchemaError("record " + id + ": 'attributes' must be an object",
                                              id, "attributes");
    for (auto it = attrs.begin(); it != attrs.end(); ++it) {
        auto attr = attribute_from_token(it.key());
        if (!attr) {
            throw SchemaError("record " + id + ": unknown attribute '" + it.key() + "'", id,
                              it.key());
        }
        std::string value = value_as_string(it.value());
        if (trim(value).empty()) {
            throw SchemaError("record " + id + ": empty value for '" + it.key() + "'", id,
                              it.key());
        }
        truth[*attr] = make_attribute_value(*attr, value);
    }
    return truth;
}

Record parse_record(const nlohmann::json& j, int line_no, RecordSource default_source) {
    std::string fallback_id = "line " + std::to_string(line_no);
    Record r;
    r.id = required_string(j, fallback_id, "id");
    if (trim(r.id).empty()) throw SchemaError("empty record id", fallback_id, "id");
    r.text = required_string(j, r.id, "text");
    if (trim(r.text).empty()) throw SchemaError("record " + r.id + ": empty text", r.id, "text");
    r.truth = parse_truth(j, r.id);
    r.source = default_source;
    if (j.contains("source")) {
        auto src = source_from_token(j.at("source").is_string()
                                         ? j.at("source").get<std::string>()
                                         : std::string());
        if (!src) throw SchemaError("record " + r.id + ": unknown source", r.id, "source");
        r.source = *src;
    }
    return r;
}

// Calls fn(line json, line number) for every non-blank line.
template <typename Fn> void for_each_line(const std::string& path, Fn&& fn) {
    std::istringstream in(read_file(path));
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        fn(parse_line(line, line_no), line_no);
    }
}

void check_unique(std::set<std::string>& seen, const std::string& id) {
    if (!seen.insert(id).second) {
        throw SchemaError("duplicate record id '" + id + "'", id, "id");
    }
}

} // namespace

std::vector<Record> load_corpus(const std::string& path, RecordSource default_source) {
    std::vector<Record> records;
    std::set<std::string> seen;
    for_each_line(path, [&](const nlohmann::json& j, int line_no) {
        Record r = parse_record(j, line_no, default_source);
        check_unique(seen, r.id);
        records.push_back(std::move(r));
    });
    return records;
}

std::vector<Record> load_synthetic_corpus(const std::string& path) {
    return load_corpus(path, RecordSource::synthetic_reddit);
}

std::string corpus_line(const Record& record) {
    nlohmann::json attrs = nlohmann::json::object();
    for (const auto& [attr, value] : record.truth) {
        attrs[std::string(attribute_token(attr))] = value.value;
    }
    nlohmann::json j{{"attributes", attrs},
                     {"id", record.id},
                     {"source", std::string(source_token(record.source))},
                     {"text", record.text}};
    return j.dump();
}

void write_corpus(const std::vector<Record>& records, const std::string& path) {
    std::string out;
    for (const Record& r : records) {
        out += corpus_line(r);
        out += '\n';
    }
    write_file(path, out);
}

std::vector<DisclosureEntry> load_disclosure_entries(const std::string& path) {
    std::vector<DisclosureEntry> entries;
    std::set<std::string> seen;
    for_each_line(path, [&](const nlohmann::json& j, int line_no) {
        std::string fallback_id = "line " + std::to_string(line_no);
        DisclosureEntry e;
        e.id = required_string(j, fallback_id, "id");
        check_unique(seen, e.id);
        e.text = required_string(j, e.id, "text");
        if (trim(e.text).empty()) {
            throw SchemaError("record " + e.id + ": empty text", e.id, "text");
        }
        if (!j.contains("disclosures") || !j.at("disclosures").is_array()) {
            throw SchemaError("record " + e.id + ": missing 'disclosures' array", e.id,
                              "disclosures");
        }
        for (const nlohmann::json& span : j.at("disclosures")) {
            DisclosureSpan s;
            s.label = required_string(span, e.id, "attribute");
            s.value = required_string(span, e.id, "value");
            std::string subject = required_string(span, e.id, "subject");
            if (subject != "self" && subject != "other") {
                throw SchemaError("record " + e.id + ": subject must be self or other", e.id,
                                  "subject");
            }
            s.about_self = subject == "self";
            e.spans.push_back(std::move(s));
        }
        entries.push_back(std::move(e));
    });
    return entries;
}

std::vector<Record> preprocess_self_disclosure(const std::vector<DisclosureEntry>& entries) {
    static const std::set<Attribute> kept{Attribute::gender, Attribute::relationship_status,
                                          Attribute::age, Attribute::education,
                                          Attribute::occupation};
    std::vector<Record> records;
    for (const DisclosureEntry& e : entries) {
        Record r;
        r.id = e.id;
        r.text = e.text;
        r.source = RecordSource::self_disclosure;
        for (const DisclosureSpan& s : e.spans) {
            if (!s.about_self) continue;
            auto attr = attribute_from_token(s.label);
            if (!attr || !kept.count(*attr)) continue;
            if (r.truth.count(*attr)) continue; // first span per attribute wins
            if (trim(s.value).empty()) {
                throw SchemaError("record " + e.id + ": empty value for '" + s.label + "'", e.id,
                                  s.label);
            }
            r.truth[*attr] = make_attribute_value(*attr, s.value);
        }
        if (!r.truth.empty()) records.push_back(std::move(r));
    }
    return records;
}

std::vector<PoolEntry> load_pool_entries(const std::string& path) {
    std::vector<PoolEntry> entries;
    std::set<std::string> seen;
    for_each_line(path, [&](const nlohmann::json& j, int line_no) {
        PoolEntry e;
        e.record = parse_record(j, line_no, RecordSource::finetune_pool);
        check_unique(seen, e.record.id);
        if (!j.contains("guesses") || !j.at("guesses").is_object()) {
            throw SchemaError("record " + e.record.id + ": missing 'guesses' object",
                              e.record.id, "guesses");
        }
        for (auto it = j.at("guesses").begin(); it != j.at("guesses").end(); ++it) {
            auto attr = attribute_from_token(it.key());
            if (!attr) {
                throw SchemaError("record " + e.record.id + ": unknown attribute '" + it.key() +
                                      "' in guesses",
                                  e.record.id, it.key());
            }
            if (!it.value().is_array() || it.value().size() != 3) {
                throw SchemaError("record " + e.record.id + ": '" + it.key() +
                                      "' needs exactly three guesses",
                                  e.record.id, it.key());
            }
            std::vector<std::string> guesses;
            for (const nlohmann::json& g : it.value()) guesses.push_back(value_as_string(g));
            e.guesses[*attr] = std::move(guesses);
        }
        entries.push_back(std::move(e));
    });
    return entries;
}

bool has_repeated_block(const std::string& text) {
    constexpr std::size_t kBlock = 50;
    constexpr std::size_t kRepeats = 3;
    if (text.size() < kBlock * kRepeats) return false;
    std::unordered_map<std::string_view, std::vector<std::size_t>> positions;
    std::string_view view(text);
    for (std::size_t i = 0; i + kBlock <= view.size(); ++i) {
        positions[view.substr(i, kBlock)].push_back(i);
    }
    for (const auto& [block, where] : positions) {
        if (where.size() < kRepeats) continue;
        std::size_t count = 1;
        std::size_t last = where.front();
        for (std::size_t p : where) {
            if (p >= last + kBlock) {
                ++count;
                last = p;
            }
        }
        if (count >= kRepeats) return true;
    }
    return false;
}

bool has_linebreak_run(const std::string& text) {
    int run = 0;
    for (char c : text) {
        if (c == '\n') {
            if (++run >= 4) return true;
        } else if (c != '\r') {
            run = 0;
        }
    }
    return false;
}

bool has_control_garbage(const std::string& text) {
    if (text.empty()) return false;
    std::size_t control = 0;
    for (unsigned char c : text) {
        if ((c < 0x20 && c != '\n' && c != '\r' && c != '\t') || c == 0x7f) ++control;
    }
    return static_cast<double>(control) / text.size() > 0.02;
}

std::string FilterResult::drop_log() const {
    std::string out;
    for (const DroppedEntry& d : dropped) {
        out += d.id;
        out += '\t';
        out += d.reason;
        out += '\n';
    }
    return out;
}

FilterResult filter_finetune_pool(const std::vector<PoolEntry>& entries, const Matcher& matcher) {
    FilterResult result;
    for (const PoolEntry& e : entries) {
        std::string reason;
        if (has_repeated_block(e.record.text)) {
            reason = "repeated_text_block";
        } else if (has_linebreak_run(e.record.text)) {
            reason = "linebreak_run";
        } else if (has_control_garbage(e.record.text)) {
            reason = "control_bytes";
        } else {
            bool any_correct = false;
            for (const auto& [attr, guesses] : e.guesses) {
                auto truth = e.record.truth.find(attr);
                if (truth == e.record.truth.end()) continue;
                for (const std::string& g : guesses) {
                    try {
                        if (matcher.match(g, truth->second).matched) {
                            any_correct = true;
                            break;
                        }
                    } catch (const GatewayRequired&) {
                        // no judge available: count as a miss
                    }
                }
                if (any_correct) break;
            }
            if (!any_correct) reason = "no_correct_prior_guess";
        }
        if (reason.empty()) {
            result.kept.push_back(e.record);
        } else {
            result.dropped.push_back({e.record.id, reason});
        }
    }
    return result;
}

std::set<std::string> validation_ids(const std::vector<std::string>& ids, std::uint64_t seed) {
    std::vector<std::pair<std::uint64_t, std::string>> ranked;
    ranked.reserve(ids.size());
    for (const std::string& id : ids) ranked.emplace_back(derive_seed(seed, id, "split"), id);
    std::sort(ranked.begin(), ranked.end());
    auto count = static_cast<std::size_t>(std::lround(0.2 * static_cast<double>(ids.size())));
    std::set<std::string> validation;
    for (std::size_t i = 0; i < count && i < ranked.size(); ++i) {
        validation.insert(ranked[i].second);
    }
    return validation;
}

FinetuneExport export_finetune_dataset(const std::vector<Record>& records, const RunConfig& run,
                                       std::shared_ptr<ChatGateway> teacher,
                                       const std::string& out_dir) {
    if (!teacher) throw ConfigError("finetune export needs a teacher gateway");

    RunConfig eff = run;
    eff.pipeline = ablation_rows(run.pipeline.seed)[3]; // target + ground truth conditioning
    eff.pipeline.max_iterations = run.pipeline.max_iterations;
    eff.pipeline.match_top_k = run.pipeline.match_top_k;
    eff.validate();

    TemplateSet templates = TemplateSet::load(eff.template_dir());
    TargetPools pools = TargetPools::load(eff);
    std::map<Attribute, AnonymizerDemo> demos;
    for (Attribute a : all_attributes()) demos.emplace(a, AnonymizerDemo::load(eff.demo_dir(), a));
    DecodingParams params{eff.temperature, eff.max_tokens};

    auto budget = std::make_shared<CallBudget>(
        std::max<long>(1, static_cast<long>(eff.budget_factor) * static_cast<long>(records.size())));
    std::shared_ptr<ExchangeLog> log;
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        log = std::make_shared<ExchangeLog>(out_dir + "/exchanges.jsonl");
    } else {
        log = std::make_shared<ExchangeLog>();
    }
    teacher->set_budget(budget);
    teacher->set_log(log);

    FinetuneExport out;
    nlohmann::json failures = nlohmann::json::array();
    for (const Record& rec : records) {
        try {
            std::vector<Attribute> attrs = eff.attributes;
            if (attrs.empty()) {
                for (const auto& [a, v] : rec.truth) attrs.push_back(a);
            }
            if (attrs.empty()) throw ConfigError("record has no attributes to condition on");
            std::map<Attribute, RewriteSlot> slots;
            for (Attribute a : attrs) {
                auto truth = rec.truth.find(a);
                if (truth == rec.truth.end()) {
                    throw ConfigError("record lacks a value for " +
                                      std::string(attribute_token(a)));
                }
                RewriteSlot slot;
                slot.target = sample_target_value(pools, a, truth->second,
                                                  derive_seed(eff.pipeline.seed, rec.id,
                                                              attribute_token(a)))
                                  .value;
                slot.truth = truth->second.value;
                slots.emplace(a, std::move(slot));
            }
            const AnonymizerDemo& demo = demos.at(slots.begin()->first);
            FinetunePair pair;
            pair.record_id = rec.id;
            pair.prompt_messages = render_anonymizer(templates, rec.text, slots, demo);
            RewriteResult rewritten = rewrite(templates, *teacher, params, rec.text, slots, demo);
            pair.completion = nlohmann::json{{"anonymized_comment", rewritten.anonymized_text},
                                             {"explanation", rewritten.explanation}}
                                  .dump();
            out.pairs.push_back(std::move(pair));
        } catch (const Error& e) {
            ++out.skipped;
            failures.push_back({{"id", rec.id}, {"error", e.what()}});
        }
    }

    std::vector<std::string> exported_ids;
    for (const FinetunePair& p : out.pairs) exported_ids.push_back(p.record_id);
    std::set<std::string> validation = validation_ids(exported_ids, eff.pipeline.seed);
    for (FinetunePair& p : out.pairs) {
        p.split = validation.count(p.record_id) ? Split::validation : Split::train;
        (p.split == Split::train ? out.train_count : out.validation_count) += 1;
    }

    out.metadata = nlohmann::json{
        {"schema_version", 1},
        {"teacher_backend", run.anonymizer.id()},
        {"config", eff.pipeline.to_json()},
        {"config_hash", eff.pipeline.hash()},
        {"seed", eff.pipeline.seed},
        {"records_in", records.size()},
        {"exported", out.pairs.size()},
        {"skipped", out.skipped},
        {"failures", failures},
        {"train", out.train_count},
        {"validation", out.validation_count},
        {"noise_filters",
         {{"block_chars", 50}, {"block_repeats", 3}, {"linebreak_run", 4},
          {"control_byte_ratio", 0.02}}},
        {"training_reference",
         {{"adapter", "LoRA"},
          {"lora_alpha", 16},
          {"lora_rank", 128},
          {"optimizer", "AdamW"},
          {"learning_rate", 1e-4},
          {"epochs", 32},
          {"effective_batch_size", 8},
          {"quantization", "4-bit"},
          {"note", "reference settings for the downstream tuning step, which is out of scope"}}}};

    if (!out_dir.empty()) {
        std::string train, validation_lines;
        for (const FinetunePair& p : out.pairs) {
            nlohmann::json messages = nlohmann::json::array();
            for (const ChatMessage& m : p.prompt_messages) {
                messages.push_back({{"content", m.content}, {"role", std::string(role_token(m.role))}});
            }
            messages.push_back({{"content", p.completion}, {"role", "assistant"}});
            nlohmann::json line{{"messages", messages}, {"record_id", p.record_id}};
            (p.split == Split::train ? train : validation_lines) += line.dump() + "\n";
        }
        write_file(out_dir + "/train.jsonl", train);
        write_file(out_dir + "/validation.jsonl", validation_lines);
        write_file(out_dir + "/metadata.json", out.metadata.dump(2) + "\n");
    }
    return out;
}

} // namespace decoy
