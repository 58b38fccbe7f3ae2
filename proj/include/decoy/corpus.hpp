#pragma once

#include "decoy/adversary.hpp"
#include "decoy/attributes.hpp"
#include "decoy/config.hpp"
#include "decoy/errors.hpp"
#include "decoy/gateway.hpp"

#include "json.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

namespace decoy {

// Corpus files are JSON lines, one record each:
//   {"attributes": {"age": "34", ...}, "id": "r1", "source": "synthetic_reddit", "text": "..."}
// "source" may be omitted on input. Unknown attribute tokens, empty ids and
// empty texts are rejected with SchemaError.

std::vector<Record> load_corpus(const std::string& path,
                                RecordSource default_source = RecordSource::synthetic_reddit);

std::vector<Record> load_synthetic_corpus(const std::string& path);

// Canonical one-line serialization (alphabetical keys, no extra whitespace).
// Loading a canonically written file and writing it again is byte-stable.
std::string corpus_line(const Record& record);
void write_corpus(const std::vector<Record>& records, const std::string& path);

// Raw span-annotated disclosure data, before any filtering. Labels are kept
// as strings because the source annotation scheme has categories outside the
// attribute set handled here.
struct DisclosureSpan {
    std::string label;
    std::string value;
    bool about_self = false;
};

struct DisclosureEntry {
    std::string id;
    std::string text;
    std::vector<DisclosureSpan> spans;
};

// Lines of {"id", "text", "disclosures": [{"attribute", "value", "subject"}]}
// where subject is "self" or "other".
std::vector<DisclosureEntry> load_disclosure_entries(const std::string& path);

// Keeps gender, relationship status, age, education and occupation, and only
// spans the author disclosed about themself. Spans with labels outside the
// attribute set are ignored; entries left without any kept attribute are
// dropped. First span per attribute wins.
std::vector<Record> preprocess_self_disclosure(const std::vector<DisclosureEntry>& entries);

struct PoolEntry {
    Record record; // source = finetune_pool
    std::map<Attribute, std::vector<std::string>> guesses; // exactly three per attribute
};

// Lines of {"id", "text", "attributes": {...}, "guesses": {"age": ["34", "35", "40"], ...}}.
std::vector<PoolEntry> load_pool_entries(const std::string& path);

// Noise heuristics, exposed for tests.
bool has_repeated_block(const std::string& text);  // same 50-char block 3+ times, non-overlapping
bool has_linebreak_run(const std::string& text);   // 4+ consecutive '\n', '\r' transparent
bool has_control_garbage(const std::string& text); // control bytes > 2% (tab and newlines excluded)

struct DroppedEntry {
    std::string id;
    std::string reason;
};

struct FilterResult {
    std::vector<Record> kept;
    std::vector<DroppedEntry> dropped;

    std::string drop_log() const; // one "id<TAB>reason" line per drop
};

// Drops noisy texts, then entries where none of the prior guesses hits the
// truth. The matcher may lack an equivalence judge; comparisons that would
// need one count as misses.
FilterResult filter_finetune_pool(const std::vector<PoolEntry>& entries, const Matcher& matcher);

enum class Split { train, validation };

struct FinetunePair {
    std::string record_id;
    std::vector<ChatMessage> prompt_messages;
    std::string completion; // the rewrite as two-key JSON text
    Split split = Split::train;
};

// The validation side of the 80/20 split: round(0.2 * n) ids, picked by
// ranking each id's seeded hash. Deterministic in (ids, seed).
std::set<std::string> validation_ids(const std::vector<std::string>& ids, std::uint64_t seed);

struct FinetuneExport {
    std::vector<FinetunePair> pairs; // input order
    int train_count = 0;
    int validation_count = 0;
    int skipped = 0; // teacher failures
    nlohmann::json metadata;
};

/// Builds the instruction-tuning dataset: one teacher rewrite per record under
/// the target + ground-truth conditioning variant (inference reasoning off,
/// run seed kept), paired with the rendered prompt, split by validation_ids.
/// Teacher failures are skipped and counted. When out_dir is non-empty, writes
/// train.jsonl, validation.jsonl and metadata.json there.
FinetuneExport export_finetune_dataset(const std::vector<Record>& records, const RunConfig& run,
                                       std::shared_ptr<ChatGateway> teacher,
                                       const std::string& out_dir);

} // namespace decoy
