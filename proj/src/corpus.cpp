#include "memaudit/corpus.hpp"

#include <fstream>
#include <unordered_set>

#include "json.hpp"

#include "memaudit/errors.hpp"
#include "memaudit/unicode.hpp"

namespace memaudit {

using nlohmann::json;

std::vector<Token> tokenize(const std::string& text) {
    std::vector<Token> tokens;
    const std::vector<char32_t> cps = unicode::decode_utf8(text);
    std::size_t i = 0;
    while (i < cps.size()) {
        if (unicode::is_space(cps[i])) {
            ++i;
            continue;
        }
        std::size_t start = i;
        while (i < cps.size() && !unicode::is_space(cps[i])) ++i;
        std::vector<char32_t> run(cps.begin() + static_cast<std::ptrdiff_t>(start),
                                  cps.begin() + static_cast<std::ptrdiff_t>(i));
        tokens.push_back({unicode::encode_utf8(run), start, i});
    }
    return tokens;
}

PrefixSuffixPair split_prefix_suffix(const TrainingExample& example, std::size_t k,
                                     const ShortInputFallback& fallback) {
    if (k < 1) throw ValidationError("split_prefix_suffix: k must be >= 1");
    if (example.input_text.empty()) {
        throw ValidationError("split_prefix_suffix: empty input_text for id '" + example.id + "'");
    }
    const std::vector<Token> tokens = tokenize(example.input_text);
    const std::size_t total = tokens.size();

    std::size_t prefix_tokens;
    bool used_fallback = false;
    if (total > k) {
        prefix_tokens = k;
    } else {
        used_fallback = true;
        prefix_tokens = fallback.mode == ShortInputFallback::Mode::HalfTokens
                            ? total / 2
                            : std::min(fallback.fixed_count, total);
    }

    const std::size_t cut = prefix_tokens == 0 ? 0 : tokens[prefix_tokens - 1].char_end;
    unicode::CodepointIndex idx(example.input_text);
    PrefixSuffixPair pair;
    pair.example_id = example.id;
    pair.prefix = std::string(idx.slice(0, cut));
    pair.suffix = std::string(idx.slice(cut, idx.size()));
    pair.k_tokens = prefix_tokens;
    pair.fallback_applied = used_fallback;
    return pair;
}

namespace {

std::string require_string(const json& record, const char* key, std::size_t line_no) {
    if (!record.contains(key) || !record[key].is_string()) {
        throw FormatError("corpus line " + std::to_string(line_no) + ": missing string field '" +
                          key + "'");
    }
    return record[key].get<std::string>();
}

template <typename Record, typename ParseLine>
std::vector<Record> load_jsonl(const std::string& path, std::optional<std::size_t> limit,
                               ParseLine parse_line) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file: " + path);
    std::vector<Record> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (limit && records.size() >= *limit) break;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        json parsed = json::parse(line, nullptr, false);
        if (parsed.is_discarded() || !parsed.is_object()) {
            throw FormatError("corpus line " + std::to_string(line_no) + ": not a JSON object");
        }
        records.push_back(parse_line(parsed, line_no));
    }
    if (in.bad()) throw IoError("read failure on: " + path);
    return records;
}

}  // namespace

std::vector<TrainingExample> load_corpus(const std::string& path, std::optional<std::size_t> limit) {
    std::unordered_set<std::string> seen;
    auto records = load_jsonl<TrainingExample>(path, limit, [&](const json& rec, std::size_t line_no) {
        TrainingExample ex;
        ex.id = require_string(rec, "id", line_no);
        ex.input_text = unicode::nfc(require_string(rec, "input", line_no));
        if (rec.contains("target") && rec["target"].is_string()) {
            ex.target_text = unicode::nfc(rec["target"].get<std::string>());
        }
        if (ex.input_text.empty()) {
            throw ValidationError("corpus line " + std::to_string(line_no) + ": empty input for id '" +
                                  ex.id + "'");
        }
        if (!seen.insert(ex.id).second) {
            throw ValidationError("corpus line " + std::to_string(line_no) + ": duplicate id '" +
                                  ex.id + "'");
        }
        return ex;
    });
    return records;
}

std::vector<GeneratedOutput> load_generations(const std::string& path,
                                              std::optional<std::size_t> limit) {
    return load_jsonl<GeneratedOutput>(path, limit, [](const json& rec, std::size_t line_no) {
        GeneratedOutput out;
        out.example_id = require_string(rec, "id", line_no);
        out.generation = unicode::nfc(require_string(rec, "generation", line_no));
        return out;
    });
}

}  // namespace memaudit
