#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace memaudit {

/// One fine-tuning record. Text is NFC-normalized at load time; all
/// character offsets downstream count Unicode code points of that form.
struct TrainingExample {
    std::string id;
    std::string input_text;
    std::string target_text;
};

struct GeneratedOutput {
    std::string example_id;
    std::string generation;
};

struct Token {
    std::string text;
    std::size_t char_start = 0;  // code-point offset, inclusive
    std::size_t char_end = 0;    // code-point offset, exclusive
};

struct PrefixSuffixPair {
    std::string example_id;
    std::string prefix;
    std::string suffix;
    std::size_t k_tokens = 0;  // number of tokens in the prefix
    bool fallback_applied = false;
};

/// How to split inputs whose token count does not exceed the prefix length.
struct ShortInputFallback {
    enum class Mode { HalfTokens, FixedCount };
    Mode mode = Mode::HalfTokens;
    std::size_t fixed_count = 15;

    static ShortInputFallback half() { return {}; }
    static ShortInputFallback fixed(std::size_t count) {
        return {Mode::FixedCount, count};
    }
};

/// Whitespace-delimited maximal non-space runs with code-point offsets into
/// `text`. Deterministic; empty text gives an empty vector.
std::vector<Token> tokenize(const std::string& text);

/// Splits input_text after token min(k, total) so prefix + suffix is
/// character-identical to the input. Inputs with total tokens <= k use the
/// fallback policy and are flagged.
PrefixSuffixPair split_prefix_suffix(const TrainingExample& example, std::size_t k,
                                     const ShortInputFallback& fallback = ShortInputFallback::half());

/// Line-delimited JSON records with string fields id, input, target
/// (target may be absent or null). Stops after `limit` parsed records.
std::vector<TrainingExample> load_corpus(const std::string& path,
                                         std::optional<std::size_t> limit = std::nullopt);

/// Line-delimited JSON records with string fields id, generation.
std::vector<GeneratedOutput> load_generations(const std::string& path,
                                              std::optional<std::size_t> limit = std::nullopt);

}  // namespace memaudit
