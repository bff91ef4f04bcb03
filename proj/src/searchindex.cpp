#include "memaudit/searchindex.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>

#include "memaudit/errors.hpp"
#include "memaudit/textnorm.hpp"

namespace memaudit {

SuffixIndex SuffixIndex::build(const std::vector<PrefixSuffixPair>& pairs, Bm25Params params) {
    SuffixIndex index;
    index.params_ = params;

    std::set<std::string> seen;
    for (const auto& pair : pairs) {
        if (!seen.insert(pair.example_id).second) {
            throw ValidationError("duplicate example id in index input: " + pair.example_id);
        }
    }
    index.doc_ids_.assign(seen.begin(), seen.end());
    for (std::uint32_t i = 0; i < index.doc_ids_.size(); ++i) {
        index.ordinals_.emplace(index.doc_ids_[i], i);
    }

    index.doc_lengths_.assign(index.doc_ids_.size(), 0);
    std::uint64_t total_length = 0;
    for (const auto& pair : pairs) {
        const std::uint32_t ordinal = index.ordinals_.at(pair.example_id);
        auto terms = textnorm::normalize_terms(pair.suffix);
        index.doc_lengths_[ordinal] = terms.size();
        total_length += terms.size();

        std::map<std::string, std::uint32_t> counts;
        for (auto& term : terms) ++counts[std::move(term)];
        for (auto& [term, tf] : counts) {
            index.postings_[term].push_back({ordinal, tf});
        }
    }
    for (auto& [term, list] : index.postings_) {
        (void)term;
        std::sort(list.begin(), list.end(),
                  [](const Posting& a, const Posting& b) { return a.doc < b.doc; });
    }
    index.avg_doc_length_ =
        index.doc_ids_.empty() ? 0.0
                               : static_cast<double>(total_length) / index.doc_ids_.size();
    return index;
}

double SuffixIndex::idf(const std::string& term) const {
    const double n = static_cast<double>(doc_count());
    const double df = static_cast<double>(doc_frequency(term));
    return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

std::size_t SuffixIndex::doc_frequency(const std::string& term) const {
    auto it = postings_.find(term);
    return it == postings_.end() ? 0 : it->second.size();
}

std::size_t SuffixIndex::doc_length(const std::string& doc_id) const {
    return doc_lengths_[require_ordinal(doc_id)];
}

std::uint32_t SuffixIndex::require_ordinal(const std::string& doc_id) const {
    auto it = ordinals_.find(doc_id);
    if (it == ordinals_.end()) throw NotFoundError("doc id not indexed: " + doc_id);
    return it->second;
}

double SuffixIndex::score_one(const std::string& term, std::uint32_t ordinal) const {
    auto it = postings_.find(term);
    if (it == postings_.end()) return 0.0;
    const auto& list = it->second;
    auto pos = std::lower_bound(list.begin(), list.end(), ordinal,
                                [](const Posting& p, std::uint32_t d) { return p.doc < d; });
    if (pos == list.end() || pos->doc != ordinal) return 0.0;
    const double tf = pos->tf;
    const double len = static_cast<double>(doc_lengths_[ordinal]);
    const double norm = params_.k1 * (1.0 - params_.b + params_.b * len / avg_doc_length_);
    return idf(term) * tf * (params_.k1 + 1.0) / (tf + norm);
}

double SuffixIndex::bm25_score(const std::vector<std::string>& query_terms,
                               const std::string& doc_id) const {
    const std::uint32_t ordinal = require_ordinal(doc_id);
    double score = 0.0;
    for (const auto& term : query_terms) score += score_one(term, ordinal);
    return score;
}

std::vector<ScoredCandidate> SuffixIndex::retrieve_top_k(const std::string& query_text,
                                                         std::size_t k,
                                                         const std::string& query_id) const {
    if (k < 1) throw ValidationError("retrieval K must be >= 1");
    auto terms = textnorm::normalize_terms(query_text);

    std::map<std::string, std::uint32_t> multiplicity;
    for (auto& term : terms) ++multiplicity[std::move(term)];

    std::unordered_map<std::uint32_t, double> scores;
    for (const auto& [term, mult] : multiplicity) {
        auto it = postings_.find(term);
        if (it == postings_.end()) continue;
        const double term_idf = idf(term);
        for (const auto& posting : it->second) {
            const double tf = posting.tf;
            const double len = static_cast<double>(doc_lengths_[posting.doc]);
            const double norm =
                params_.k1 * (1.0 - params_.b + params_.b * len / avg_doc_length_);
            scores[posting.doc] +=
                mult * term_idf * tf * (params_.k1 + 1.0) / (tf + norm);
        }
    }

    std::vector<ScoredCandidate> results;
    results.reserve(scores.size());
    for (const auto& [ordinal, score] : scores) {
        if (score > 0.0) results.push_back({query_id, doc_ids_[ordinal], score, 0});
    }
    std::sort(results.begin(), results.end(), [](const ScoredCandidate& a, const ScoredCandidate& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.doc_id < b.doc_id;
    });
    if (results.size() > k) results.resize(k);
    for (std::size_t i = 0; i < results.size(); ++i) results[i].rank = i + 1;
    return results;
}

namespace {

void write_u32(std::ostream& out, std::uint32_t value) {
    unsigned char bytes[4];
    for (int i = 0; i < 4; ++i) bytes[i] = static_cast<unsigned char>((value >> (8 * i)) & 0xFF);
    out.write(reinterpret_cast<const char*>(bytes), 4);
}

void write_u64(std::ostream& out, std::uint64_t value) {
    unsigned char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>((value >> (8 * i)) & 0xFF);
    out.write(reinterpret_cast<const char*>(bytes), 8);
}

void write_f64(std::ostream& out, double value) {
    std::uint64_t bits;
    static_assert(sizeof(bits) == sizeof(value));
    std::memcpy(&bits, &value, sizeof(bits));
    write_u64(out, bits);
}

void write_string(std::ostream& out, const std::string& value) {
    write_u32(out, static_cast<std::uint32_t>(value.size()));
    out.write(value.data(), static_cast<std::streamsize>(value.size()));
}

std::uint32_t read_u32(std::istream& in) {
    unsigned char bytes[4];
    in.read(reinterpret_cast<char*>(bytes), 4);
    if (!in) throw FormatError("index file truncated");
    std::uint32_t value = 0;
    for (int i = 0; i < 4; ++i) value |= static_cast<std::uint32_t>(bytes[i]) << (8 * i);
    return value;
}

std::uint64_t read_u64(std::istream& in) {
    unsigned char bytes[8];
    in.read(reinterpret_cast<char*>(bytes), 8);
    if (!in) throw FormatError("index file truncated");
    std::uint64_t value = 0;
    for (int i = 0; i < 8; ++i) value |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    return value;
}

double read_f64(std::istream& in) {
    std::uint64_t bits = read_u64(in);
    double value;
    std::memcpy(&value, &bits, sizeof(value));
    return value;
}

std::string read_string(std::istream& in) {
    const std::uint32_t length = read_u32(in);
    std::string value(length, '\0');
    in.read(value.data(), static_cast<std::streamsize>(length));
    if (!in) throw FormatError("index file truncated");
    return value;
}

constexpr char kMagic[5] = {'M', 'T', 'I', 'X', '1'};

}  // namespace

void SuffixIndex::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open index file for writing: " + path);

    out.write(kMagic, sizeof(kMagic));
    write_f64(out, params_.k1);
    write_f64(out, params_.b);
    write_u64(out, doc_ids_.size());
    for (std::size_t i = 0; i < doc_ids_.size(); ++i) {
        write_string(out, doc_ids_[i]);
        write_u64(out, doc_lengths_[i]);
    }

    std::map<std::string, const std::vector<Posting>*> sorted_terms;
    for (const auto& [term, list] : postings_) sorted_terms.emplace(term, &list);
    write_u64(out, sorted_terms.size());
    for (const auto& [term, list] : sorted_terms) {
        write_string(out, term);
        write_u64(out, list->size());
        for (const auto& posting : *list) {
            write_u32(out, posting.doc);
            write_u32(out, posting.tf);
        }
    }
    if (!out) throw IoError("failed writing index file: " + path);
}

SuffixIndex SuffixIndex::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open index file: " + path);

    char magic[5];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw FormatError("not an MTIX1 index file: " + path);
    }

    SuffixIndex index;
    index.params_.k1 = read_f64(in);
    index.params_.b = read_f64(in);

    const std::uint64_t doc_count = read_u64(in);
    index.doc_ids_.reserve(doc_count);
    index.doc_lengths_.reserve(doc_count);
    std::uint64_t total_length = 0;
    for (std::uint64_t i = 0; i < doc_count; ++i) {
        index.doc_ids_.push_back(read_string(in));
        index.doc_lengths_.push_back(read_u64(in));
        total_length += index.doc_lengths_.back();
        index.ordinals_.emplace(index.doc_ids_.back(), static_cast<std::uint32_t>(i));
    }
    index.avg_doc_length_ =
        doc_count == 0 ? 0.0 : static_cast<double>(total_length) / static_cast<double>(doc_count);

    const std::uint64_t term_count = read_u64(in);
    for (std::uint64_t t = 0; t < term_count; ++t) {
        std::string term = read_string(in);
        const std::uint64_t posting_count = read_u64(in);
        std::vector<Posting> list;
        list.reserve(posting_count);
        for (std::uint64_t p = 0; p < posting_count; ++p) {
            Posting posting;
            posting.doc = read_u32(in);
            posting.tf = read_u32(in);
            if (posting.doc >= doc_count) throw FormatError("index posting references unknown doc");
            list.push_back(posting);
        }
        index.postings_.emplace(std::move(term), std::move(list));
    }
    return index;
}

}  // namespace memaudit
