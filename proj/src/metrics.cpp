#include "memaudit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "memaudit/errors.hpp"
#include "memaudit/rng.hpp"

namespace memaudit {

namespace {

int precedence_rank(MemorizationType type) {
    switch (type) {
        case MemorizationType::Verbatim: return 0;
        case MemorizationType::Idea: return 1;
        case MemorizationType::ParaphraseHigh: return 2;
        case MemorizationType::ParaphraseLow: return 3;
    }
    return 4;
}

const std::vector<MemorizationType> kAllTypes = {
    MemorizationType::Verbatim,
    MemorizationType::Idea,
    MemorizationType::ParaphraseHigh,
    MemorizationType::ParaphraseLow,
};

}  // namespace

double case_mean_cosine(const MemorizationCase& mem_case) {
    double weighted = 0.0;
    std::size_t seeds = 0;
    for (const auto& fragment : mem_case.fragments) {
        weighted += fragment.mean_cosine * static_cast<double>(fragment.seed_count);
        seeds += fragment.seed_count;
    }
    return seeds == 0 ? 0.0 : weighted / static_cast<double>(seeds);
}

double AuditResult::rate_total() const {
    return n == 0 ? 0.0 : static_cast<double>(total_count) / static_cast<double>(n);
}

double AuditResult::rate(MemorizationType type) const {
    auto it = counts.find(type);
    const std::size_t count = it == counts.end() ? 0 : it->second;
    return n == 0 ? 0.0 : static_cast<double>(count) / static_cast<double>(n);
}

AuditResult aggregate(const std::vector<MemorizationCase>& cases, std::size_t n) {
    if (n == 0) throw ValidationError("cannot aggregate over zero prompts");

    AuditResult result;
    result.n = n;
    for (MemorizationType type : kAllTypes) result.counts[type] = 0;

    for (const auto& mem_case : cases) {
        auto it = result.per_prompt.find(mem_case.query_id);
        if (it == result.per_prompt.end()) {
            result.per_prompt.emplace(mem_case.query_id, mem_case);
            continue;
        }
        const MemorizationCase& held = it->second;
        const int new_rank = precedence_rank(mem_case.mem_type);
        const int held_rank = precedence_rank(held.mem_type);
        bool replace = false;
        if (new_rank != held_rank) {
            replace = new_rank < held_rank;
        } else {
            const double new_cosine = case_mean_cosine(mem_case);
            const double held_cosine = case_mean_cosine(held);
            if (new_cosine != held_cosine) {
                replace = new_cosine > held_cosine;
            } else {
                replace = mem_case.matched_doc_id < held.matched_doc_id;
            }
        }
        if (replace) it->second = mem_case;
    }

    for (const auto& [query_id, mem_case] : result.per_prompt) {
        (void)query_id;
        ++result.counts[mem_case.mem_type];
    }
    result.total_count = result.per_prompt.size();
    return result;
}

std::vector<double> indicator_vector(std::size_t count, std::size_t n) {
    if (count > n) throw ValidationError("indicator count exceeds n");
    std::vector<double> indicators(n, 0.0);
    std::fill(indicators.begin(), indicators.begin() + static_cast<std::ptrdiff_t>(count), 1.0);
    return indicators;
}

ConfidenceInterval bootstrap_ci(const std::vector<double>& indicators, std::size_t resamples,
                                std::uint64_t seed, int level_low, int level_high) {
    if (indicators.empty()) throw ValidationError("bootstrap input must be non-empty");
    if (resamples < 1) throw ValidationError("bootstrap needs at least one resample");
    if (level_low < 0 || level_high > 100 || level_low > level_high) {
        throw ValidationError("bootstrap percentile levels must satisfy 0 <= low <= high <= 100");
    }

    const std::size_t n = indicators.size();
    std::vector<double> means(resamples, 0.0);
    for (std::size_t r = 0; r < resamples; ++r) {
        rng::Engine engine(rng::substream_seed(seed, r));
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            sum += indicators[engine.next_below(n)];
        }
        means[r] = sum / static_cast<double>(n);
    }
    std::sort(means.begin(), means.end());

    auto nearest_rank = [&](int level) {
        const double q = static_cast<double>(level) / 100.0;
        std::size_t rank =
            static_cast<std::size_t>(std::ceil(q * static_cast<double>(resamples)));
        if (rank < 1) rank = 1;
        if (rank > resamples) rank = resamples;
        return means[rank - 1];
    };

    ConfidenceInterval interval;
    interval.low = nearest_rank(level_low);
    interval.high = nearest_rank(level_high);
    interval.level_low = level_low;
    interval.level_high = level_high;
    interval.resamples = resamples;
    return interval;
}

ReportFormat report_format_from_string(const std::string& name) {
    if (name == "json") return ReportFormat::Json;
    if (name == "text") return ReportFormat::Text;
    if (name == "csv") return ReportFormat::Csv;
    throw ValidationError("unknown report format: " + name + " (expected json, text or csv)");
}

std::string current_utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm utc{};
    gmtime_r(&now, &utc);
    char buffer[32];
    std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", &utc);
    return buffer;
}

namespace {

const std::vector<std::pair<std::string, MemorizationType>> kTypeKeys = {
    {"verbatim", MemorizationType::Verbatim},
    {"idea", MemorizationType::Idea},
    {"paraphrase_high", MemorizationType::ParaphraseHigh},
    {"paraphrase_low", MemorizationType::ParaphraseLow},
};

nlohmann::json interval_to_json(const ConfidenceInterval& interval) {
    return {
        {"low", interval.low},           {"high", interval.high},
        {"level_low", interval.level_low}, {"level_high", interval.level_high},
        {"resamples", interval.resamples},
    };
}

nlohmann::json case_to_json(const MemorizationCase& mem_case) {
    nlohmann::json fragments = nlohmann::json::array();
    for (const auto& fragment : mem_case.fragments) {
        fragments.push_back({
            {"query_start", fragment.query_start},
            {"query_end", fragment.query_end},
            {"candidate_start", fragment.candidate_start},
            {"candidate_end", fragment.candidate_end},
            {"seed_count", fragment.seed_count},
            {"mean_cosine", fragment.mean_cosine},
        });
    }
    nlohmann::json entry = {
        {"query_id", mem_case.query_id},
        {"doc_id", mem_case.matched_doc_id},
        {"type", to_string(mem_case.mem_type)},
        {"self_match", mem_case.self_match},
        {"fragments", std::move(fragments)},
    };
    entry["p"] = mem_case.paraphrase_p ? nlohmann::json(*mem_case.paraphrase_p)
                                       : nlohmann::json(nullptr);
    return entry;
}

nlohmann::json report_to_json(const AuditResult& result,
                              const std::map<std::string, ConfidenceInterval>& intervals,
                              const std::string& config_echo, std::uint64_t seed,
                              const std::string& timestamp,
                              const std::vector<MemorizationCase>* provenance) {
    nlohmann::json counts;
    nlohmann::json rates;
    counts["total"] = result.total_count;
    rates["total"] = result.rate_total();
    for (const auto& [key, type] : kTypeKeys) {
        const auto it = result.counts.find(type);
        counts[key] = it == result.counts.end() ? 0 : it->second;
        rates[key] = result.rate(type);
    }

    nlohmann::json interval_json = nlohmann::json::object();
    for (const auto& [key, interval] : intervals) {
        interval_json[key] = interval_to_json(interval);
    }

    nlohmann::json cases = nlohmann::json::array();
    if (provenance != nullptr) {
        for (const auto& mem_case : *provenance) cases.push_back(case_to_json(mem_case));
    } else {
        for (const auto& [query_id, mem_case] : result.per_prompt) {
            (void)query_id;
            cases.push_back(case_to_json(mem_case));
        }
    }

    nlohmann::json config = nlohmann::json::object();
    if (!config_echo.empty()) {
        config = nlohmann::json::parse(config_echo, nullptr, false);
        if (config.is_discarded()) config = config_echo;
    }

    return {
        {"schema", "memaudit-report-v1"},
        {"generated_at", timestamp},
        {"n", result.n},
        {"seed", seed},
        {"config", std::move(config)},
        {"counts", std::move(counts)},
        {"rates", std::move(rates)},
        {"intervals", std::move(interval_json)},
        {"cases", std::move(cases)},
    };
}

std::string percent(double rate) {
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%.2f%%", rate * 100.0);
    return buffer;
}

std::string interval_text(const std::map<std::string, ConfidenceInterval>& intervals,
                          const std::string& key) {
    auto it = intervals.find(key);
    if (it == intervals.end()) return "-";
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "[%.2f%%, %.2f%%]", it->second.low * 100.0,
                  it->second.high * 100.0);
    return buffer;
}

std::string render_text(const AuditResult& result,
                        const std::map<std::string, ConfidenceInterval>& intervals,
                        std::uint64_t seed) {
    const std::vector<std::pair<std::string, std::string>> columns = {
        {"Total", "total"},
        {"Verbatim", "verbatim"},
        {"Idea", "idea"},
        {"Paraphrase p>0.5", "paraphrase_high"},
        {"Paraphrase p<0.5", "paraphrase_low"},
    };

    auto count_of = [&](const std::string& key) -> std::size_t {
        if (key == "total") return result.total_count;
        for (const auto& [name, type] : kTypeKeys) {
            if (name == key) {
                auto it = result.counts.find(type);
                return it == result.counts.end() ? 0 : it->second;
            }
        }
        return 0;
    };
    auto rate_of = [&](const std::string& key) {
        if (key == "total") return result.rate_total();
        for (const auto& [name, type] : kTypeKeys) {
            if (name == key) return result.rate(type);
        }
        return 0.0;
    };

    std::string out;
    out += "memorization audit summary\n";
    out += "n=" + std::to_string(result.n) + " seed=" + std::to_string(seed) + "\n\n";

    const int width = 20;
    char line[256];
    std::string header;
    std::string rate_row = "rate";
    std::string count_row = "count";
    std::string ci_row = "ci";
    std::snprintf(line, sizeof(line), "%-8s", "");
    header = line;
    rate_row.resize(8, ' ');
    count_row.resize(8, ' ');
    ci_row.resize(8, ' ');
    for (const auto& [label, key] : columns) {
        std::snprintf(line, sizeof(line), "%-*s", width, label.c_str());
        header += line;
        std::snprintf(line, sizeof(line), "%-*s", width, percent(rate_of(key)).c_str());
        rate_row += line;
        std::snprintf(line, sizeof(line), "%-*zu", width, count_of(key));
        count_row += line;
        std::snprintf(line, sizeof(line), "%-*s", width, interval_text(intervals, key).c_str());
        ci_row += line;
    }
    out += header + "\n" + rate_row + "\n" + count_row + "\n" + ci_row + "\n";
    return out;
}

std::string render_csv(const AuditResult& result,
                       const std::map<std::string, ConfidenceInterval>& intervals,
                       std::uint64_t seed) {
    std::string out = "metric,count,rate,ci_low,ci_high,level_low,level_high,resamples,seed\n";
    auto add_row = [&](const std::string& key, std::size_t count, double rate) {
        char buffer[256];
        auto it = intervals.find(key);
        if (it != intervals.end()) {
            std::snprintf(buffer, sizeof(buffer), "%s,%zu,%.10g,%.10g,%.10g,%d,%d,%zu,%llu\n",
                          key.c_str(), count, rate, it->second.low, it->second.high,
                          it->second.level_low, it->second.level_high, it->second.resamples,
                          static_cast<unsigned long long>(seed));
        } else {
            std::snprintf(buffer, sizeof(buffer), "%s,%zu,%.10g,,,,,,%llu\n", key.c_str(), count,
                          rate, static_cast<unsigned long long>(seed));
        }
        out += buffer;
    };
    add_row("total", result.total_count, result.rate_total());
    for (const auto& [key, type] : kTypeKeys) {
        auto it = result.counts.find(type);
        add_row(key, it == result.counts.end() ? 0 : it->second, result.rate(type));
    }
    return out;
}

}  // namespace

std::string render_report(const AuditResult& result,
                          const std::map<std::string, ConfidenceInterval>& intervals,
                          ReportFormat format, const std::string& config_echo, std::uint64_t seed,
                          const std::string& timestamp,
                          const std::vector<MemorizationCase>* provenance) {
    switch (format) {
        case ReportFormat::Json:
            return report_to_json(result, intervals, config_echo, seed, timestamp, provenance)
                       .dump(2) +
                   "\n";
        case ReportFormat::Text:
            return render_text(result, intervals, seed);
        case ReportFormat::Csv:
            return render_csv(result, intervals, seed);
    }
    throw ValidationError("unknown report format value");
}

void emit_report(const AuditResult& result,
                 const std::map<std::string, ConfidenceInterval>& intervals,
                 const std::string& path, ReportFormat format, const std::string& config_echo,
                 std::uint64_t seed, const std::string& timestamp,
                 const std::vector<MemorizationCase>* provenance) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open report file for writing: " + path);
    out << render_report(result, intervals, format, config_echo, seed, timestamp, provenance);
    if (!out) throw IoError("failed writing report file: " + path);
}

ParsedReport parse_report(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open report file: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("report is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw FormatError("report root must be a JSON object");

    ParsedReport parsed;
    parsed.n = doc.at("n").get<std::size_t>();
    const auto& counts = doc.at("counts");
    parsed.total_count = counts.at("total").get<std::size_t>();
    for (const auto& [key, type] : kTypeKeys) {
        parsed.counts[type] = counts.at(key).get<std::size_t>();
    }
    parsed.case_count = doc.at("cases").size();
    return parsed;
}

}  // namespace memaudit
