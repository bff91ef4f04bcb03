#include "memaudit/attention.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>

#include "json.hpp"
#include "memaudit/errors.hpp"

namespace memaudit {

namespace base64 {

namespace {
constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int decode_digit(char c) {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
}
}  // namespace

std::string encode(const unsigned char* data, std::size_t size) {
    std::string out;
    out.reserve((size + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 3 <= size; i += 3) {
        std::uint32_t v = (static_cast<std::uint32_t>(data[i]) << 16) |
                          (static_cast<std::uint32_t>(data[i + 1]) << 8) | data[i + 2];
        out.push_back(kAlphabet[(v >> 18) & 0x3F]);
        out.push_back(kAlphabet[(v >> 12) & 0x3F]);
        out.push_back(kAlphabet[(v >> 6) & 0x3F]);
        out.push_back(kAlphabet[v & 0x3F]);
    }
    std::size_t rest = size - i;
    if (rest == 1) {
        std::uint32_t v = static_cast<std::uint32_t>(data[i]) << 16;
        out.push_back(kAlphabet[(v >> 18) & 0x3F]);
        out.push_back(kAlphabet[(v >> 12) & 0x3F]);
        out.push_back('=');
        out.push_back('=');
    } else if (rest == 2) {
        std::uint32_t v = (static_cast<std::uint32_t>(data[i]) << 16) |
                          (static_cast<std::uint32_t>(data[i + 1]) << 8);
        out.push_back(kAlphabet[(v >> 18) & 0x3F]);
        out.push_back(kAlphabet[(v >> 12) & 0x3F]);
        out.push_back(kAlphabet[(v >> 6) & 0x3F]);
        out.push_back('=');
    }
    return out;
}

std::vector<unsigned char> decode(const std::string& text) {
    if (text.size() % 4 != 0) throw FormatError("base64 payload length is not a multiple of 4");
    std::vector<unsigned char> out;
    out.reserve(text.size() / 4 * 3);
    for (std::size_t i = 0; i < text.size(); i += 4) {
        int pad = 0;
        std::uint32_t v = 0;
        for (std::size_t j = 0; j < 4; ++j) {
            char c = text[i + j];
            if (c == '=') {
                if (i + 4 != text.size() || j < 2) throw FormatError("base64 padding in the middle of payload");
                ++pad;
                v <<= 6;
                continue;
            }
            if (pad > 0) throw FormatError("base64 data after padding");
            int digit = decode_digit(c);
            if (digit < 0) throw FormatError(std::string("invalid base64 character '") + c + "'");
            v = (v << 6) | static_cast<std::uint32_t>(digit);
        }
        out.push_back(static_cast<unsigned char>((v >> 16) & 0xFF));
        if (pad < 2) out.push_back(static_cast<unsigned char>((v >> 8) & 0xFF));
        if (pad < 1) out.push_back(static_cast<unsigned char>(v & 0xFF));
    }
    return out;
}

}  // namespace base64

namespace {

std::vector<float> decode_f32(const std::string& payload, std::size_t expected, std::size_t record) {
    std::vector<unsigned char> bytes = base64::decode(payload);
    if (bytes.size() != expected * 4) {
        throw FormatError("record " + std::to_string(record) + ": payload holds " +
                          std::to_string(bytes.size()) + " bytes, shape needs " +
                          std::to_string(expected * 4));
    }
    std::vector<float> values(expected);
    // Little-endian f32 on the wire; assemble explicitly so the reader does
    // not depend on host byte order.
    for (std::size_t i = 0; i < expected; ++i) {
        std::uint32_t v = static_cast<std::uint32_t>(bytes[4 * i]) |
                          (static_cast<std::uint32_t>(bytes[4 * i + 1]) << 8) |
                          (static_cast<std::uint32_t>(bytes[4 * i + 2]) << 16) |
                          (static_cast<std::uint32_t>(bytes[4 * i + 3]) << 24);
        float f;
        std::memcpy(&f, &v, 4);
        values[i] = f;
    }
    return values;
}

}  // namespace

std::vector<AttentionMap> load_attention(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open attention file: " + path);
    std::vector<AttentionMap> maps;
    std::string header_line;
    std::size_t record = 0;
    while (std::getline(in, header_line)) {
        if (!header_line.empty() && header_line.back() == '\r') header_line.pop_back();
        if (header_line.empty()) continue;
        ++record;
        nlohmann::json header = nlohmann::json::parse(header_line, nullptr, false);
        if (header.is_discarded() || !header.is_object()) {
            throw FormatError("record " + std::to_string(record) + ": header is not a JSON object");
        }
        auto require = [&](const char* field) -> const nlohmann::json& {
            if (!header.contains(field)) {
                throw FormatError("record " + std::to_string(record) + ": header missing \"" +
                                  field + "\"");
            }
            return header.at(field);
        };
        const auto& shape = require("shape");
        if (!shape.is_array() || shape.size() != 3) {
            throw FormatError("record " + std::to_string(record) +
                              ": \"shape\" must be [heads, out_len, in_len]");
        }
        std::size_t dims[3];
        for (std::size_t i = 0; i < 3; ++i) {
            if (!shape[i].is_number_integer() || shape[i].get<long long>() <= 0) {
                throw FormatError("record " + std::to_string(record) +
                                  ": \"shape\" entries must be positive integers");
            }
            dims[i] = shape[i].get<std::size_t>();
        }
        const auto& layer = require("layer");
        if (!layer.is_number_integer()) {
            throw FormatError("record " + std::to_string(record) + ": \"layer\" must be an integer");
        }
        const auto& sample_id = require("sample_id");
        if (!sample_id.is_string()) {
            throw FormatError("record " + std::to_string(record) + ": \"sample_id\" must be a string");
        }
        const auto& kind = require("kind");
        if (!kind.is_string() || kind.get<std::string>() != "cross") {
            throw FormatError("record " + std::to_string(record) +
                              ": \"kind\" must be \"cross\"");
        }

        std::string payload;
        if (!std::getline(in, payload)) {
            throw FormatError("record " + std::to_string(record) + ": missing payload line");
        }
        if (!payload.empty() && payload.back() == '\r') payload.pop_back();
        std::size_t heads = dims[0], out_len = dims[1], in_len = dims[2];
        std::vector<float> values = decode_f32(payload, heads * out_len * in_len, record);

        AttentionMap map;
        map.scores = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(out_len),
                                           static_cast<Eigen::Index>(in_len));
        map.sample_id = sample_id.get<std::string>();
        map.layer = layer.get<int>();
        map.head_averaged = true;
        for (std::size_t h = 0; h < heads; ++h) {
            for (std::size_t r = 0; r < out_len; ++r) {
                for (std::size_t c = 0; c < in_len; ++c) {
                    double v = values[(h * out_len + r) * in_len + c];
                    if (v < -1e-6) {
                        throw FormatError("record " + std::to_string(record) +
                                          ": negative attention weight " + std::to_string(v));
                    }
                    if (v < 0.0) v = 0.0;
                    map.scores(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) += v;
                }
            }
        }
        map.scores /= static_cast<double>(heads);
        for (Eigen::Index r = 0; r < map.scores.rows(); ++r) {
            double sum = map.scores.row(r).sum();
            if (sum <= 0.0) {
                std::cerr << "warning: record " << record << " (sample " << map.sample_id
                          << ") row " << r << " sums to zero, substituting uniform weights\n";
                map.scores.row(r).setConstant(1.0 / static_cast<double>(map.scores.cols()));
            } else {
                map.scores.row(r) /= sum;
            }
        }
        maps.push_back(std::move(map));
    }
    return maps;
}

AttentionMap average_heatmap(const std::vector<AttentionMap>& maps, std::size_t max_len) {
    if (maps.empty()) throw ValidationError("average_heatmap needs at least one attention map");
    std::size_t rows = 0, cols = 0;
    for (const auto& m : maps) {
        rows = std::max(rows, m.out_len());
        cols = std::max(cols, m.in_len());
    }
    rows = std::min(rows, max_len);
    cols = std::min(cols, max_len);
    AttentionMap avg;
    avg.scores = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows),
                                       static_cast<Eigen::Index>(cols));
    avg.sample_id = "batch-average";
    avg.layer = maps.front().layer;
    avg.head_averaged = true;
    avg.batch_averaged = true;
    for (const auto& m : maps) {
        Eigen::Index r = std::min<Eigen::Index>(m.scores.rows(), static_cast<Eigen::Index>(rows));
        Eigen::Index c = std::min<Eigen::Index>(m.scores.cols(), static_cast<Eigen::Index>(cols));
        avg.scores.topLeftCorner(r, c) += m.scores.topLeftCorner(r, c);
    }
    avg.scores /= static_cast<double>(maps.size());
    return avg;
}

std::vector<double> row_entropy(const AttentionMap& map) {
    std::vector<double> result(map.out_len());
    for (Eigen::Index r = 0; r < map.scores.rows(); ++r) {
        double h = 0.0;
        for (Eigen::Index c = 0; c < map.scores.cols(); ++c) {
            double a = map.scores(r, c);
            if (a > 0.0) h -= a * std::log(a);
        }
        result[static_cast<std::size_t>(r)] = h;
    }
    return result;
}

DensityProfile density_score(const AttentionMap& map) {
    if (map.in_len() < 2) {
        throw ValidationError("density_score needs in_len >= 2 so ln(in_len) is positive");
    }
    DensityProfile profile;
    profile.per_row_entropy = row_entropy(map);
    double log_n = std::log(static_cast<double>(map.in_len()));
    double entropy_sum = 0.0;
    for (double h : profile.per_row_entropy) entropy_sum += h / log_n;
    profile.normalized_entropy_mean = entropy_sum / static_cast<double>(map.out_len());

    double mass_sum = 0.0;
    std::vector<double> row(map.in_len());
    for (Eigen::Index r = 0; r < map.scores.rows(); ++r) {
        for (Eigen::Index c = 0; c < map.scores.cols(); ++c) {
            row[static_cast<std::size_t>(c)] = map.scores(r, c);
        }
        std::size_t top = std::min<std::size_t>(5, row.size());
        std::partial_sort(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(top), row.end(),
                          std::greater<double>());
        double mass = 0.0;
        for (std::size_t i = 0; i < top; ++i) mass += row[i];
        mass_sum += mass;
    }
    profile.top5_mass_mean = mass_sum / static_cast<double>(map.out_len());
    return profile;
}

void save_heatmap_csv(const AttentionMap& map, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write heatmap: " + path);
    std::ostringstream line;
    line.precision(17);
    for (Eigen::Index r = 0; r < map.scores.rows(); ++r) {
        line.str("");
        for (Eigen::Index c = 0; c < map.scores.cols(); ++c) {
            if (c > 0) line << ',';
            line << map.scores(r, c);
        }
        out << line.str() << '\n';
    }
    if (!out) throw IoError("failed writing heatmap: " + path);
}

}  // namespace memaudit
