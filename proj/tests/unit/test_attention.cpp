#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "memaudit/attention.hpp"
#include "memaudit/errors.hpp"

using namespace memaudit;

namespace {

std::string encode_floats(const std::vector<float>& values) {
    std::vector<unsigned char> bytes(values.size() * 4);
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::uint32_t v;
        std::memcpy(&v, &values[i], 4);
        bytes[4 * i] = static_cast<unsigned char>(v & 0xFF);
        bytes[4 * i + 1] = static_cast<unsigned char>((v >> 8) & 0xFF);
        bytes[4 * i + 2] = static_cast<unsigned char>((v >> 16) & 0xFF);
        bytes[4 * i + 3] = static_cast<unsigned char>((v >> 24) & 0xFF);
    }
    return base64::encode(bytes.data(), bytes.size());
}

std::string temp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

std::string record(const std::string& header, const std::vector<float>& values) {
    return header + "\n" + encode_floats(values) + "\n";
}

AttentionMap uniform_map(std::size_t rows, std::size_t cols) {
    AttentionMap map;
    map.scores = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(rows),
                                           static_cast<Eigen::Index>(cols),
                                           1.0 / static_cast<double>(cols));
    map.sample_id = "uniform";
    return map;
}

}  // namespace

TEST_CASE("base64 round trip and malformed input") {
    const unsigned char raw[] = {0x00, 0x01, 0xFE, 0xFF, 0x7A};
    for (std::size_t len = 0; len <= sizeof(raw); ++len) {
        std::string text = base64::encode(raw, len);
        std::vector<unsigned char> back = base64::decode(text);
        REQUIRE(back.size() == len);
        CHECK(std::memcmp(back.data(), raw, len) == 0);
    }
    CHECK(base64::encode(raw, 3) == "AAH+");
    CHECK_THROWS_AS(base64::decode("abc"), FormatError);
    CHECK_THROWS_AS(base64::decode("ab!="), FormatError);
    CHECK_THROWS_AS(base64::decode("a=bc"), FormatError);
}

TEST_CASE("loader averages heads and renormalizes rows") {
    // 2 heads × 3 out × 4 in. Head means before renormalization:
    // row0 = [.15 .25 .3 .3] (sum 1), row1 = [.25 .25 .25 .25],
    // row2 = [.5 .1 .2 .1] (sum .9, so entries divide by .9).
    std::vector<float> values = {
        0.1f, 0.2f, 0.3f, 0.4f,  0.2f, 0.3f, 0.2f, 0.3f,  0.6f, 0.0f, 0.2f, 0.2f,
        0.2f, 0.3f, 0.3f, 0.2f,  0.3f, 0.2f, 0.3f, 0.2f,  0.4f, 0.2f, 0.2f, 0.0f,
    };
    const std::string path = temp_path("attn_basic.jsonl");
    write_file(path, record(
        R"({"shape":[2,3,4],"layer":5,"sample_id":"s1","kind":"cross"})", values));
    std::vector<AttentionMap> maps = load_attention(path);
    REQUIRE(maps.size() == 1);
    const AttentionMap& m = maps[0];
    CHECK(m.sample_id == "s1");
    CHECK(m.layer == 5);
    CHECK(m.head_averaged);
    CHECK(m.out_len() == 3);
    CHECK(m.in_len() == 4);
    CHECK(m.scores(0, 0) == doctest::Approx(0.15).epsilon(1e-6));
    CHECK(m.scores(0, 2) == doctest::Approx(0.30).epsilon(1e-6));
    CHECK(m.scores(2, 0) == doctest::Approx(0.5 / 0.9).epsilon(1e-6));
    for (Eigen::Index r = 0; r < 3; ++r) {
        CHECK(m.scores.row(r).sum() == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("loader renormalizes rows that do not sum to one") {
    std::vector<float> values = {2.0f, 6.0f, 1.0f, 1.0f};
    const std::string path = temp_path("attn_norm.jsonl");
    write_file(path, record(
        R"({"shape":[1,2,2],"layer":0,"sample_id":"n","kind":"cross"})", values));
    AttentionMap m = load_attention(path)[0];
    CHECK(m.scores(0, 0) == doctest::Approx(0.25).epsilon(1e-9));
    CHECK(m.scores(0, 1) == doctest::Approx(0.75).epsilon(1e-9));
    CHECK(m.scores(1, 0) == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("zero rows become uniform") {
    std::vector<float> values = {0.0f, 0.0f, 0.0f, 1.0f, 2.0f, 3.0f};
    const std::string path = temp_path("attn_zero_row.jsonl");
    write_file(path, record(
        R"({"shape":[1,2,3],"layer":0,"sample_id":"z","kind":"cross"})", values));
    AttentionMap m = load_attention(path)[0];
    for (Eigen::Index c = 0; c < 3; ++c) {
        CHECK(m.scores(0, c) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    }
}

TEST_CASE("tiny negative noise is clamped, real negatives are rejected") {
    const std::string path = temp_path("attn_neg.jsonl");
    write_file(path, record(
        R"({"shape":[1,1,2],"layer":0,"sample_id":"eps","kind":"cross"})",
        {-1e-7f, 1.0f}));
    AttentionMap m = load_attention(path)[0];
    CHECK(m.scores(0, 0) == 0.0);
    CHECK(m.scores(0, 1) == 1.0);

    write_file(path, record(
        R"({"shape":[1,1,2],"layer":0,"sample_id":"bad","kind":"cross"})",
        {-0.5f, 1.0f}));
    CHECK_THROWS_AS(load_attention(path), FormatError);
}

TEST_CASE("loader rejects malformed records with the field named") {
    const std::string path = temp_path("attn_bad.jsonl");
    std::vector<float> four = {1.0f, 2.0f, 3.0f, 4.0f};

    write_file(path, "not json\n" + encode_floats(four) + "\n");
    CHECK_THROWS_AS(load_attention(path), FormatError);

    write_file(path, record(R"({"shape":[1,2,2],"layer":0,"kind":"cross"})", four));
    CHECK_THROWS_WITH_AS(load_attention(path),
                         doctest::Contains("sample_id"), FormatError);

    write_file(path, record(R"({"shape":[1,2],"layer":0,"sample_id":"x","kind":"cross"})", four));
    CHECK_THROWS_WITH_AS(load_attention(path), doctest::Contains("shape"), FormatError);

    write_file(path, record(
        R"({"shape":[1,2,2],"layer":"top","sample_id":"x","kind":"cross"})", four));
    CHECK_THROWS_WITH_AS(load_attention(path), doctest::Contains("layer"), FormatError);

    write_file(path, record(
        R"({"shape":[1,2,2],"layer":0,"sample_id":"x","kind":"self"})", four));
    CHECK_THROWS_WITH_AS(load_attention(path), doctest::Contains("cross"), FormatError);

    write_file(path, record(
        R"({"shape":[1,2,3],"layer":0,"sample_id":"x","kind":"cross"})", four));
    CHECK_THROWS_WITH_AS(load_attention(path), doctest::Contains("bytes"), FormatError);

    write_file(path, R"({"shape":[1,2,2],"layer":0,"sample_id":"x","kind":"cross"})" "\n");
    CHECK_THROWS_WITH_AS(load_attention(path), doctest::Contains("payload"), FormatError);

    CHECK_THROWS_AS(load_attention(temp_path("attn_does_not_exist.jsonl")), IoError);
}

TEST_CASE("loader reads multiple records and keeps layers separate") {
    std::vector<float> a = {1.0f, 0.0f, 0.0f, 1.0f};
    std::vector<float> b = {0.5f, 0.5f, 0.5f, 0.5f};
    const std::string path = temp_path("attn_multi.jsonl");
    write_file(path,
               record(R"({"shape":[1,2,2],"layer":0,"sample_id":"a","kind":"cross"})", a) +
               "\n" +
               record(R"({"shape":[1,2,2],"layer":1,"sample_id":"b","kind":"cross"})", b));
    std::vector<AttentionMap> maps = load_attention(path);
    REQUIRE(maps.size() == 2);
    CHECK(maps[0].layer == 0);
    CHECK(maps[1].layer == 1);
    CHECK(maps[0].scores(0, 0) == 1.0);
    CHECK(maps[1].scores(0, 0) == 0.5);
}

TEST_CASE("batch average pads with zeros and skips renormalization") {
    AttentionMap small;
    small.scores = Eigen::MatrixXd::Constant(1, 2, 0.5);
    AttentionMap large;
    large.scores = Eigen::MatrixXd::Constant(2, 4, 0.25);
    AttentionMap avg = average_heatmap({small, large});
    CHECK(avg.batch_averaged);
    CHECK(avg.out_len() == 2);
    CHECK(avg.in_len() == 4);
    CHECK(avg.scores(0, 0) == doctest::Approx(0.375));
    CHECK(avg.scores(0, 3) == doctest::Approx(0.125));
    CHECK(avg.scores(1, 1) == doctest::Approx(0.125));
    CHECK(avg.scores.row(0).sum() == doctest::Approx(1.0));
    CHECK(avg.scores.row(1).sum() == doctest::Approx(0.5));
}

TEST_CASE("batch average truncates at the cap") {
    AttentionMap helper = uniform_map(4, 6);
    AttentionMap avg = average_heatmap({helper, helper}, 3);
    CHECK(avg.out_len() == 3);
    CHECK(avg.in_len() == 3);
    CHECK(avg.scores(0, 0) == doctest::Approx(1.0 / 6.0));
    CHECK_THROWS_AS(average_heatmap({}), ValidationError);
}

TEST_CASE("row entropy of uniform, one-hot, and two-point rows") {
    AttentionMap map;
    map.scores = Eigen::MatrixXd::Zero(3, 4);
    map.scores.row(0).setConstant(0.25);
    map.scores(1, 2) = 1.0;
    map.scores(2, 0) = 0.5;
    map.scores(2, 3) = 0.5;
    std::vector<double> h = row_entropy(map);
    CHECK(h[0] == doctest::Approx(std::log(4.0)).epsilon(1e-12));
    CHECK(h[1] == 0.0);
    CHECK(h[2] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("density score normalizes entropy and measures top-5 mass") {
    AttentionMap uniform = uniform_map(3, 8);
    DensityProfile p = density_score(uniform);
    CHECK(p.normalized_entropy_mean == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(p.top5_mass_mean == doctest::Approx(5.0 / 8.0).epsilon(1e-12));

    AttentionMap onehot;
    onehot.scores = Eigen::MatrixXd::Zero(2, 8);
    onehot.scores(0, 3) = 1.0;
    onehot.scores(1, 5) = 1.0;
    DensityProfile q = density_score(onehot);
    CHECK(q.normalized_entropy_mean == 0.0);
    CHECK(q.top5_mass_mean == 1.0);

    AttentionMap narrow = uniform_map(1, 3);
    CHECK(density_score(narrow).top5_mass_mean == doctest::Approx(1.0));

    AttentionMap degenerate = uniform_map(1, 1);
    CHECK_THROWS_AS(density_score(degenerate), ValidationError);
}

TEST_CASE("dense and peaked maps separate by normalized entropy") {
    const std::size_t n = 16;
    AttentionMap dense = uniform_map(6, n);
    AttentionMap peaked;
    peaked.scores = Eigen::MatrixXd::Constant(6, n, 0.1 / static_cast<double>(n - 1));
    for (Eigen::Index r = 0; r < 6; ++r) {
        peaked.scores(r, r % static_cast<Eigen::Index>(n)) = 0.9;
    }
    double gap = density_score(dense).normalized_entropy_mean -
                 density_score(peaked).normalized_entropy_mean;
    CHECK(gap >= 0.3);
}

TEST_CASE("heatmap csv export writes one row per line") {
    AttentionMap map;
    map.scores = Eigen::MatrixXd::Zero(2, 3);
    map.scores << 0.5, 0.25, 0.25, 0.0, 1.0, 0.0;
    const std::string path = temp_path("attn_heatmap.csv");
    save_heatmap_csv(map, path);
    std::ifstream in(path);
    std::string line;
    REQUIRE(std::getline(in, line));
    CHECK(line == "0.5,0.25,0.25");
    REQUIRE(std::getline(in, line));
    CHECK(line == "0,1,0");
    CHECK_FALSE(std::getline(in, line));
    CHECK_THROWS_AS(save_heatmap_csv(map, "/nonexistent-dir/x.csv"), IoError);
}
