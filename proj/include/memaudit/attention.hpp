#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <string>
#include <vector>

namespace memaudit {

/// One decoder-encoder attention map, head-averaged, rows renormalized to
/// sum to 1 at load time (except batch averages, where padding zeros keep
/// their meaning and `batch_averaged` is set).
struct AttentionMap {
    Eigen::MatrixXd scores;  // out_len × in_len
    std::string sample_id;
    int layer = 0;
    bool head_averaged = false;
    bool batch_averaged = false;

    std::size_t out_len() const { return static_cast<std::size_t>(scores.rows()); }
    std::size_t in_len() const { return static_cast<std::size_t>(scores.cols()); }
};

struct DensityProfile {
    std::vector<double> per_row_entropy;  // nats
    double normalized_entropy_mean = 0.0;
    double top5_mass_mean = 0.0;
};

/// Reads the tensor-exchange format (see docs/FORMATS.md): per record a JSON
/// header line {"shape":[heads,out_len,in_len],"layer":...,"sample_id":...,
/// "kind":"cross"} followed by one line of base64 little-endian float32
/// values in row-major [head][out][in] order. Heads are averaged and rows
/// renormalized; zero rows become uniform with a warning on stderr.
std::vector<AttentionMap> load_attention(const std::string& path);

/// Zero-pads every map to the batch's max dimensions (capped at max_len on
/// both axes), truncates longer maps, and averages element-wise. Rows are
/// deliberately not renormalized afterwards.
AttentionMap average_heatmap(const std::vector<AttentionMap>& maps, std::size_t max_len = 512);

/// Row entropies −Σ a·ln(a) in nats with 0·ln 0 = 0.
std::vector<double> row_entropy(const AttentionMap& map);

/// Mean row entropy normalized by ln(in_len) plus the mean mass of the five
/// largest entries per row. Requires in_len ≥ 2.
DensityProfile density_score(const AttentionMap& map);

/// CSV matrix (one row per line) for external plotting.
void save_heatmap_csv(const AttentionMap& map, const std::string& path);

namespace base64 {
std::string encode(const unsigned char* data, std::size_t size);
std::vector<unsigned char> decode(const std::string& text);
}  // namespace base64

}  // namespace memaudit
