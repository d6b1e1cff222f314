#pragma once

// Post-hoc analyses: measurement density, nearest-neighbour pattern
// similarity, attention aggregation and their file formats.

#include "ntpp/data.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ntpp {

// d_m = (number of events carrying mark m) / t_L.
struct DensityProfile {
  std::string id;
  Vector density;
};

DensityProfile measurement_density(const EventSequence& seq);

struct KnnSimilarity {
  double value = 0.0;                 // mean CS_avg over positive records
  std::vector<std::size_t> records;   // indices of the positive records
  std::vector<double> per_record;     // their CS_avg
  std::size_t zero_norm_pairs = 0;    // pairs scored 0 for a zero density
};

// For each record with label 1: its k nearest neighbours by Euclidean
// distance in embedding space (itself excluded, ties by index), averaged
// cosine similarity of density vectors. Rows of `embeddings` and
// `densities` are records.
KnnSimilarity knn_pattern_similarity(const Matrix& embeddings,
                                     const Matrix& densities,
                                     std::span<const int> labels, int k = 10);

// Attention of one record: A (L x L, query rows), its visibility mask and the
// L x M mark matrix.
struct AttentionRecord {
  std::string id;
  Matrix attention;
  BoolMatrix visible;
  Matrix marks;
};

struct InfluenceReport {
  std::string group;
  double epsilon = 1.0;
  std::size_t records = 0;
  Matrix co_occurrence;  // C_agg, M x M; row = query mark, column = key mark
  Matrix influence;      // I_agg, NaN where C_agg == 0
};

inline constexpr double kDefaultInfluenceThreshold = 1.0;

// Rescales each attention row by its count of visible keys; C marks A > 0,
// I marks rescaled A > epsilon. For every query j and visible key k with
// marks m and n:
//   C_agg[m][n] = sum C(j, k) / N,   I_agg[m][n] = sum I(j, k) / sum C(j, k).
InfluenceReport aggregate_attention(const std::vector<AttentionRecord>& records,
                                    const std::string& group,
                                    double epsilon = kDefaultInfluenceThreshold);

// ---- files ----

// Written into every analysis file: "# fingerprint <hex> seed <n>" in text
// files, "fingerprint" and "seed" fields in JSON.
struct Provenance {
  std::string fingerprint;
  std::uint64_t seed = 0;
};

// <prefix>.json plus <prefix>_C.csv and <prefix>_I.csv (absent entries
// left empty).
void write_influence_report(const InfluenceReport& report,
                            const std::filesystem::path& prefix,
                            const Provenance& provenance);

// One row per record: id, label, e_0..e_{d-1}.
void write_embeddings(const std::filesystem::path& path,
                      const std::vector<std::string>& ids,
                      const std::vector<std::optional<int>>& labels,
                      const Matrix& embeddings, const Provenance& provenance);

struct EmbeddingTable {
  std::vector<std::string> ids;
  std::vector<std::optional<int>> labels;
  Matrix embeddings;
};
EmbeddingTable read_embeddings(const std::filesystem::path& path);

}  // namespace ntpp
