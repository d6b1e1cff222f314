#include "ntpp/analysis.hpp"

#include "ntpp/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

namespace ntpp {

DensityProfile measurement_density(const EventSequence& seq) {
  if (seq.empty() || !(seq.times.back() > 0.0)) {
    throw AnalysisError("measurement density undefined for record '" + seq.id +
                        "': final timestamp must be positive");
  }
  DensityProfile out{seq.id, Vector::Zero(seq.num_marks())};
  for (const auto& mark : seq.marks) {
    for (std::size_t m = 0; m < mark.size(); ++m) {
      if (mark[m]) out.density(static_cast<Eigen::Index>(m)) += 1.0;
    }
  }
  out.density /= seq.times.back();
  return out;
}

KnnSimilarity knn_pattern_similarity(const Matrix& embeddings,
                                     const Matrix& densities,
                                     std::span<const int> labels, int k) {
  const Eigen::Index n = embeddings.rows();
  if (densities.rows() != n || static_cast<Eigen::Index>(labels.size()) != n) {
    throw AnalysisError("knn: embeddings, densities and labels must align");
  }
  if (k < 1 || n < k + 1) {
    throw AnalysisError("knn: need at least k + 1 records (k = " +
                        std::to_string(k) + ", n = " + std::to_string(n) + ")");
  }
  const Vector norms = densities.rowwise().norm();
  KnnSimilarity out;
  std::vector<std::pair<double, Eigen::Index>> dist(static_cast<std::size_t>(n - 1));
  for (Eigen::Index i = 0; i < n; ++i) {
    if (labels[static_cast<std::size_t>(i)] != 1) continue;
    std::size_t c = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      dist[c++] = {(embeddings.row(i) - embeddings.row(j)).squaredNorm(), j};
    }
    std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
    double acc = 0.0;
    for (int r = 0; r < k; ++r) {
      const Eigen::Index j = dist[static_cast<std::size_t>(r)].second;
      if (norms(i) == 0.0 || norms(j) == 0.0) {
        ++out.zero_norm_pairs;
        continue;
      }
      acc += densities.row(i).dot(densities.row(j)) / (norms(i) * norms(j));
    }
    out.records.push_back(static_cast<std::size_t>(i));
    out.per_record.push_back(acc / k);
  }
  if (out.records.empty()) throw AnalysisError("knn: no positive records");
  out.value = std::accumulate(out.per_record.begin(), out.per_record.end(), 0.0) /
              static_cast<double>(out.per_record.size());
  return out;
}

InfluenceReport aggregate_attention(const std::vector<AttentionRecord>& records,
                                    const std::string& group, double epsilon) {
  if (records.empty()) {
    throw AnalysisError("aggregate: group '" + group + "' has no records");
  }
  if (!(epsilon > 0.0)) throw AnalysisError("aggregate: epsilon must be positive");
  const Eigen::Index marks = records.front().marks.cols();
  Matrix c_sum = Matrix::Zero(marks, marks);
  Matrix i_sum = Matrix::Zero(marks, marks);
  for (const AttentionRecord& rec : records) {
    const Eigen::Index length = rec.attention.rows();
    if (rec.attention.cols() != length || rec.visible.rows() != length ||
        rec.visible.cols() != length || rec.marks.rows() != length ||
        rec.marks.cols() != marks) {
      throw AnalysisError("aggregate: record '" + rec.id + "' has inconsistent shapes");
    }
    for (Eigen::Index j = 0; j < length; ++j) {
      const Eigen::Index keys = rec.visible.row(j).count();
      if (keys == 0) continue;
      for (Eigen::Index k = 0; k < length; ++k) {
        if (!rec.visible(j, k)) continue;
        const double a = rec.attention(j, k);
        if (!(a > 0.0)) continue;
        const bool significant = a * static_cast<double>(keys) > epsilon;
        for (Eigen::Index m = 0; m < marks; ++m) {
          if (rec.marks(j, m) == 0.0) continue;
          for (Eigen::Index q = 0; q < marks; ++q) {
            if (rec.marks(k, q) == 0.0) continue;
            c_sum(m, q) += 1.0;
            if (significant) i_sum(m, q) += 1.0;
          }
        }
      }
    }
  }
  InfluenceReport report;
  report.group = group;
  report.epsilon = epsilon;
  report.records = records.size();
  report.co_occurrence = c_sum / static_cast<double>(records.size());
  report.influence = Matrix::Constant(marks, marks,
                                      std::numeric_limits<double>::quiet_NaN());
  for (Eigen::Index m = 0; m < marks; ++m) {
    for (Eigen::Index q = 0; q < marks; ++q) {
      if (c_sum(m, q) > 0.0) report.influence(m, q) = i_sum(m, q) / c_sum(m, q);
    }
  }
  return report;
}

namespace {

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << std::setprecision(17);
  return out;
}

void write_provenance(std::ostream& out, const Provenance& p) {
  out << "# fingerprint " << p.fingerprint << " seed " << p.seed << "\n";
}

void write_matrix_csv(const std::filesystem::path& path, const Matrix& m,
                      const Provenance& provenance) {
  std::ofstream out = open_output(path);
  write_provenance(out, provenance);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c > 0) out << ',';
      if (!std::isnan(m(r, c))) out << m(r, c);
    }
    out << '\n';
  }
}

}  // namespace

void write_influence_report(const InfluenceReport& report,
                            const std::filesystem::path& prefix,
                            const Provenance& provenance) {
  nlohmann::ordered_json j;
  j["fingerprint"] = provenance.fingerprint;
  j["seed"] = provenance.seed;
  j["group"] = report.group;
  j["epsilon"] = report.epsilon;
  j["records"] = report.records;
  auto rows = [](const Matrix& m) {
    nlohmann::ordered_json out = nlohmann::ordered_json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      nlohmann::ordered_json row = nlohmann::ordered_json::array();
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        if (std::isnan(m(r, c))) {
          row.push_back(nullptr);
        } else {
          row.push_back(m(r, c));
        }
      }
      out.push_back(row);
    }
    return out;
  };
  j["C_agg"] = rows(report.co_occurrence);
  j["I_agg"] = rows(report.influence);
  {
    std::ofstream out = open_output(prefix.string() + ".json");
    out << j.dump(2) << '\n';
  }
  write_matrix_csv(prefix.string() + "_C.csv", report.co_occurrence, provenance);
  write_matrix_csv(prefix.string() + "_I.csv", report.influence, provenance);
}

void write_embeddings(const std::filesystem::path& path,
                      const std::vector<std::string>& ids,
                      const std::vector<std::optional<int>>& labels,
                      const Matrix& embeddings, const Provenance& provenance) {
  if (ids.size() != labels.size() ||
      static_cast<Eigen::Index>(ids.size()) != embeddings.rows()) {
    throw AnalysisError("embedding export: ids, labels and rows must align");
  }
  std::ofstream out = open_output(path);
  write_provenance(out, provenance);
  out << "id\tlabel";
  for (Eigen::Index c = 0; c < embeddings.cols(); ++c) out << "\te" << c;
  out << '\n';
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out << ids[i] << '\t';
    if (labels[i]) out << *labels[i];
    for (Eigen::Index c = 0; c < embeddings.cols(); ++c) {
      out << '\t' << embeddings(static_cast<Eigen::Index>(i), c);
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

EmbeddingTable read_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  EmbeddingTable table;
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, '\t')) fields.push_back(field);
    if (!line.empty() && line.back() == '\t') fields.emplace_back();
    if (!header_seen) {
      header_seen = true;
      if (fields.size() < 2 || fields[0] != "id") {
        throw FormatError(path.string() + ":" + std::to_string(line_no) +
                          ": expected header 'id<TAB>label<TAB>e0...'");
      }
      width = fields.size() - 2;
      continue;
    }
    if (fields.size() != width + 2) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) +
                        ": expected " + std::to_string(width + 2) + " fields");
    }
    table.ids.push_back(fields[0]);
    try {
      table.labels.push_back(fields[1].empty() ? std::nullopt
                                               : std::optional<int>(std::stoi(fields[1])));
      std::vector<double> row;
      for (std::size_t c = 0; c < width; ++c) row.push_back(std::stod(fields[c + 2]));
      rows.push_back(std::move(row));
    } catch (const std::exception&) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) +
                        ": non-numeric field");
    }
  }
  table.embeddings.resize(static_cast<Eigen::Index>(rows.size()),
                          static_cast<Eigen::Index>(width));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      table.embeddings(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          rows[r][c];
    }
  }
  return table;
}

}  // namespace ntpp
