#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cfi/core.hpp"

namespace cfi {

enum class ColumnKind { continuous, categorical };

struct ColumnSchema {
  std::string name;
  ColumnKind kind = ColumnKind::continuous;
  std::vector<std::string> levels;  // categorical only, ordered, duplicate-free

  bool is_categorical() const { return kind == ColumnKind::categorical; }
  std::size_t n_levels() const { return levels.size(); }

  std::size_t level_index(const std::string& label) const {
    for (std::size_t i = 0; i < levels.size(); ++i) {
      if (levels[i] == label) return i;
    }
    throw DataError("unknown level '" + label + "' for column '" + name + "'");
  }
};

inline void validate_schema(const std::vector<ColumnSchema>& schema) {
  std::unordered_set<std::string> names;
  for (const auto& col : schema) {
    if (!names.insert(col.name).second) throw DataError("duplicate column name '" + col.name + "'");
    if (col.is_categorical()) {
      if (col.levels.empty()) throw DataError("column '" + col.name + "' has no levels");
      std::unordered_set<std::string> seen;
      for (const auto& l : col.levels) {
        if (!seen.insert(l).second)
          throw DataError("column '" + col.name + "' has duplicate level '" + l + "'");
      }
    } else if (!col.levels.empty()) {
      throw DataError("continuous column '" + col.name + "' must not declare levels");
    }
  }
}

struct TargetColumn {
  std::string name;
  bool binary = false;  // {0, 1} valued
  std::vector<double> values;
};

// Mixed-type feature matrix, column-major. Categorical cells hold level
// indices. Immutable after construction; mutators return copies.
class Dataset {
 public:
  Dataset() = default;

  Dataset(std::vector<ColumnSchema> schema, std::vector<std::vector<double>> columns,
          std::optional<TargetColumn> target = std::nullopt)
      : schema_(std::move(schema)), columns_(std::move(columns)), target_(std::move(target)) {
    validate_schema(schema_);
    if (columns_.size() != schema_.size()) throw DataError("dataset: schema/column count mismatch");
    const std::size_t n = columns_.empty() ? (target_ ? target_->values.size() : 0)
                                           : columns_.front().size();
    for (std::size_t j = 0; j < columns_.size(); ++j) {
      if (columns_[j].size() != n) throw DataError("dataset: ragged columns");
      if (schema_[j].is_categorical()) {
        const double c = static_cast<double>(schema_[j].n_levels());
        for (std::size_t i = 0; i < n; ++i) {
          const double v = columns_[j][i];
          if (!(v >= 0.0) || v >= c || v != std::floor(v))
            throw DataError("dataset: level index out of range in column '" + schema_[j].name + "'");
        }
      }
    }
    if (target_ && target_->values.size() != n) throw DataError("dataset: target length mismatch");
    n_rows_ = n;
  }

  std::size_t n_rows() const { return n_rows_; }
  std::size_t n_features() const { return schema_.size(); }

  const std::vector<ColumnSchema>& schema() const { return schema_; }
  const ColumnSchema& schema(std::size_t j) const { return schema_.at(j); }
  const std::vector<double>& column(std::size_t j) const { return columns_.at(j); }

  std::size_t column_index(const std::string& name) const {
    for (std::size_t j = 0; j < schema_.size(); ++j) {
      if (schema_[j].name == name) return j;
    }
    throw DataError("no such column '" + name + "'");
  }

  bool has_column(const std::string& name) const {
    for (const auto& col : schema_) {
      if (col.name == name) return true;
    }
    return false;
  }

  bool has_target() const { return target_.has_value(); }
  const TargetColumn& target() const {
    if (!target_) throw DataError("dataset has no target column");
    return *target_;
  }

  Dataset features_only() const { return Dataset(schema_, columns_); }

  Dataset with_target(TargetColumn t) const { return Dataset(schema_, columns_, std::move(t)); }

  Dataset with_replaced_columns(const std::map<std::string, std::vector<double>>& repl) const {
    auto cols = columns_;
    for (const auto& [name, values] : repl) {
      const std::size_t j = column_index(name);
      if (values.size() != n_rows_) throw DataError("replacement column length mismatch");
      cols[j] = values;
    }
    return Dataset(schema_, std::move(cols), target_);
  }

  Dataset drop_columns(const std::vector<std::string>& names) const {
    std::unordered_set<std::string> drop(names.begin(), names.end());
    for (const auto& nm : names) column_index(nm);  // existence check
    std::vector<ColumnSchema> schema;
    std::vector<std::vector<double>> cols;
    for (std::size_t j = 0; j < schema_.size(); ++j) {
      if (!drop.count(schema_[j].name)) {
        schema.push_back(schema_[j]);
        cols.push_back(columns_[j]);
      }
    }
    return Dataset(std::move(schema), std::move(cols), target_);
  }

  Dataset subset_rows(const std::vector<std::size_t>& rows) const {
    std::vector<std::vector<double>> cols(columns_.size());
    for (std::size_t j = 0; j < columns_.size(); ++j) {
      cols[j].reserve(rows.size());
      for (std::size_t i : rows) cols[j].push_back(columns_[j].at(i));
    }
    std::optional<TargetColumn> t;
    if (target_) {
      TargetColumn tc{target_->name, target_->binary, {}};
      tc.values.reserve(rows.size());
      for (std::size_t i : rows) tc.values.push_back(target_->values.at(i));
      t = std::move(tc);
    }
    return Dataset(schema_, std::move(cols), std::move(t));
  }

  // FNV-1a over names, kinds and level vocabularies
  std::uint64_t schema_fingerprint() const {
    std::uint64_t h = 1469598103934665603ULL;
    auto feed = [&h](const std::string& s) {
      for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
      }
      h ^= 0xff;
      h *= 1099511628211ULL;
    };
    for (const auto& col : schema_) {
      feed(col.name);
      feed(col.is_categorical() ? "cat" : "num");
      for (const auto& l : col.levels) feed(l);
    }
    return h;
  }

 private:
  std::vector<ColumnSchema> schema_;
  std::vector<std::vector<double>> columns_;
  std::optional<TargetColumn> target_;
  std::size_t n_rows_ = 0;
};

struct EncodedGroup {
  std::string column;  // source column name
  std::size_t offset = 0;
  std::size_t width = 0;
  bool categorical = false;
};

// Feature matrix after full one-hot expansion (no reference level dropped).
struct EncodedMatrix {
  Eigen::MatrixXd values;  // n x q
  std::vector<EncodedGroup> groups;

  const EncodedGroup& group_of(const std::string& column) const {
    for (const auto& g : groups) {
      if (g.column == column) return g;
    }
    throw DataError("no encoded group for column '" + column + "'");
  }
};

inline EncodedMatrix one_hot_encode(const Dataset& ds) {
  const std::size_t n = ds.n_rows();
  std::size_t q = 0;
  std::vector<EncodedGroup> groups;
  groups.reserve(ds.n_features());
  for (std::size_t j = 0; j < ds.n_features(); ++j) {
    const auto& col = ds.schema(j);
    const std::size_t width = col.is_categorical() ? col.n_levels() : 1;
    groups.push_back({col.name, q, width, col.is_categorical()});
    q += width;
  }
  Eigen::MatrixXd values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                                 static_cast<Eigen::Index>(q));
  for (std::size_t j = 0; j < ds.n_features(); ++j) {
    const auto& g = groups[j];
    const auto& column = ds.column(j);
    if (g.categorical) {
      for (std::size_t i = 0; i < n; ++i) {
        values(static_cast<Eigen::Index>(i),
               static_cast<Eigen::Index>(g.offset + static_cast<std::size_t>(column[i]))) = 1.0;
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(g.offset)) = column[i];
      }
    }
  }
  return {std::move(values), std::move(groups)};
}

// Name used for an indicator column of a categorical level.
inline std::string encoded_column_name(const std::string& column, const std::string& level) {
  return column + "=" + level;
}

// All-continuous view of a dataset's one-hot encoding; the target carries over.
// Used by pipelines whose samplers and models operate on dummy-encoded data.
inline Dataset to_encoded_dataset(const Dataset& ds) {
  const EncodedMatrix enc = one_hot_encode(ds);
  std::vector<ColumnSchema> schema;
  std::vector<std::vector<double>> cols;
  for (std::size_t j = 0; j < ds.n_features(); ++j) {
    const auto& src = ds.schema(j);
    const auto& g = enc.groups[j];
    for (std::size_t k = 0; k < g.width; ++k) {
      const std::string name =
          g.categorical ? encoded_column_name(src.name, src.levels[k]) : src.name;
      schema.push_back({name, ColumnKind::continuous, {}});
      std::vector<double> v(ds.n_rows());
      for (std::size_t i = 0; i < ds.n_rows(); ++i) {
        v[i] = enc.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(g.offset + k));
      }
      cols.push_back(std::move(v));
    }
  }
  std::optional<TargetColumn> target;
  if (ds.has_target()) target = ds.target();
  return Dataset(std::move(schema), std::move(cols), std::move(target));
}

// Map original column -> encoded column names (singleton for continuous).
inline std::vector<std::pair<std::string, std::vector<std::string>>> encoded_name_groups(
    const Dataset& ds) {
  std::vector<std::pair<std::string, std::vector<std::string>>> out;
  for (const auto& col : ds.schema()) {
    std::vector<std::string> names;
    if (col.is_categorical()) {
      for (const auto& l : col.levels) names.push_back(encoded_column_name(col.name, l));
    } else {
      names.push_back(col.name);
    }
    out.emplace_back(col.name, std::move(names));
  }
  return out;
}

namespace detail {

// RFC-4180 record reader: quoted fields, "" escapes, CR LF line ends.
// Lines starting with '#' before the header are treated as metadata and skipped.
inline bool read_csv_record(std::istream& in, std::vector<std::string>& fields) {
  fields.clear();
  std::string field;
  bool in_quotes = false;
  bool any = false;
  int ch;
  while ((ch = in.get()) != EOF) {
    any = true;
    const char c = static_cast<char>(ch);
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          field.push_back('"');
          in.get();
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      fields.push_back(field);
      field.clear();
    } else if (c == '\r') {
      if (in.peek() == '\n') in.get();
      fields.push_back(field);
      return true;
    } else if (c == '\n') {
      fields.push_back(field);
      return true;
    } else {
      field.push_back(c);
    }
  }
  if (!any) return false;
  fields.push_back(field);
  return true;
}

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline double parse_numeric_cell(const std::string& raw, std::size_t row, const std::string& col) {
  const std::string s = trim(raw);
  if (s.empty())
    throw DataError("missing value at row " + std::to_string(row) + ", column '" + col + "'");
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || !std::isfinite(v))
    throw DataError("cannot parse '" + s + "' as numeric at row " + std::to_string(row) +
                    ", column '" + col + "'");
  return v;
}

}  // namespace detail

// Reads a CSV with a header row against a declared schema. Every schema column
// and the target column must be present; extra columns are ignored. Rows are
// 1-based in error messages (header not counted).
inline Dataset read_csv(const std::string& path, const std::vector<ColumnSchema>& schema,
                        const std::string& target_name = "") {
  validate_schema(schema);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file '" + path + "'");

  std::vector<std::string> header;
  for (;;) {
    if (!detail::read_csv_record(in, header)) throw DataError("empty CSV file '" + path + "'");
    if (!header.empty() && !header.front().empty() && header.front().front() == '#') continue;
    break;
  }
  std::unordered_map<std::string, std::size_t> col_pos;
  for (std::size_t i = 0; i < header.size(); ++i) col_pos.emplace(detail::trim(header[i]), i);

  std::vector<std::size_t> positions;
  for (const auto& col : schema) {
    auto it = col_pos.find(col.name);
    if (it == col_pos.end()) throw DataError("column '" + col.name + "' missing from CSV header");
    positions.push_back(it->second);
  }
  std::size_t target_pos = 0;
  const bool want_target = !target_name.empty();
  if (want_target) {
    auto it = col_pos.find(target_name);
    if (it == col_pos.end())
      throw DataError("target column '" + target_name + "' missing from CSV header");
    target_pos = it->second;
  }

  std::vector<std::vector<double>> columns(schema.size());
  std::vector<double> target_values;
  std::vector<std::string> fields;
  std::size_t row = 0;
  while (detail::read_csv_record(in, fields)) {
    if (fields.size() == 1 && detail::trim(fields[0]).empty()) continue;  // trailing blank line
    ++row;
    for (std::size_t j = 0; j < schema.size(); ++j) {
      if (positions[j] >= fields.size())
        throw DataError("row " + std::to_string(row) + " has too few fields");
      const std::string& raw = fields[positions[j]];
      if (schema[j].is_categorical()) {
        const std::string label = detail::trim(raw);
        if (label.empty())
          throw DataError("missing value at row " + std::to_string(row) + ", column '" +
                          schema[j].name + "'");
        columns[j].push_back(static_cast<double>(schema[j].level_index(label)));
      } else {
        columns[j].push_back(detail::parse_numeric_cell(raw, row, schema[j].name));
      }
    }
    if (want_target) {
      if (target_pos >= fields.size())
        throw DataError("row " + std::to_string(row) + " has too few fields");
      target_values.push_back(detail::parse_numeric_cell(fields[target_pos], row, target_name));
    }
  }

  std::optional<TargetColumn> target;
  if (want_target) {
    const bool binary = std::all_of(target_values.begin(), target_values.end(),
                                    [](double v) { return v == 0.0 || v == 1.0; });
    target = TargetColumn{target_name, binary, std::move(target_values)};
  }
  return Dataset(schema, std::move(columns), std::move(target));
}

// Schema file: JSON list of {name, kind, levels?}.
inline std::vector<ColumnSchema> read_schema_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open schema file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw DataError("invalid schema JSON in '" + path + "': " + e.what());
  }
  if (!j.is_array()) throw DataError("schema JSON must be a list of column objects");
  std::vector<ColumnSchema> schema;
  for (const auto& item : j) {
    ColumnSchema col;
    col.name = item.at("name").get<std::string>();
    const std::string kind = item.at("kind").get<std::string>();
    if (kind == "continuous" || kind == "binary") {  // binary: {0,1}-valued target column
      col.kind = ColumnKind::continuous;
    } else if (kind == "categorical") {
      col.kind = ColumnKind::categorical;
      col.levels = item.at("levels").get<std::vector<std::string>>();
    } else {
      throw DataError("unknown column kind '" + kind + "'");
    }
    schema.push_back(std::move(col));
  }
  validate_schema(schema);
  return schema;
}

inline nlohmann::json schema_to_json(const std::vector<ColumnSchema>& schema) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& col : schema) {
    nlohmann::json item{{"name", col.name},
                        {"kind", col.is_categorical() ? "categorical" : "continuous"}};
    if (col.is_categorical()) item["levels"] = col.levels;
    j.push_back(std::move(item));
  }
  return j;
}

// Disjoint uniform-random row partition; |train| = round(fraction * n).
inline std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction, Rng& rng) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw DataError("split: train_fraction must lie strictly between 0 and 1");
  const std::size_t n = ds.n_rows();
  const auto n_train =
      static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  if (n < 2 || n_train < 1 || n_train > n - 1)
    throw DataError("split: too few rows for a non-empty train/test partition");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<std::size_t> train_idx(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test_idx(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  return {ds.subset_rows(train_idx), ds.subset_rows(test_idx)};
}

struct StandardizeResult {
  EncodedMatrix matrix;
  Eigen::VectorXd centers;  // untouched columns: 0
  Eigen::VectorXd scales;   // untouched and zero-variance columns: 1
};

// Centers selected columns to mean 0 and scales to sample sd 1. Zero-variance
// columns are centered with scale recorded as 1. With continuous_only set,
// indicator columns of categorical groups are left as-is.
inline StandardizeResult standardize(const EncodedMatrix& m, bool continuous_only = true) {
  const auto n = m.values.rows();
  const auto q = m.values.cols();
  StandardizeResult out{m, Eigen::VectorXd::Zero(q), Eigen::VectorXd::Ones(q)};
  std::vector<bool> touch(static_cast<std::size_t>(q), true);
  if (continuous_only) {
    for (const auto& g : m.groups) {
      if (g.categorical) {
        for (std::size_t k = 0; k < g.width; ++k) touch[g.offset + k] = false;
      }
    }
  }
  for (Eigen::Index j = 0; j < q; ++j) {
    if (!touch[static_cast<std::size_t>(j)]) continue;
    const double center = m.values.col(j).mean();
    double ss = (m.values.col(j).array() - center).square().sum();
    const double sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
    const double scale = sd > 0.0 ? sd : 1.0;
    out.centers(j) = center;
    out.scales(j) = scale;
    out.matrix.values.col(j) = (m.values.col(j).array() - center) / scale;
  }
  return out;
}

inline EncodedMatrix unstandardize(const StandardizeResult& s) {
  EncodedMatrix out = s.matrix;
  for (Eigen::Index j = 0; j < out.values.cols(); ++j) {
    out.values.col(j) = out.values.col(j).array() * s.scales(j) + s.centers(j);
  }
  return out;
}

}  // namespace cfi
