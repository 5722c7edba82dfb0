#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <set>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "subdisc/error.hpp"

namespace subdisc {

using Vector = std::vector<double>;
using Labels = std::map<std::string, std::string>;
/// attribute name -> permitted values
using Schema = std::map<std::string, std::set<std::string>>;
/// One value per evaluated attribute, in the caller's attribute order.
using CompositeLabel = std::vector<std::string>;

struct EmbeddingRecord {
  std::string id;
  Vector vector;
  Labels labels;

  friend bool operator==(const EmbeddingRecord&, const EmbeddingRecord&) = default;
};

/// Validated, immutable collection of records. Built by validate_dataset;
/// subset() keeps the invariants of its source.
class Dataset {
 public:
  std::size_t dimension() const noexcept { return dimension_; }
  std::size_t size() const noexcept { return records_.size(); }
  const std::vector<EmbeddingRecord>& records() const noexcept { return records_; }
  const EmbeddingRecord& operator[](std::size_t i) const { return records_[i]; }
  const Schema& schema() const noexcept { return schema_; }

  /// Records at `indices`, in that order, sharing this dataset's schema.
  Dataset subset(std::span<const std::size_t> indices) const {
    Dataset out;
    out.dimension_ = dimension_;
    out.schema_ = schema_;
    out.records_.reserve(indices.size());
    for (std::size_t i : indices) out.records_.push_back(records_.at(i));
    return out;
  }

  /// Row-major n x D copy of all vectors.
  std::vector<double> flat_matrix() const {
    std::vector<double> out;
    out.reserve(size() * dimension_);
    for (const auto& r : records_) out.insert(out.end(), r.vector.begin(), r.vector.end());
    return out;
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;

 private:
  friend Dataset validate_dataset(std::vector<EmbeddingRecord> records, Schema schema);

  Dataset() = default;

  std::size_t dimension_ = 0;
  std::vector<EmbeddingRecord> records_;
  Schema schema_;
};

inline Dataset validate_dataset(std::vector<EmbeddingRecord> records, Schema schema) {
  if (records.empty()) throw Error(ErrorCode::NoRecords, "dataset has no records");
  const std::size_t dim = records.front().vector.size();
  if (dim == 0) {
    throw Error(ErrorCode::DimensionMismatch, "record '" + records.front().id + "' has an empty vector");
  }
  std::unordered_set<std::string> seen;
  for (const auto& r : records) {
    if (r.id.empty()) throw Error(ErrorCode::EmptyId, "record with empty id");
    if (r.vector.size() != dim) {
      throw Error(ErrorCode::DimensionMismatch,
                  "record '" + r.id + "' has length " + std::to_string(r.vector.size()) +
                      ", expected " + std::to_string(dim));
    }
    for (std::size_t d = 0; d < dim; ++d) {
      if (!std::isfinite(r.vector[d])) {
        throw Error(ErrorCode::NonFiniteComponent,
                    "record '" + r.id + "' component " + std::to_string(d));
      }
    }
    if (!seen.insert(r.id).second) throw Error(ErrorCode::DuplicateId, "record '" + r.id + "'");
    for (const auto& [attr, value] : r.labels) {
      auto it = schema.find(attr);
      if (it == schema.end()) {
        throw Error(ErrorCode::UnknownAttribute, "'" + attr + "' on record '" + r.id + "'");
      }
      if (!it->second.contains(value)) {
        throw Error(ErrorCode::UnknownValue,
                    "'" + attr + "'='" + value + "' on record '" + r.id + "'");
      }
    }
  }
  Dataset out;
  out.dimension_ = dim;
  out.records_ = std::move(records);
  out.schema_ = std::move(schema);
  return out;
}

/// Rebuild a dataset with every vector replaced by `fn(vector)`.
template <typename Fn>
Dataset map_vectors(const Dataset& data, Fn&& fn) {
  std::vector<EmbeddingRecord> records = data.records();
  for (auto& r : records) r.vector = fn(std::as_const(r.vector));
  return validate_dataset(std::move(records), data.schema());
}

inline CompositeLabel composite_label(const EmbeddingRecord& record,
                                      std::span<const std::string> attributes) {
  CompositeLabel out;
  out.reserve(attributes.size());
  for (const auto& attr : attributes) {
    auto it = record.labels.find(attr);
    if (it == record.labels.end()) {
      throw Error(ErrorCode::MissingAttribute, "record '" + record.id + "' lacks '" + attr + "'");
    }
    out.push_back(it->second);
  }
  return out;
}

/// "dark/male/young" style display key.
inline std::string join_label(const CompositeLabel& label) {
  std::string out;
  for (std::size_t i = 0; i < label.size(); ++i) {
    if (i) out += '/';
    out += label[i];
  }
  return out;
}

}  // namespace subdisc
