#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "subdisc/dataset.hpp"
#include "subdisc/error.hpp"
#include "subdisc/random.hpp"

namespace subdisc {

struct AttributeSpec {
  std::string name;
  double offset_magnitude = 1.0;
  /// unit vector of length D; empty means "random-orthogonal"
  Vector direction;
  /// value emitted for the -offset side and the +offset side
  std::pair<std::string, std::string> values{"0", "1"};
};

/// Binary attributes laid along (near-)orthogonal directions with strictly
/// decreasing offsets: the first attribute dominates the geometry.
struct HierarchySpec {
  std::size_t dimension = 16;
  std::vector<AttributeSpec> attributes;
  double noise_sigma = 0.05;
  std::size_t samples_per_cell = 25;
  std::uint64_t rng_seed = 1;
};

/// D=16; skin_tone (8) > gender (2) > age (0.5); sigma 0.05; 25 per cell.
inline HierarchySpec default_hierarchy_spec() {
  HierarchySpec spec;
  spec.attributes = {
      {"skin_tone", 8.0, {}, {"dark", "pale"}},
      {"gender", 2.0, {}, {"female", "male"}},
      {"age", 0.5, {}, {"old", "young"}},
  };
  return spec;
}

/// sigma below a quarter of the smallest offset keeps cells separable.
inline bool is_separable(const HierarchySpec& spec) {
  if (spec.attributes.empty()) return false;
  return spec.noise_sigma < spec.attributes.back().offset_magnitude / 4.0;
}

inline void validate(const HierarchySpec& spec) {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidSpec, msg); };
  if (spec.dimension == 0) fail("dimension must be positive");
  if (spec.attributes.empty()) fail("at least one attribute is required");
  if (spec.attributes.size() > spec.dimension) fail("more attributes than dimensions");
  if (spec.attributes.size() > 20) fail("at most 20 attributes");
  if (!(spec.noise_sigma > 0.0) || !std::isfinite(spec.noise_sigma)) fail("noise_sigma must be positive");
  if (spec.samples_per_cell == 0) fail("samples_per_cell must be positive");
  std::set<std::string> names;
  for (std::size_t a = 0; a < spec.attributes.size(); ++a) {
    const auto& attr = spec.attributes[a];
    if (attr.name.empty() || !names.insert(attr.name).second) fail("attribute names must be unique and non-empty");
    if (attr.values.first == attr.values.second) fail("attribute '" + attr.name + "' needs two distinct values");
    if (!(attr.offset_magnitude > 0.0) || !std::isfinite(attr.offset_magnitude)) {
      fail("offset of '" + attr.name + "' must be positive");
    }
    if (a > 0 && !(attr.offset_magnitude < spec.attributes[a - 1].offset_magnitude)) {
      fail("offsets must be strictly decreasing ('" + attr.name + "')");
    }
    if (!attr.direction.empty()) {
      if (attr.direction.size() != spec.dimension) fail("direction of '" + attr.name + "' has wrong length");
      double norm2 = 0.0;
      for (double v : attr.direction) norm2 += v * v;
      if (std::abs(std::sqrt(norm2) - 1.0) > 1e-9) fail("direction of '" + attr.name + "' is not unit length");
    }
  }
}

/// Generator output together with the ground truth it was drawn from.
struct GeneratedHierarchy {
  Dataset data;
  std::vector<Vector> directions;
  /// indexed by cell; attribute 0 is the most significant bit
  std::vector<Vector> cell_means;
  std::vector<CompositeLabel> cell_labels;
};

namespace detail {

inline void orthonormalize_against(Vector& v, const std::vector<Vector>& basis) {
  // two passes of modified Gram-Schmidt
  for (int pass = 0; pass < 2; ++pass) {
    for (const auto& b : basis) {
      double dot = 0.0;
      for (std::size_t d = 0; d < v.size(); ++d) dot += v[d] * b[d];
      for (std::size_t d = 0; d < v.size(); ++d) v[d] -= dot * b[d];
    }
  }
}

}  // namespace detail

inline GeneratedHierarchy generate_with_truth(const HierarchySpec& spec) {
  validate(spec);
  const std::size_t dim = spec.dimension;
  const std::size_t m = spec.attributes.size();
  Rng rng(spec.rng_seed);

  std::vector<Vector> directions(m);
  std::vector<Vector> fixed;
  for (const auto& attr : spec.attributes) {
    if (!attr.direction.empty()) fixed.push_back(attr.direction);
  }
  for (std::size_t a = 0; a < m; ++a) {
    if (!spec.attributes[a].direction.empty()) {
      directions[a] = spec.attributes[a].direction;
      continue;
    }
    while (true) {
      Vector v(dim);
      for (auto& x : v) x = standard_normal(rng);
      detail::orthonormalize_against(v, fixed);
      double norm2 = 0.0;
      for (double x : v) norm2 += x * x;
      if (norm2 < 1e-6) continue;
      const double inv = 1.0 / std::sqrt(norm2);
      for (auto& x : v) x *= inv;
      directions[a] = v;
      fixed.push_back(std::move(v));
      break;
    }
  }

  Schema schema;
  for (const auto& attr : spec.attributes) schema[attr.name] = {attr.values.first, attr.values.second};

  const std::size_t cells = std::size_t{1} << m;
  std::vector<Vector> cell_means;
  std::vector<CompositeLabel> cell_labels;
  std::vector<EmbeddingRecord> records;
  records.reserve(cells * spec.samples_per_cell);
  for (std::size_t cell = 0; cell < cells; ++cell) {
    Vector mean(dim, 0.0);
    CompositeLabel label;
    Labels labels;
    for (std::size_t a = 0; a < m; ++a) {
      const bool high = (cell >> (m - 1 - a)) & 1U;
      const auto& attr = spec.attributes[a];
      const double sign = high ? 1.0 : -1.0;
      for (std::size_t d = 0; d < dim; ++d) mean[d] += sign * attr.offset_magnitude * directions[a][d];
      label.push_back(high ? attr.values.second : attr.values.first);
      labels[attr.name] = label.back();
    }
    for (std::size_t j = 0; j < spec.samples_per_cell; ++j) {
      EmbeddingRecord r;
      char id[32];
      std::snprintf(id, sizeof id, "r%06zu", records.size());
      r.id = id;
      r.vector.resize(dim);
      for (std::size_t d = 0; d < dim; ++d) r.vector[d] = mean[d] + spec.noise_sigma * standard_normal(rng);
      r.labels = labels;
      records.push_back(std::move(r));
    }
    cell_means.push_back(std::move(mean));
    cell_labels.push_back(std::move(label));
  }
  return {validate_dataset(std::move(records), std::move(schema)), std::move(directions), std::move(cell_means),
          std::move(cell_labels)};
}

/// 2^|attributes| cells of `samples_per_cell` records each, cell by cell.
inline Dataset generate(const HierarchySpec& spec) { return generate_with_truth(spec).data; }

}  // namespace subdisc
