#pragma once

// JSON file formats:
//   dataset     JSON lines; line 1 {"dimension": D, "schema": {attr: [values]}},
//               then one {"id", "vector", "labels"} object per line.
//   classifier  one document, {"format": "subdisc-classifier", "version": 1, ...}
//   run report  one document holding per-run alignment reports, averages and
//               an optional hierarchy report.
// Doubles are written in shortest round-trip form, so every file re-parses
// to bit-identical values.

#include <cstddef>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "subdisc/alignment.hpp"
#include "subdisc/classifier.hpp"
#include "subdisc/dataset.hpp"
#include "subdisc/distance.hpp"
#include "subdisc/error.hpp"
#include "subdisc/hierarchy.hpp"

namespace subdisc {

using json = nlohmann::json;

inline constexpr std::string_view kClassifierFormat = "subdisc-classifier";
inline constexpr int kClassifierVersion = 1;

// ---------------------------------------------------------------------------
// Report types

inline void to_json(json& j, const AlignmentReport& r) {
  std::vector<std::string> names;
  for (const auto& c : r.classes) names.push_back(join_label(c));
  j = json{{"attributes", r.attributes},
           {"classes", r.classes},
           {"class_names", names},
           {"mapping", r.mapping},
           {"confusion", r.confusion},
           {"per_class_accuracy", r.per_class_accuracy},
           {"overall_accuracy", r.overall_accuracy},
           {"attribute_accuracy", r.attribute_accuracy},
           {"value_accuracy", r.value_accuracy},
           {"record_count", r.record_count}};
}

inline void from_json(const json& j, AlignmentReport& r) {
  j.at("attributes").get_to(r.attributes);
  j.at("classes").get_to(r.classes);
  j.at("mapping").get_to(r.mapping);
  j.at("confusion").get_to(r.confusion);
  j.at("per_class_accuracy").get_to(r.per_class_accuracy);
  j.at("overall_accuracy").get_to(r.overall_accuracy);
  j.at("attribute_accuracy").get_to(r.attribute_accuracy);
  j.at("value_accuracy").get_to(r.value_accuracy);
  j.at("record_count").get_to(r.record_count);
}

inline void to_json(json& j, const AveragedAccuracy& a) {
  j = json{{"runs", a.runs},
           {"per_class", a.per_class},
           {"overall", a.overall},
           {"attribute", a.attribute},
           {"value", a.value}};
}

inline void from_json(const json& j, AveragedAccuracy& a) {
  j.at("runs").get_to(a.runs);
  j.at("per_class").get_to(a.per_class);
  j.at("overall").get_to(a.overall);
  j.at("attribute").get_to(a.attribute);
  j.at("value").get_to(a.value);
}

inline void to_json(json& j, const SubsetScore& s) {
  j = json{{"attributes", s.attributes}, {"mean_accuracy", s.mean_accuracy}};
}

inline void from_json(const json& j, SubsetScore& s) {
  j.at("attributes").get_to(s.attributes);
  j.at("mean_accuracy").get_to(s.mean_accuracy);
}

inline void to_json(json& j, const HierarchyLevel& l) {
  j = json{{"cluster_count", l.cluster_count},
           {"resolved", l.resolved},
           {"overall_accuracy", l.overall_accuracy},
           {"attribute_accuracies", l.attribute_accuracies},
           {"value_accuracies", l.value_accuracies},
           {"run_accuracies", l.run_accuracies},
           {"subsets", l.subsets}};
}

inline void from_json(const json& j, HierarchyLevel& l) {
  j.at("cluster_count").get_to(l.cluster_count);
  j.at("resolved").get_to(l.resolved);
  j.at("overall_accuracy").get_to(l.overall_accuracy);
  j.at("attribute_accuracies").get_to(l.attribute_accuracies);
  j.at("value_accuracies").get_to(l.value_accuracies);
  j.at("run_accuracies").get_to(l.run_accuracies);
  j.at("subsets").get_to(l.subsets);
}

inline void to_json(json& j, const HierarchyReport& h) {
  j = json{{"levels", h.levels}, {"dominance_order", h.dominance_order}};
}

inline void from_json(const json& j, HierarchyReport& h) {
  j.at("levels").get_to(h.levels);
  j.at("dominance_order").get_to(h.dominance_order);
}

struct RunReport {
  std::vector<std::string> command;
  json config = json::object();
  std::vector<AlignmentReport> runs;
  std::optional<AveragedAccuracy> average;
  std::optional<HierarchyReport> hierarchy;
  std::optional<double> duration_seconds;

  friend bool operator==(const RunReport&, const RunReport&) = default;
};

inline void to_json(json& j, const RunReport& r) {
  j = json{{"command", r.command}, {"config", r.config}, {"runs", r.runs}};
  if (r.average) j["average"] = *r.average;
  if (r.hierarchy) j["hierarchy"] = *r.hierarchy;
  if (r.duration_seconds) j["duration_seconds"] = *r.duration_seconds;
}

inline void from_json(const json& j, RunReport& r) {
  j.at("command").get_to(r.command);
  r.config = j.at("config");
  j.at("runs").get_to(r.runs);
  r.average = j.contains("average") ? std::optional(j.at("average").get<AveragedAccuracy>()) : std::nullopt;
  r.hierarchy = j.contains("hierarchy") ? std::optional(j.at("hierarchy").get<HierarchyReport>()) : std::nullopt;
  r.duration_seconds =
      j.contains("duration_seconds") ? std::optional(j.at("duration_seconds").get<double>()) : std::nullopt;
}

/// Runs `fn`, converting JSON library failures into ParseError.
template <typename Fn>
auto parse_guard(const std::string& where, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, where + ": " + e.what());
  }
}

inline RunReport parse_run_report(const std::string& text) {
  return parse_guard("run report", [&] { return json::parse(text).get<RunReport>(); });
}

// ---------------------------------------------------------------------------
// Dataset JSON lines

inline void write_dataset(std::ostream& out, const Dataset& data) {
  json header{{"dimension", data.dimension()}, {"schema", data.schema()}};
  out << header.dump() << '\n';
  for (const auto& r : data.records()) {
    out << json{{"id", r.id}, {"vector", r.vector}, {"labels", r.labels}}.dump() << '\n';
  }
}

inline Dataset read_dataset(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::optional<std::size_t> dimension;
  Schema schema;
  std::vector<EmbeddingRecord> records;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "line " + std::to_string(line_no);
    parse_guard(where, [&] {
      const json j = json::parse(line);
      if (!j.is_object()) throw Error(ErrorCode::ParseError, where + ": expected an object");
      if (!dimension) {
        if (!j.contains("dimension") || !j.contains("schema")) {
          throw Error(ErrorCode::ParseError, where + ": first line must carry 'dimension' and 'schema'");
        }
        dimension = j.at("dimension").get<std::size_t>();
        j.at("schema").get_to(schema);
        return;
      }
      EmbeddingRecord r;
      j.at("id").get_to(r.id);
      j.at("vector").get_to(r.vector);
      j.at("labels").get_to(r.labels);
      records.push_back(std::move(r));
    });
  }
  if (!dimension) throw Error(ErrorCode::ParseError, "dataset file is empty");
  Dataset data = validate_dataset(std::move(records), std::move(schema));
  if (data.dimension() != *dimension) {
    throw Error(ErrorCode::DimensionMismatch, "header declares dimension " + std::to_string(*dimension) +
                                                  ", records have " + std::to_string(data.dimension()));
  }
  return data;
}

inline Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open '" + path + "'");
  return read_dataset(in);
}

inline void save_dataset(const std::string& path, const Dataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write '" + path + "'");
  write_dataset(out, data);
}

// ---------------------------------------------------------------------------
// Metric and classifier documents

inline json metric_to_json(const MetricSpec& metric) {
  json j{{"kind", to_string(metric.kind())}};
  if (const auto& m = metric.matrix()) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m->rows(); ++r) {
      std::vector<double> row(static_cast<std::size_t>(m->cols()));
      for (Eigen::Index c = 0; c < m->cols(); ++c) row[static_cast<std::size_t>(c)] = (*m)(r, c);
      rows.push_back(row);
    }
    j["matrix"] = rows;
  }
  return j;
}

inline MetricSpec metric_from_json(const json& j) {
  const MetricKind kind = parse_metric_kind(j.at("kind").get<std::string>());
  if (kind == MetricKind::euclidean) return MetricSpec::euclidean();
  if (kind == MetricKind::squared_euclidean) return MetricSpec::squared_euclidean();
  const auto rows = j.at("matrix").get<std::vector<std::vector<double>>>();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows.size()) throw Error(ErrorCode::DimensionMismatch, "metric matrix is not square");
    for (std::size_t c = 0; c < rows.size(); ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  return MetricSpec::mahalanobis(std::move(m));
}

inline MetricSpec load_metric(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open '" + path + "'");
  return parse_guard(path, [&] { return metric_from_json(json::parse(in)); });
}

inline json classifier_to_json(const CentroidClassifier& c) {
  json entries = json::array();
  for (const auto& e : c.entries) {
    json je{{"level", e.level}, {"label", e.label}, {"centroid", e.centroid}, {"restart", e.restart}};
    if (c.backend == Backend::mog) {
      je["weight"] = e.weight;
      je["covariance"] = e.covariance;
    }
    entries.push_back(std::move(je));
  }
  json levels = json::array();
  for (const auto& l : c.levels) {
    levels.push_back({{"cluster_count", l.cluster_count},
                      {"selected_restart", l.selected_restart},
                      {"training_accuracy", l.training_accuracy},
                      {"restart_accuracies", l.restart_accuracies}});
  }
  return json{{"format", kClassifierFormat},
              {"version", kClassifierVersion},
              {"dimension", c.dimension},
              {"backend", to_string(c.backend)},
              {"covariance_kind", to_string(c.covariance_kind)},
              {"metric", metric_to_json(c.metric)},
              {"attributes", c.attributes},
              {"schema", c.schema},
              {"levels", levels},
              {"entries", entries}};
}

inline CentroidClassifier classifier_from_json(const json& j) {
  return parse_guard("classifier", [&] {
    if (!j.is_object() || j.value("format", std::string{}) != kClassifierFormat) {
      throw Error(ErrorCode::ParseError, "not a classifier document");
    }
    const int version = j.at("version").get<int>();
    if (version != kClassifierVersion) {
      throw Error(ErrorCode::VersionMismatch, "classifier format version " + std::to_string(version) +
                                                  ", expected " + std::to_string(kClassifierVersion));
    }
    CentroidClassifier c;
    j.at("dimension").get_to(c.dimension);
    c.backend = parse_backend(j.at("backend").get<std::string>());
    c.covariance_kind = parse_covariance_kind(j.at("covariance_kind").get<std::string>());
    c.metric = metric_from_json(j.at("metric"));
    j.at("attributes").get_to(c.attributes);
    j.at("schema").get_to(c.schema);
    for (const auto& jl : j.at("levels")) {
      LevelSummary l;
      jl.at("cluster_count").get_to(l.cluster_count);
      jl.at("selected_restart").get_to(l.selected_restart);
      jl.at("training_accuracy").get_to(l.training_accuracy);
      jl.at("restart_accuracies").get_to(l.restart_accuracies);
      c.levels.push_back(std::move(l));
    }
    for (const auto& je : j.at("entries")) {
      ClassifierEntry e;
      je.at("level").get_to(e.level);
      je.at("label").get_to(e.label);
      je.at("centroid").get_to(e.centroid);
      je.at("restart").get_to(e.restart);
      if (c.backend == Backend::mog) {
        je.at("weight").get_to(e.weight);
        je.at("covariance").get_to(e.covariance);
      }
      c.entries.push_back(std::move(e));
    }
    validate_classifier(c);
    return c;
  });
}

inline void save_classifier(const std::string& path, const CentroidClassifier& c) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write '" + path + "'");
  out << classifier_to_json(c).dump(2) << '\n';
}

inline CentroidClassifier load_classifier(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open '" + path + "'");
  const json j = parse_guard(path, [&] { return json::parse(in); });
  return classifier_from_json(j);
}

}  // namespace subdisc
