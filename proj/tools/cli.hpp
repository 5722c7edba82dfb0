#pragma once

// Command implementations for the `subdisc` tool. Kept in a header so the
// test suite can drive every command in-process.
//
// Exit codes: 0 success, 2 malformed input (unparseable file, bad flags,
// incompatible model version), 3 validation failure.

#include <chrono>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "subdisc/subdisc.hpp"

namespace subdisc::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitMalformed = 2;
inline constexpr int kExitInvalid = 3;

namespace detail {

inline std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline std::vector<double> parse_numbers(const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split_list(text)) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) throw Error(ErrorCode::ParseError, "'" + item + "' is not a number");
    out.push_back(v);
  }
  return out;
}

inline std::vector<std::size_t> parse_counts(const std::string& text) {
  std::vector<std::size_t> out;
  for (double v : parse_numbers(text)) {
    if (v < 1 || v != static_cast<double>(static_cast<std::size_t>(v))) {
      throw Error(ErrorCode::ParseError, "counts must be positive integers");
    }
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

/// Destination for reports: a file when a path is given, else stdout.
class Output {
 public:
  Output(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
    if (!path.empty() && path != "-") {
      file_.open(path, std::ios::binary);
      if (!file_) throw Error(ErrorCode::InvalidArgument, "cannot write '" + path + "'");
      stream_ = &file_;
    }
  }
  std::ostream& get() { return *stream_; }

 private:
  std::ofstream file_;
  std::ostream* stream_;
};

struct MetricFlags {
  std::string kind = "euclidean";
  std::string matrix_path;

  void add_to(CLI::App& cmd) {
    cmd.add_option("--metric", kind, "euclidean | squared-euclidean | mahalanobis")
        ->check(CLI::IsMember({"euclidean", "squared-euclidean", "mahalanobis"}));
    cmd.add_option("--metric-matrix", matrix_path, "JSON file {\"kind\":\"mahalanobis\",\"matrix\":[[...]]}");
  }

  MetricSpec resolve() const {
    const MetricKind k = parse_metric_kind(kind);
    if (k == MetricKind::mahalanobis) {
      if (matrix_path.empty()) throw Error(ErrorCode::InvalidArgument, "--metric mahalanobis needs --metric-matrix");
      MetricSpec m = load_metric(matrix_path);
      if (m.kind() != MetricKind::mahalanobis) throw Error(ErrorCode::InvalidArgument, "metric file is not mahalanobis");
      return m;
    }
    return k == MetricKind::euclidean ? MetricSpec::euclidean() : MetricSpec::squared_euclidean();
  }
};

inline std::string percent(double v) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(1) << 100.0 * v << '%';
  return ss.str();
}

inline void print_run_table(std::ostream& out, const RunReport& report) {
  for (std::size_t i = 0; i < report.runs.size(); ++i) {
    const auto& run = report.runs[i];
    out << "run " << (i + 1) << ": overall " << percent(run.overall_accuracy);
    for (std::size_t c = 0; c < run.classes.size(); ++c) {
      out << "  " << join_label(run.classes[c]) << ' ' << percent(run.per_class_accuracy[c]);
    }
    out << '\n';
  }
  if (report.average) {
    out << "average: overall " << percent(report.average->overall);
    for (const auto& [name, acc] : report.average->per_class) out << "  " << name << ' ' << percent(acc);
    out << '\n';
    for (const auto& [attr, values] : report.average->value) {
      for (const auto& [value, acc] : values) out << "  " << attr << '=' << value << ' ' << percent(acc) << '\n';
    }
  }
  if (report.hierarchy) {
    for (const auto& level : report.hierarchy->levels) {
      out << "clusters " << level.cluster_count << ": resolves";
      for (const auto& a : level.resolved) out << ' ' << a;
      out << " (overall " << percent(level.overall_accuracy) << ")\n";
      for (const auto& [attr, values] : level.value_accuracies) {
        for (const auto& [value, acc] : values) out << "  " << attr << '=' << value << ' ' << percent(acc) << '\n';
      }
    }
    out << "dominance order:";
    for (const auto& a : report.hierarchy->dominance_order) out << ' ' << a;
    out << '\n';
  }
  if (report.duration_seconds) out << "duration: " << *report.duration_seconds << " s\n";
}

inline void emit_report(std::ostream& out, const RunReport& report, const std::string& format) {
  if (format == "table") {
    print_run_table(out, report);
  } else {
    out << json(report).dump(2) << '\n';
  }
}

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace detail

/// Parses and runs one command line. `args` excludes the program name.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  const auto start = detail::Clock::now();
  CLI::App app{"Zero-shot attribute discrimination on embedding vectors", "subdisc"};
  app.require_subcommand(1);

  // shared flags
  std::string format = "json";
  std::string output;
  bool no_timing = false;
  std::uint64_t seed = 0;
  std::size_t restarts = 5;
  std::size_t inits = KMeansConfig{}.inits_per_run;
  std::string attributes_text;
  std::string dataset_path;
  detail::MetricFlags metric_flags;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--format", format, "json | table")->check(CLI::IsMember({"json", "table"}));
    cmd->add_option("-o,--output", output, "report file (default stdout)");
    cmd->add_flag("--no-timing", no_timing, "omit wall-clock duration so reports are reproducible byte for byte");
    cmd->add_option("--seed", seed, "random seed");
  };

  // generate
  auto* generate = app.add_subcommand("generate", "write a synthetic attribute-hierarchy dataset");
  std::size_t dimension = 16;
  std::string offsets_text = "8,2,0.5";
  std::string names_text;
  std::string values_text;
  double sigma = 0.05;
  std::size_t per_cell = 25;
  std::uint64_t generate_seed = 1;
  generate->add_option("--dimension", dimension, "embedding dimension")->capture_default_str();
  generate->add_option("--offsets", offsets_text, "offset magnitudes, most dominant first")->capture_default_str();
  generate->add_option("--names", names_text, "attribute names (default skin_tone,gender,age)");
  generate->add_option("--values", values_text, "value pairs low:high per attribute, comma separated");
  generate->add_option("--sigma", sigma, "isotropic noise standard deviation")->capture_default_str();
  generate->add_option("--per-cell", per_cell, "records per attribute combination")->capture_default_str();
  generate->add_option("--seed", generate_seed, "random seed")->capture_default_str();
  generate->add_option("-o,--output", output, "dataset file (default stdout)");

  // cluster
  auto* cluster = app.add_subcommand("cluster", "cluster a dataset and score each run against labels");
  std::size_t k = 2;
  std::string algorithm = "kmeans";
  std::optional<std::size_t> max_iterations;
  std::optional<double> tolerance;
  std::string covariance = "diagonal";
  cluster->add_option("dataset", dataset_path, "dataset JSON-lines file")->required();
  cluster->add_option("--k", k, "cluster count")->required();
  cluster->add_option("--restarts", restarts, "independent runs")->capture_default_str();
  cluster->add_option("--attributes", attributes_text, "comma-separated attributes to score")->required();
  cluster->add_option("--algorithm", algorithm, "kmeans | mog")->check(CLI::IsMember({"kmeans", "mog"}));
  cluster->add_option("--inits", inits, "Lloyd runs per restart (best inertia kept)")->capture_default_str();
  cluster->add_option("--max-iter", max_iterations, "iteration cap");
  cluster->add_option("--tol", tolerance, "convergence tolerance");
  cluster->add_option("--covariance", covariance, "diagonal | full (mog)")->check(CLI::IsMember({"diagonal", "full"}));
  metric_flags.add_to(*cluster);
  add_common(cluster);

  // hierarchy
  auto* hierarchy = app.add_subcommand("hierarchy", "find the order in which attributes split the embedding");
  std::string levels_text;
  hierarchy->add_option("dataset", dataset_path, "dataset JSON-lines file")->required();
  hierarchy->add_option("--attributes", attributes_text, "comma-separated binary attributes")->required();
  hierarchy->add_option("--levels", levels_text, "cluster counts (default 2,4,... up to 2^attributes)");
  hierarchy->add_option("--restarts", restarts, "runs averaged per level")->capture_default_str();
  hierarchy->add_option("--inits", inits, "Lloyd runs per restart")->capture_default_str();
  metric_flags.add_to(*hierarchy);
  add_common(hierarchy);

  // split
  auto* split = app.add_subcommand("split", "stratified train/test split");
  double fraction = 0.7;
  std::string stratify_text;
  std::string train_path, test_path;
  split->add_option("dataset", dataset_path, "dataset JSON-lines file")->required();
  split->add_option("--fraction", fraction, "train fraction")->capture_default_str();
  split->add_option("--stratify", stratify_text, "comma-separated attributes to stratify by");
  split->add_option("--seed", seed, "random seed");
  split->add_option("--train", train_path, "train output file")->required();
  split->add_option("--test", test_path, "test output file")->required();

  // subsample
  auto* subsample = app.add_subcommand("subsample", "draw a fixed number of records per attribute value");
  std::string ratio_attribute;
  std::string counts_text;
  subsample->add_option("dataset", dataset_path, "dataset JSON-lines file")->required();
  subsample->add_option("--attribute", ratio_attribute, "attribute whose values are counted")->required();
  subsample->add_option("--counts", counts_text, "value:count pairs, comma separated")->required();
  subsample->add_option("--seed", seed, "random seed");
  subsample->add_option("-o,--output", output, "dataset file (default stdout)");

  // train
  auto* train = app.add_subcommand("train", "fit labelled centroids and save a classifier");
  std::string model_path;
  train->add_option("dataset", dataset_path, "training dataset")->required();
  train->add_option("--attributes", attributes_text, "comma-separated attributes")->required();
  train->add_option("--levels", levels_text, "cluster counts (default 2,4,8)");
  train->add_option("--restarts", restarts, "runs per level")->capture_default_str();
  train->add_option("--inits", inits, "Lloyd runs per restart")->capture_default_str();
  train->add_option("--algorithm", algorithm, "kmeans | mog")->check(CLI::IsMember({"kmeans", "mog"}));
  train->add_option("--covariance", covariance, "diagonal | full (mog)")->check(CLI::IsMember({"diagonal", "full"}));
  train->add_option("--model", model_path, "classifier output file")->required();
  metric_flags.add_to(*train);
  add_common(train);

  // classify
  auto* classify_cmd = app.add_subcommand("classify", "label vectors with a saved classifier");
  std::vector<std::string> vector_texts;
  std::optional<std::size_t> level;
  bool score = false;
  classify_cmd->add_option("--model", model_path, "classifier file")->required();
  classify_cmd->add_option("dataset", dataset_path, "dataset JSON-lines file of queries");
  classify_cmd->add_option("--vector", vector_texts, "single comma-separated query vector (repeatable)");
  classify_cmd->add_option("--level", level, "only consult centroids of this cluster count");
  classify_cmd->add_flag("--score", score, "append accuracy against the records' labels");
  classify_cmd->add_option("--format", format, "json | table")->check(CLI::IsMember({"json", "table"}));
  classify_cmd->add_option("-o,--output", output, "output file (default stdout)");

  std::vector<const char*> argv{"subdisc"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitMalformed;
  }

  try {
    RunReport report;
    report.command = args;
    const auto attributes = detail::split_list(attributes_text);

    if (generate->parsed()) {
      HierarchySpec spec = default_hierarchy_spec();
      const auto preset = spec.attributes;
      spec.dimension = dimension;
      spec.noise_sigma = sigma;
      spec.samples_per_cell = per_cell;
      spec.rng_seed = generate_seed;
      const auto offsets = detail::parse_numbers(offsets_text);
      const auto names = detail::split_list(names_text);
      const auto values = detail::split_list(values_text);
      if (!names.empty() && names.size() != offsets.size()) {
        throw Error(ErrorCode::InvalidSpec, "--names and --offsets differ in length");
      }
      if (!values.empty() && values.size() != offsets.size()) {
        throw Error(ErrorCode::InvalidSpec, "--values and --offsets differ in length");
      }
      spec.attributes.clear();
      for (std::size_t a = 0; a < offsets.size(); ++a) {
        AttributeSpec attr;
        attr.offset_magnitude = offsets[a];
        if (!names.empty()) {
          attr.name = names[a];
        } else if (a < preset.size()) {
          attr = preset[a];
          attr.offset_magnitude = offsets[a];
        } else {
          attr.name = "attr" + std::to_string(a);
        }
        if (!values.empty()) {
          const auto colon = values[a].find(':');
          if (colon == std::string::npos) throw Error(ErrorCode::ParseError, "--values entries look like low:high");
          attr.values = {values[a].substr(0, colon), values[a].substr(colon + 1)};
        }
        spec.attributes.push_back(std::move(attr));
      }
      const Dataset data = subdisc::generate(spec);
      detail::Output sink(output, out);
      write_dataset(sink.get(), data);
      return kExitOk;
    }

    if (subsample->parsed()) {
      std::map<std::string, std::size_t> counts;
      for (const auto& item : detail::split_list(counts_text)) {
        const auto colon = item.rfind(':');
        if (colon == std::string::npos) throw Error(ErrorCode::ParseError, "--counts entries look like value:count");
        const auto n = detail::parse_counts(item.substr(colon + 1));
        counts[item.substr(0, colon)] = n.empty() ? 0 : n.front();
      }
      const Dataset data = subsample_by_value(load_dataset(dataset_path), ratio_attribute, counts, seed);
      detail::Output sink(output, out);
      write_dataset(sink.get(), data);
      return kExitOk;
    }

    if (split->parsed()) {
      const Dataset data = load_dataset(dataset_path);
      const auto parts = split_dataset(data, {fraction, detail::split_list(stratify_text), seed});
      save_dataset(train_path, parts.train);
      save_dataset(test_path, parts.test);
      out << "train " << parts.train.size() << " records -> " << train_path << '\n'
          << "test " << parts.test.size() << " records -> " << test_path << '\n';
      return kExitOk;
    }

    if (cluster->parsed()) {
      const MetricSpec metric = metric_flags.resolve();
      const Dataset data = to_euclidean_space(load_dataset(dataset_path), metric);
      report.config = {{"algorithm", algorithm}, {"k", k},        {"restarts", restarts},
                       {"seed", seed},           {"inits", inits}, {"attributes", attributes},
                       {"metric", metric_to_json(metric)}};
      if (algorithm == "kmeans") {
        KMeansConfig config;
        config.k = k;
        config.restarts = restarts;
        config.rng_seed = seed;
        config.inits_per_run = inits;
        if (max_iterations) config.max_iterations = *max_iterations;
        if (tolerance) config.tolerance = *tolerance;
        report.config["max_iterations"] = config.max_iterations;
        report.config["tolerance"] = config.tolerance;
        for (const auto& model : kmeans_fit(data, config)) {
          report.runs.push_back(align_and_score(model.assignments, data, attributes, k));
        }
      } else {
        GmmConfig config;
        config.components = k;
        config.covariance_kind = parse_covariance_kind(covariance);
        config.init_runs = inits;
        if (max_iterations) config.max_iterations = *max_iterations;
        if (tolerance) config.tolerance = *tolerance;
        report.config["max_iterations"] = config.max_iterations;
        report.config["tolerance"] = config.tolerance;
        report.config["covariance"] = covariance;
        for (std::size_t r = 0; r < restarts; ++r) {
          config.rng_seed = restart_seed(seed, r);
          const GmmModel model = gmm_fit(data, config);
          report.runs.push_back(align_and_score(hard_assignments(model), data, attributes, k));
        }
      }
      report.average = average_runs(report.runs);
    } else if (hierarchy->parsed()) {
      const MetricSpec metric = metric_flags.resolve();
      const Dataset data = to_euclidean_space(load_dataset(dataset_path), metric);
      std::vector<std::size_t> levels = detail::parse_counts(levels_text);
      if (levels_text.empty()) {
        for (std::size_t m = 1; m <= attributes.size() && m < 63; ++m) levels.push_back(std::size_t{1} << m);
      }
      KMeansConfig config;
      config.restarts = restarts;
      config.rng_seed = seed;
      config.inits_per_run = inits;
      report.config = {{"levels", levels},   {"restarts", restarts},  {"seed", seed},
                       {"inits", inits},     {"attributes", attributes}, {"metric", metric_to_json(metric)}};
      report.hierarchy = hierarchy_probe(data, attributes, levels, config);
    } else if (train->parsed()) {
      const MetricSpec metric = metric_flags.resolve();
      const Dataset data = load_dataset(dataset_path);
      const std::vector<std::size_t> levels =
          levels_text.empty() ? std::vector<std::size_t>{2, 4, 8} : detail::parse_counts(levels_text);
      report.config = {{"algorithm", algorithm}, {"levels", levels},         {"restarts", restarts},
                       {"seed", seed},           {"inits", inits},           {"attributes", attributes},
                       {"metric", metric_to_json(metric)}, {"model", model_path}};
      CentroidClassifier classifier;
      if (algorithm == "kmeans") {
        KMeansConfig config;
        config.restarts = restarts;
        config.rng_seed = seed;
        config.inits_per_run = inits;
        classifier = train_centroid_classifier(data, attributes, levels, config, metric, &report.runs);
      } else {
        GmmConfig config;
        config.rng_seed = seed;
        config.init_runs = inits;
        config.covariance_kind = parse_covariance_kind(covariance);
        report.config["covariance"] = covariance;
        classifier = train_mog_classifier(data, attributes, levels, config, restarts, metric, &report.runs);
      }
      save_classifier(model_path, classifier);
    } else if (classify_cmd->parsed()) {
      const CentroidClassifier classifier = load_classifier(model_path);
      detail::Output sink(output, out);
      auto emit = [&](const std::string& id, const Classification& c) {
        Labels label;
        for (std::size_t a = 0; a < classifier.attributes.size(); ++a) label[classifier.attributes[a]] = c.label[a];
        if (format == "table") {
          sink.get() << id << '\t' << join_label(c.label) << '\t' << c.level << '\t' << c.distance << '\n';
        } else {
          sink.get() << json{{"id", id}, {"label", label}, {"level", c.level}, {"distance", c.distance}}.dump()
                     << '\n';
        }
      };
      if (dataset_path.empty() && vector_texts.empty()) {
        throw Error(ErrorCode::InvalidArgument, "give a dataset file or --vector");
      }
      for (std::size_t i = 0; i < vector_texts.size(); ++i) {
        emit("vector" + std::to_string(i), classify(classifier, detail::parse_numbers(vector_texts[i]), level));
      }
      if (!dataset_path.empty()) {
        const Dataset data = load_dataset(dataset_path);
        if (score) {
          const ClassificationScore s = score_classifier(classifier, data, level);
          for (std::size_t i = 0; i < data.size(); ++i) emit(data[i].id, s.predictions[i]);
          if (format == "table") {
            sink.get() << "composite accuracy " << detail::percent(s.composite_accuracy) << '\n';
            for (const auto& [attr, acc] : s.attribute_accuracy) {
              sink.get() << attr << " accuracy " << detail::percent(acc) << '\n';
            }
          } else {
            sink.get() << json{{"summary",
                                {{"records", data.size()},
                                 {"composite_accuracy", s.composite_accuracy},
                                 {"attribute_accuracy", s.attribute_accuracy}}}}
                              .dump()
                       << '\n';
          }
        } else {
          for (const auto& r : data.records()) emit(r.id, classify(classifier, r.vector, level));
        }
      }
      return kExitOk;
    }

    if (!no_timing) report.duration_seconds = detail::seconds_since(start);
    detail::Output sink(output, out);
    detail::emit_report(sink.get(), report, format);
    return kExitOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::ParseError || e.code() == ErrorCode::VersionMismatch ? kExitMalformed
                                                                                        : kExitInvalid;
  }
}

}  // namespace subdisc::cli
