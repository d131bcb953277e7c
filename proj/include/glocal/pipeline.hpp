#pragma once

// End-to-end orchestration: annotation, embedding, attention, scoring, graph
// construction, sampling and evaluation, driven by a flat key=value config.

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "glocal/attention.hpp"
#include "glocal/io.hpp"
#include "glocal/sampling.hpp"
#include "glocal/scoring.hpp"

namespace glocal::pipeline {

namespace fs = std::filesystem;

enum class Strategy { OneTime, Incremental };

inline const std::vector<std::string> kStages = {"migna", "embed", "attend", "score", "graph", "sample", "eval"};

struct PipelineConfig {
  fs::path base_dir;  // relative paths resolve against this

  fs::path train_manifest;
  fs::path pool_manifest;
  fs::path litho_train;
  fs::path litho_pool;
  fs::path weights_dir;  // empty: random weights from `seed`
  fs::path out_dir = "out";

  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  attention::SoftmaxMode softmax = attention::SoftmaxMode::PerQuery;

  std::size_t r = 16;
  std::uint32_t k = 10;
  std::size_t clusters = scoring::kDefaultClusters;  // key "K"
  double nu = scoring::kDefaultNu;
  scoring::KernelType kernel = scoring::KernelType::Rbf;
  double kernel_sigma = 0.0;  // <= 0: median heuristic
  double sigma_den = 0.0;     // <= 0: median edge distance
  std::size_t grid = 16;
  std::size_t tau = 5;
  double threshold = scoring::kDefaultThreshold;
  std::size_t n_s = 100;
  std::size_t batch = 25;
  std::size_t epochs = 50;
  std::size_t max_batches = 0;  // 0: until the stop criterion
  std::uint64_t seed = 7;
  Strategy strategy = Strategy::OneTime;
  std::set<std::string> skip;

  /// Validates and stores one key. Unknown keys and bad values raise ConfigError.
  void set(const std::string& key, const std::string& value);

  fs::path resolve(const fs::path& p) const;
  bool runs(const std::string& stage) const { return !skip.contains(stage); }

  /// Sorted key=value lines of every key that was set, as written.
  std::string canonical() const;
  std::string hash() const;

 private:
  std::map<std::string, std::string> raw_;
};

/// `#` starts a comment; blank lines are ignored.
PipelineConfig parse_config(const std::string& text, const fs::path& base_dir = {});
PipelineConfig load_config(const fs::path& path);
/// "key=value" override as given on the command line.
void apply_override(PipelineConfig& cfg, const std::string& assignment);

// ---------------------------------------------------------------------------
// Stage building blocks, shared with the command-line tool.

struct LabelRow {
  std::string id;
  std::size_t anomaly_count = 0;
  bool is_novel = false;
};

/// Corpus statistics come from `reference`; every entry of `target` with a
/// prediction and ground truth is annotated.
std::vector<LabelRow> annotate(const DatasetManifest& reference, const DatasetManifest& target, std::size_t grid,
                               std::size_t tau);
void write_labels(const std::vector<LabelRow>& rows, const fs::path& path);
std::vector<LabelRow> read_labels(const fs::path& path);

/// Layout images flattened row-major and scaled to [0, 1], one row per entry.
FeatureMatrix layout_features(const DatasetManifest& manifest);

/// Local, global and glocal scores with the novelty decision per sample.
ScoreReport score_samples(const std::vector<std::string>& ids, const std::vector<double>& local,
                          const std::vector<double>& global, double threshold);

struct PickRow {
  std::string id;
  std::uint64_t visits = 0;
  std::size_t iteration = 0;
};
/// Picks of a SampleSet whose row ids index `ids`.
std::vector<PickRow> picks_from(const sampling::SampleSet& s, const std::vector<std::string>& ids);
void write_picks(const std::vector<PickRow>& rows, const fs::path& path);

struct AucRow {
  std::string score;
  double auc = 0.0;
};
/// AUC of each score column of the report against the novelty labels, matched by id.
std::vector<AucRow> evaluate(const ScoreReport& report, const std::vector<LabelRow>& labels);
void write_auc(const std::vector<AucRow>& rows, const fs::path& path);

struct PipelineResult {
  std::vector<fs::path> artifacts;  // in stage order, relative to out_dir
  sampling::StopReason stop_reason = sampling::StopReason::Criterion;
};

/// Runs every non-skipped stage in order. Skipped stages read their outputs
/// from a previous run in out_dir. Writes stamp.txt last.
PipelineResult run_pipeline(const PipelineConfig& cfg);

}  // namespace glocal::pipeline
