#include "glocal/pipeline.hpp"

#include <charconv>
#include <iostream>
#include <limits>
#include <sstream>
#include <unordered_map>

#include "glocal/embed.hpp"
#include "glocal/error.hpp"
#include "glocal/graph.hpp"
#include "glocal/hash.hpp"
#include "glocal/migna.hpp"

namespace glocal::pipeline {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::uint64_t parse_uint(const std::string& key, const std::string& v, std::uint64_t lo,
                         std::uint64_t hi = std::numeric_limits<std::uint64_t>::max()) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  if (out < lo || out > hi) {
    throw ConfigError(key + ": " + v + " is outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw ConfigError(key + ": expected a finite number, got '" + v + "'");
  }
  return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  return out;
}

/// Rethrows the in-flight exception with `prefix` prepended, keeping its type.
[[noreturn]] void rethrow_with_context(const std::string& prefix) {
  try {
    throw;
  } catch (const SolverError& e) {
    throw SolverError(prefix + e.what(), e.residual());
  }
#define GLOCAL_RETHROW(T) \
  catch (const T& e) { throw T(prefix + e.what()); }
  GLOCAL_RETHROW(FormatError)
  GLOCAL_RETHROW(DataError)
  GLOCAL_RETHROW(IoError)
  GLOCAL_RETHROW(ShapeError)
  GLOCAL_RETHROW(EmptyError)
  GLOCAL_RETHROW(ParamError)
  GLOCAL_RETHROW(DegenerateError)
  GLOCAL_RETHROW(WalkError)
  GLOCAL_RETHROW(ConfigError)
  GLOCAL_RETHROW(Error)
#undef GLOCAL_RETHROW
}

template <typename Fn>
auto in_stage(const std::string& stage, Fn&& fn) {
  try {
    return fn();
  } catch (const Error&) {
    rethrow_with_context("stage " + stage + ": ");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

void PipelineConfig::set(const std::string& key, const std::string& value_in) {
  const std::string value = trim(value_in);
  if (key == "train_manifest") {
    train_manifest = value;
  } else if (key == "pool_manifest") {
    pool_manifest = value;
  } else if (key == "litho_train") {
    litho_train = value;
  } else if (key == "litho_pool") {
    litho_pool = value;
  } else if (key == "weights_dir") {
    weights_dir = value;
  } else if (key == "out_dir") {
    if (value.empty()) throw ConfigError("out_dir must not be empty");
    out_dir = value;
  } else if (key == "shape") {
    const auto parts = split(value, ',');
    if (parts.size() != 3) throw ConfigError("shape: expected C,H,W, got '" + value + "'");
    channels = parse_uint(key, parts[0], attention::kChannelReduction);
    height = parse_uint(key, parts[1], 1);
    width = parse_uint(key, parts[2], 1);
    if (channels % attention::kChannelReduction != 0) {
      throw ConfigError("shape: C must be a multiple of " + std::to_string(attention::kChannelReduction));
    }
  } else if (key == "softmax") {
    if (value == "query") softmax = attention::SoftmaxMode::PerQuery;
    else if (value == "global") softmax = attention::SoftmaxMode::Global;
    else throw ConfigError("softmax: expected query or global, got '" + value + "'");
  } else if (key == "r") {
    r = parse_uint(key, value, 1);
  } else if (key == "k") {
    k = std::uint32_t(parse_uint(key, value, 1, std::numeric_limits<std::uint32_t>::max()));
  } else if (key == "K") {
    clusters = parse_uint(key, value, 1);
  } else if (key == "nu") {
    nu = parse_real(key, value);
    if (!(nu > 0.0 && nu <= 1.0)) throw ConfigError("nu: must lie in (0, 1], got " + value);
  } else if (key == "kernel") {
    if (value == "rbf") kernel = scoring::KernelType::Rbf;
    else if (value == "linear") kernel = scoring::KernelType::Linear;
    else throw ConfigError("kernel: expected rbf or linear, got '" + value + "'");
  } else if (key == "kernel_sigma") {
    kernel_sigma = parse_real(key, value);
  } else if (key == "sigma_den") {
    sigma_den = parse_real(key, value);
  } else if (key == "grid") {
    grid = parse_uint(key, value, 3);
  } else if (key == "tau") {
    tau = parse_uint(key, value, 1);
  } else if (key == "threshold") {
    threshold = parse_real(key, value);
  } else if (key == "n_s") {
    n_s = parse_uint(key, value, 1);
  } else if (key == "batch") {
    batch = parse_uint(key, value, 1);
  } else if (key == "epochs") {
    epochs = parse_uint(key, value, 1);
  } else if (key == "max_batches") {
    max_batches = parse_uint(key, value, 0);
  } else if (key == "seed") {
    seed = parse_uint(key, value, 0);
  } else if (key == "strategy") {
    if (value == "ots") strategy = Strategy::OneTime;
    else if (value == "ins") strategy = Strategy::Incremental;
    else throw ConfigError("strategy: expected ots or ins, got '" + value + "'");
  } else if (key == "skip") {
    skip.clear();
    for (const auto& stage : split(value, ',')) {
      if (stage.empty()) continue;
      if (std::find(kStages.begin(), kStages.end(), stage) == kStages.end()) {
        throw ConfigError("skip: unknown stage '" + stage + "'");
      }
      skip.insert(stage);
    }
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
  raw_[key] = value;
}

fs::path PipelineConfig::resolve(const fs::path& p) const {
  if (p.empty() || p.is_absolute()) return p;
  return base_dir / p;
}

std::string PipelineConfig::canonical() const {
  std::string out;
  for (const auto& [key, value] : raw_) out += key + "=" + value + "\n";
  return out;
}

std::string PipelineConfig::hash() const { return sha256_hex(canonical()); }

PipelineConfig parse_config(const std::string& text, const fs::path& base_dir) {
  PipelineConfig cfg;
  cfg.base_dir = base_dir;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected key=value, got '" + line + "'");
    }
    cfg.set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return cfg;
}

PipelineConfig load_config(const fs::path& path) {
  try {
    return parse_config(read_text_file(path), path.parent_path());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void apply_override(PipelineConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
  cfg.set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

// ---------------------------------------------------------------------------
// Stage helpers

std::vector<LabelRow> annotate(const DatasetManifest& reference, const DatasetManifest& target, std::size_t grid,
                               std::size_t tau) {
  auto map_of = [](const ManifestEntry& e) {
    try {
      return migna::deformation_map(load_image(*e.prediction), load_image(*e.ground_truth));
    } catch (const Error&) {
      rethrow_with_context("sample " + e.id + ": ");
    }
  };
  auto annotated = [](const ManifestEntry& e) { return e.prediction && e.ground_truth; };

  std::vector<migna::DeformationMap> ref_maps;
  for (const auto& e : reference.entries) {
    if (annotated(e)) ref_maps.push_back(map_of(e));
  }
  const auto stats = migna::corpus_stats(ref_maps, grid);

  std::vector<LabelRow> rows;
  for (const auto& e : target.entries) {
    if (!annotated(e)) continue;
    const auto map = map_of(e);
    try {
      const auto cells = migna::patch_anomalies(map, stats, grid);
      rows.push_back({e.id, cells.anomaly_count(), migna::label_novelty(cells, tau)});
    } catch (const Error&) {
      rethrow_with_context("sample " + e.id + ": ");
    }
  }
  return rows;
}

void write_labels(const std::vector<LabelRow>& rows, const fs::path& path) {
  std::string out = "id,anomaly_count,is_novel\n";
  for (const auto& r : rows) {
    out += r.id + "," + std::to_string(r.anomaly_count) + "," + (r.is_novel ? "true" : "false") + "\n";
  }
  write_text_file(path, out);
}

std::vector<LabelRow> read_labels(const fs::path& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  if (!std::getline(in, line) || trim(line) != "id,anomaly_count,is_novel") {
    throw FormatError(path.string() + ": missing labels header");
  }
  std::vector<LabelRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != 3 || (cells[2] != "true" && cells[2] != "false")) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": malformed label row");
    }
    try {
      rows.push_back({cells[0], parse_uint("anomaly_count", cells[1], 0), cells[2] == "true"});
    } catch (const ConfigError& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

FeatureMatrix layout_features(const DatasetManifest& manifest) {
  if (manifest.entries.empty()) throw EmptyError("manifest has no entries");
  std::vector<GrayImage> images;
  for (const auto& e : manifest.entries) {
    if (!e.layout) throw DataError("sample " + e.id + ": no layout image");
    images.push_back(load_image(*e.layout));
    const auto& first = images.front();
    if (images.back().width != first.width || images.back().height != first.height) {
      throw ShapeError("sample " + e.id + ": layout is " + std::to_string(images.back().width) + "x" +
                       std::to_string(images.back().height) + ", expected " + std::to_string(first.width) + "x" +
                       std::to_string(first.height));
    }
  }
  FeatureMatrix out(images.size(), images.front().pixels.size(), FeatureRole::GlobalAE);
  for (std::size_t i = 0; i < images.size(); ++i) {
    auto row = out.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] = float(images[i].pixels[j]) / 255.0f;
  }
  return out;
}

ScoreReport score_samples(const std::vector<std::string>& ids, const std::vector<double>& local,
                          const std::vector<double>& global, double threshold) {
  if (ids.size() != local.size() || ids.size() != global.size()) {
    throw ShapeError("score_samples: " + std::to_string(ids.size()) + " ids, " + std::to_string(local.size()) +
                     " local and " + std::to_string(global.size()) + " global scores");
  }
  const scoring::ScoreVector l{local, scoring::ScoreKind::Local};
  const scoring::ScoreVector g{global, scoring::ScoreKind::Global};
  const auto fused = scoring::glocal_score(l, g);
  const auto novel = scoring::decide_novel(fused, threshold);
  ScoreReport report;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    report.rows.push_back({ids[i], local[i], global[i], fused.values[i], novel[i]});
  }
  return report;
}

std::vector<PickRow> picks_from(const sampling::SampleSet& s, const std::vector<std::string>& ids) {
  std::vector<PickRow> rows;
  for (std::size_t i = 0; i < s.size(); ++i) rows.push_back({ids.at(s.selected[i]), s.pick_visits[i], s.iteration[i]});
  return rows;
}

void write_picks(const std::vector<PickRow>& rows, const fs::path& path) {
  std::string out = "rank,id,visits,iteration\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out += std::to_string(i + 1) + "," + rows[i].id + "," + std::to_string(rows[i].visits) + "," +
           std::to_string(rows[i].iteration) + "\n";
  }
  write_text_file(path, out);
}

std::vector<AucRow> evaluate(const ScoreReport& report, const std::vector<LabelRow>& labels) {
  std::unordered_map<std::string, bool> truth;
  for (const auto& l : labels) truth[l.id] = l.is_novel;
  std::vector<double> local, global, fused;
  std::vector<bool> y;
  for (const auto& row : report.rows) {
    auto it = truth.find(row.id);
    if (it == truth.end()) continue;
    local.push_back(row.theta_local);
    global.push_back(row.theta_global);
    fused.push_back(row.theta_novel);
    y.push_back(it->second);
  }
  if (y.empty()) throw EmptyError("no scored sample has a novelty label");
  return {{"local", scoring::auc(local, y)}, {"global", scoring::auc(global, y)}, {"glocal", scoring::auc(fused, y)}};
}

void write_auc(const std::vector<AucRow>& rows, const fs::path& path) {
  std::string out = "score,auc\n";
  for (const auto& r : rows) out += r.score + "," + format_double(r.auc) + "\n";
  write_text_file(path, out);
}

// ---------------------------------------------------------------------------
// Pipeline

namespace {

std::vector<std::string> ids_of(const DatasetManifest& m) {
  std::vector<std::string> ids;
  for (const auto& e : m.entries) ids.push_back(e.id);
  return ids;
}

void require(const fs::path& p, const std::string& key) {
  if (p.empty()) throw ConfigError("missing required key '" + key + "'");
}

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& cfg) {
  require(cfg.pool_manifest, "pool_manifest");
  const fs::path out = cfg.resolve(cfg.out_dir);
  fs::create_directories(out);
  PipelineResult result;
  auto emit = [&](const fs::path& rel) { result.artifacts.push_back(rel); };

  const DatasetManifest pool = in_stage("load", [&] { return load_manifest(cfg.resolve(cfg.pool_manifest)); });
  const std::vector<std::string> pool_ids = ids_of(pool);
  auto train = [&] {
    require(cfg.train_manifest, "train_manifest");
    return load_manifest(cfg.resolve(cfg.train_manifest));
  };

  // migna: novelty labels for the pool, statistics from the training corpus
  if (cfg.runs("migna")) {
    in_stage("migna", [&] {
      write_labels(annotate(train(), pool, cfg.grid, cfg.tau), out / "labels.csv");
      return 0;
    });
    emit("labels.csv");
  }

  // embed: principal-subspace model of training layouts
  std::vector<double> global;
  FeatureMatrix f_ae;
  if (cfg.runs("embed")) {
    in_stage("embed", [&] {
      const auto model = embed::fit_embedder(layout_features(train()), cfg.r);
      const auto y = layout_features(pool);
      global = embed::global_scores(model, y);
      f_ae = embed::encode_all(model, y);
      embed::save_embedder(model, out / "embedder");
      save_feature_matrix(f_ae, out / "fae.glfm");
      FeatureMatrix g(global.size(), 1);
      for (std::size_t i = 0; i < global.size(); ++i) g(i, 0) = float(global[i]);
      save_feature_matrix(g, out / "global.glfm");
      return 0;
    });
    emit("embedder/mean.glfm");
    emit("embedder/basis.glfm");
    emit("fae.glfm");
    emit("global.glfm");
  } else {
    in_stage("embed", [&] {
      f_ae = load_feature_matrix(out / "fae.glfm");
      const auto g = load_feature_matrix(out / "global.glfm");
      for (std::size_t i = 0; i < g.rows(); ++i) global.push_back(g(i, 0));
      return 0;
    });
  }

  // attend: self-attention over the lithography latents
  FeatureMatrix fsa_train, fsa_pool;
  if (cfg.runs("attend")) {
    in_stage("attend", [&] {
      require(cfg.litho_train, "litho_train");
      require(cfg.litho_pool, "litho_pool");
      if (cfg.channels == 0) throw ConfigError("missing required key 'shape'");
      const auto weights = cfg.weights_dir.empty() ? attention::random_weights(cfg.channels, cfg.seed)
                                                   : attention::load_weights(cfg.resolve(cfg.weights_dir));
      auto forward = [&](const fs::path& p) {
        return attention::sa_forward_batch(load_feature_matrix(cfg.resolve(p), FeatureRole::LocalSA), cfg.channels,
                                           cfg.height, cfg.width, weights, cfg.softmax);
      };
      fsa_train = forward(cfg.litho_train);
      fsa_pool = forward(cfg.litho_pool);
      save_feature_matrix(fsa_train, out / "fsa_train.glfm");
      save_feature_matrix(fsa_pool, out / "fsa.glfm");
      return 0;
    });
    emit("fsa_train.glfm");
    emit("fsa.glfm");
  } else {
    in_stage("attend", [&] {
      fsa_train = load_feature_matrix(out / "fsa_train.glfm", FeatureRole::LocalSA);
      fsa_pool = load_feature_matrix(out / "fsa.glfm", FeatureRole::LocalSA);
      return 0;
    });
  }
  if (fsa_pool.rows() != pool_ids.size() || f_ae.rows() != pool_ids.size()) {
    throw ShapeError("pool has " + std::to_string(pool_ids.size()) + " samples but features have " +
                     std::to_string(f_ae.rows()) + " (AE) and " + std::to_string(fsa_pool.rows()) + " (SA) rows");
  }

  // score: MC-SVM on training SA features, fused with the global score
  ScoreReport report;
  if (cfg.runs("score")) {
    report = in_stage("score", [&] {
      const auto model = scoring::fit_mcsvm(fsa_train, cfg.clusters, cfg.nu, {cfg.kernel, cfg.kernel_sigma}, cfg.seed);
      return score_samples(pool_ids, scoring::local_scores(fsa_pool, model), global, cfg.threshold);
    });
    write_score_report(report, out / "report.csv");
    emit("report.csv");
  } else {
    report = in_stage("score", [&] { return read_score_report(out / "report.csv"); });
  }

  // graph: k-NN graph over the detected novelties
  std::vector<std::size_t> novel_rows;
  std::unordered_map<std::string, std::size_t> row_of;
  for (std::size_t i = 0; i < pool_ids.size(); ++i) row_of[pool_ids[i]] = i;
  for (const auto& row : report.rows) {
    if (!row.is_novel) continue;
    auto it = row_of.find(row.id);
    if (it == row_of.end()) throw DataError("report id '" + row.id + "' is not in the pool manifest");
    novel_rows.push_back(it->second);
  }
  std::vector<std::string> novel_ids;
  for (auto r : novel_rows) novel_ids.push_back(pool_ids[r]);
  const FeatureMatrix ae_novel = f_ae.select_rows(novel_rows);
  FeatureMatrix sa_novel = fsa_pool.select_rows(novel_rows);
  sa_novel.set_role(FeatureRole::LocalSA);

  graph::DataGraph g;
  const bool enough = novel_rows.size() >= 2;
  if (!enough) std::cerr << "warning: " << novel_rows.size() << " novel samples, graph and sampling skipped\n";
  if (cfg.runs("graph") && enough) {
    g = in_stage("graph", [&] {
      std::uint32_t k = cfg.k;
      if (k >= novel_rows.size()) {
        k = std::uint32_t(novel_rows.size() - 1);
        std::cerr << "warning: k reduced from " << cfg.k << " to " << k << " for " << novel_rows.size()
                  << " novel samples\n";
      }
      return graph::build_knn_graph(ae_novel, k);
    });
    graph::save_graph(g, out / "graph.bin");
    emit("graph.bin");
  } else if (enough) {
    g = in_stage("graph", [&] { return graph::load_graph(out / "graph.bin"); });
    if (g.size() != novel_rows.size()) throw ShapeError("stored graph does not match the novel samples");
  }

  // sample
  if (cfg.runs("sample")) {
    std::vector<PickRow> picks;
    if (enough) {
      picks = in_stage("sample", [&] {
        const auto part = graph::split_dense_sparse(g);
        const auto ctx = sampling::make_walk_context(g, part, ae_novel, sa_novel, cfg.sigma_den, cfg.seed);
        if (cfg.strategy == Strategy::OneTime) {
          return picks_from(sampling::one_time_sampling(part, cfg.n_s, cfg.epochs, ctx), novel_ids);
        }
        auto res = sampling::incremental_sampling(part, cfg.batch, cfg.epochs, ctx, cfg.max_batches);
        result.stop_reason = res.reason;
        return picks_from(res.samples, novel_ids);
      });
    }
    write_picks(picks, out / "picks.csv");
    emit("picks.csv");
  }

  // eval: AUC of each score against the annotation, when labels exist
  if (cfg.runs("eval") && fs::exists(out / "labels.csv")) {
    in_stage("eval", [&] {
      write_auc(evaluate(report, read_labels(out / "labels.csv")), out / "auc.csv");
      return 0;
    });
    emit("auc.csv");
  }

  std::string stamp = "config " + cfg.hash() + "\n";
  for (const auto& a : result.artifacts) stamp += sha256_file(out / a) + "  " + a.generic_string() + "\n";
  write_text_file(out / "stamp.txt", stamp);
  return result;
}

}  // namespace glocal::pipeline
