// glocal: novelty scoring and graph sampling for layout clips.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "glocal/attention.hpp"
#include "glocal/embed.hpp"
#include "glocal/error.hpp"
#include "glocal/graph.hpp"
#include "glocal/io.hpp"
#include "glocal/pipeline.hpp"
#include "glocal/sampling.hpp"
#include "glocal/scoring.hpp"
#include "glocal/synthetic.hpp"

namespace fs = std::filesystem;
using namespace glocal;

namespace {

/// Flag values fall back to the --config file when not given on the command line.
template <typename T>
T pick(const CLI::Option* opt, const T& flag, const T& from_config) {
  return opt->count() > 0 ? flag : from_config;
}

std::vector<std::string> row_ids(std::size_t n, const std::string& manifest) {
  std::vector<std::string> ids;
  if (!manifest.empty()) {
    for (const auto& e : load_manifest(manifest).entries) ids.push_back(e.id);
    if (ids.size() != n) {
      throw ShapeError(manifest + " lists " + std::to_string(ids.size()) + " samples for " + std::to_string(n) +
                       " feature rows");
    }
    return ids;
  }
  for (std::size_t i = 0; i < n; ++i) ids.push_back(std::to_string(i));
  return ids;
}

attention::SoftmaxMode softmax_mode(const std::string& s) {
  if (s == "query") return attention::SoftmaxMode::PerQuery;
  if (s == "global") return attention::SoftmaxMode::Global;
  throw ConfigError("--softmax must be query or global");
}

scoring::KernelType kernel_type(const std::string& s) {
  if (s == "rbf") return scoring::KernelType::Rbf;
  if (s == "linear") return scoring::KernelType::Linear;
  throw ConfigError("--kernel must be rbf or linear");
}

FeatureMatrix features_or_layouts(const std::string& path) {
  // Manifests are TSV; anything else is a feature matrix.
  if (fs::path(path).extension() == ".tsv") return pipeline::layout_features(load_manifest(path));
  return load_feature_matrix(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Glocal novelty scoring and graph-based sampling"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "key=value config supplying defaults")->check(CLI::ExistingFile);

  pipeline::PipelineConfig cfg;
  auto load_cfg = [&] {
    if (!config_path.empty()) cfg = pipeline::load_config(config_path);
  };

  // migna
  auto* migna = app.add_subcommand("migna", "annotate novelty from prediction/ground-truth pairs");
  std::string m_manifest, m_reference, m_out = "labels.csv";
  std::size_t m_grid = 16, m_tau = 5;
  migna->add_option("--manifest", m_manifest, "samples to annotate")->required()->check(CLI::ExistingFile);
  migna->add_option("--reference", m_reference, "corpus for the L1 statistics (default: --manifest)");
  auto* m_grid_opt = migna->add_option("--grid", m_grid, "patch grid size");
  auto* m_tau_opt = migna->add_option("--tau", m_tau, "anomalous patches needed for novelty");
  migna->add_option("--out", m_out);
  migna->callback([&] {
    load_cfg();
    const auto target = load_manifest(m_manifest);
    const auto reference = m_reference.empty() ? target : load_manifest(m_reference);
    pipeline::write_labels(pipeline::annotate(reference, target, pick(m_grid_opt, m_grid, cfg.grid),
                                              pick(m_tau_opt, m_tau, cfg.tau)),
                           m_out);
  });

  // embed
  auto* emb = app.add_subcommand("embed", "fit the principal-subspace embedder");
  std::string e_train, e_out, e_encode, e_codes, e_scores;
  std::size_t e_r = 16;
  emb->add_option("--train", e_train, "training vectors (GLFM/CSV) or layout manifest (.tsv)")
      ->required()
      ->check(CLI::ExistingFile);
  auto* e_r_opt = emb->add_option("--r", e_r, "latent dimension");
  emb->add_option("--out", e_out, "model directory")->required();
  emb->add_option("--encode", e_encode, "vectors to encode with the fitted model")->check(CLI::ExistingFile);
  emb->add_option("--codes", e_codes, "latent codes of --encode (GLFM)");
  emb->add_option("--scores", e_scores, "global scores of --encode (GLFM, one column)");
  emb->callback([&] {
    load_cfg();
    const auto model = embed::fit_embedder(features_or_layouts(e_train), pick(e_r_opt, e_r, cfg.r));
    embed::save_embedder(model, e_out);
    if (e_encode.empty()) return;
    const auto y = features_or_layouts(e_encode);
    if (!e_codes.empty()) save_feature_matrix(embed::encode_all(model, y), e_codes);
    if (!e_scores.empty()) {
      const auto g = embed::global_scores(model, y);
      FeatureMatrix m(g.size(), 1);
      for (std::size_t i = 0; i < g.size(); ++i) m(i, 0) = float(g[i]);
      save_feature_matrix(m, e_scores);
    }
  });

  // attend
  auto* att = app.add_subcommand("attend", "self-attention over lithography latents");
  std::string a_features, a_shape, a_weights, a_out, a_softmax = "query";
  std::uint64_t a_seed = 7;
  att->add_option("--features", a_features, "flattened C*H*W latents, one row per sample")
      ->required()
      ->check(CLI::ExistingFile);
  auto* a_shape_opt = att->add_option("--shape", a_shape, "C,H,W");
  att->add_option("--weights", a_weights, "weight directory (default: random from --seed)");
  auto* a_seed_opt = att->add_option("--seed", a_seed);
  auto* a_softmax_opt = att->add_option("--softmax", a_softmax, "query or global");
  att->add_option("--out", a_out)->required();
  att->callback([&] {
    load_cfg();
    if (a_shape_opt->count() > 0) cfg.set("shape", a_shape);
    if (cfg.channels == 0) throw ConfigError("--shape is required");
    const auto weights = a_weights.empty() ? attention::random_weights(cfg.channels, pick(a_seed_opt, a_seed, cfg.seed))
                                           : attention::load_weights(a_weights);
    const auto mode = a_softmax_opt->count() > 0 ? softmax_mode(a_softmax) : cfg.softmax;
    save_feature_matrix(attention::sa_forward_batch(load_feature_matrix(a_features, FeatureRole::LocalSA),
                                                    cfg.channels, cfg.height, cfg.width, weights, mode),
                        a_out);
  });

  // score
  auto* sc = app.add_subcommand("score", "glocal novelty scores");
  std::string s_fsa, s_train_fsa, s_fae, s_recon, s_embedder, s_manifest, s_kernel = "rbf", s_out = "report.csv";
  std::size_t s_K = scoring::kDefaultClusters;
  double s_nu = scoring::kDefaultNu, s_threshold = scoring::kDefaultThreshold, s_sigma = 0.0;
  std::uint64_t s_seed = 7;
  sc->add_option("--fsa", s_fsa, "SA features of the scored samples")->required()->check(CLI::ExistingFile);
  sc->add_option("--train-fsa", s_train_fsa, "SA features to fit the hyperspheres (default: --fsa)")
      ->check(CLI::ExistingFile);
  sc->add_option("--fae", s_fae, "image-space vectors of the scored samples")->required()->check(CLI::ExistingFile);
  auto* s_recon_opt =
      sc->add_option("--recon", s_recon, "precomputed reconstructions of --fae")->check(CLI::ExistingFile);
  auto* s_embedder_opt =
      sc->add_option("--embedder", s_embedder, "embedder directory")->check(CLI::ExistingDirectory);
  s_recon_opt->excludes(s_embedder_opt);
  sc->add_option("--manifest", s_manifest, "sample ids in row order")->check(CLI::ExistingFile);
  auto* s_K_opt = sc->add_option("--K", s_K, "k-means clusters");
  auto* s_nu_opt = sc->add_option("--nu", s_nu);
  auto* s_kernel_opt = sc->add_option("--kernel", s_kernel, "rbf or linear");
  auto* s_sigma_opt = sc->add_option("--sigma", s_sigma, "RBF bandwidth (default: median heuristic)");
  auto* s_threshold_opt = sc->add_option("--threshold", s_threshold);
  auto* s_seed_opt = sc->add_option("--seed", s_seed);
  sc->add_option("--out", s_out);
  sc->callback([&] {
    load_cfg();
    if (s_recon.empty() && s_embedder.empty()) throw ConfigError("one of --embedder or --recon is required");
    const auto fsa = load_feature_matrix(s_fsa, FeatureRole::LocalSA);
    const auto train = s_train_fsa.empty() ? fsa : load_feature_matrix(s_train_fsa, FeatureRole::LocalSA);
    const auto y = load_feature_matrix(s_fae);
    const auto global = s_recon.empty() ? embed::global_scores(embed::load_embedder(s_embedder), y)
                                        : embed::global_scores(y, load_feature_matrix(s_recon));
    const scoring::KernelChoice kernel{s_kernel_opt->count() > 0 ? kernel_type(s_kernel) : cfg.kernel,
                                       pick(s_sigma_opt, s_sigma, cfg.kernel_sigma)};
    const auto model = scoring::fit_mcsvm(train, pick(s_K_opt, s_K, cfg.clusters), pick(s_nu_opt, s_nu, cfg.nu),
                                          kernel, pick(s_seed_opt, s_seed, cfg.seed));
    write_score_report(pipeline::score_samples(row_ids(fsa.rows(), s_manifest), scoring::local_scores(fsa, model),
                                               global, pick(s_threshold_opt, s_threshold, cfg.threshold)),
                       s_out);
  });

  // graph
  auto* gr = app.add_subcommand("graph", "k-NN data graph");
  std::string g_fae, g_fsa, g_out = "graph.bin";
  std::uint32_t g_k = graph::kDefaultK;
  gr->add_option("--fae", g_fae, "latent codes")->required()->check(CLI::ExistingFile);
  gr->add_option("--fsa", g_fsa, "SA features (row count check)")->check(CLI::ExistingFile);
  auto* g_k_opt = gr->add_option("--k", g_k);
  gr->add_option("--out", g_out);
  gr->callback([&] {
    load_cfg();
    const auto fae = load_feature_matrix(g_fae);
    if (!g_fsa.empty() && load_feature_matrix(g_fsa).rows() != fae.rows()) {
      throw ShapeError("--fae and --fsa differ in row count");
    }
    graph::save_graph(graph::build_knn_graph(fae, pick(g_k_opt, g_k, cfg.k)), g_out);
  });

  // sample
  auto* sa = app.add_subcommand("sample", "select representative samples by random walks");
  std::string p_strategy, p_graph, p_fae, p_fsa, p_manifest, p_out = "picks.csv";
  std::size_t p_n = 100, p_batch = 25, p_epochs = 50, p_max_batches = 0;
  std::uint64_t p_seed = 7;
  double p_sigma_den = 0.0;
  sa->add_option("strategy", p_strategy, "ots or ins")->required()->check(CLI::IsMember({"ots", "ins"}));
  sa->add_option("--graph", p_graph)->required()->check(CLI::ExistingFile);
  sa->add_option("--fae", p_fae)->required()->check(CLI::ExistingFile);
  sa->add_option("--fsa", p_fsa)->required()->check(CLI::ExistingFile);
  sa->add_option("--manifest", p_manifest, "sample ids in row order")->check(CLI::ExistingFile);
  auto* p_n_opt = sa->add_option("--n", p_n, "one-time sample size");
  auto* p_batch_opt = sa->add_option("--batch", p_batch, "incremental batch size");
  auto* p_epochs_opt = sa->add_option("--epochs", p_epochs);
  auto* p_max_opt = sa->add_option("--max-batches", p_max_batches, "0: until the stop criterion");
  auto* p_seed_opt = sa->add_option("--seed", p_seed);
  auto* p_sigma_opt = sa->add_option("--sigma-den", p_sigma_den, "density bandwidth (default: median edge)");
  sa->add_option("--out", p_out);
  sa->callback([&] {
    load_cfg();
    const auto g = graph::load_graph(p_graph);
    const auto fae = load_feature_matrix(p_fae);
    const auto fsa = load_feature_matrix(p_fsa, FeatureRole::LocalSA);
    const auto part = graph::split_dense_sparse(g);
    const auto ctx = sampling::make_walk_context(g, part, fae, fsa, pick(p_sigma_opt, p_sigma_den, cfg.sigma_den),
                                                 pick(p_seed_opt, p_seed, cfg.seed));
    const auto ids = row_ids(g.size(), p_manifest);
    const std::size_t epochs = pick(p_epochs_opt, p_epochs, cfg.epochs);
    sampling::SampleSet picks;
    if (p_strategy == "ots") {
      picks = sampling::one_time_sampling(part, pick(p_n_opt, p_n, cfg.n_s), epochs, ctx);
    } else {
      auto res = sampling::incremental_sampling(part, pick(p_batch_opt, p_batch, cfg.batch), epochs, ctx,
                                                pick(p_max_opt, p_max_batches, cfg.max_batches));
      std::cerr << "incremental sampling: " << res.batches << " batches, " << res.samples.size() << " picks\n";
      picks = std::move(res.samples);
    }
    pipeline::write_picks(pipeline::picks_from(picks, ids), p_out);
  });

  // eval-auc
  auto* ev = app.add_subcommand("eval-auc", "AUC of report scores against novelty labels");
  std::string v_report, v_labels, v_out;
  ev->add_option("--report", v_report)->required()->check(CLI::ExistingFile);
  ev->add_option("--labels", v_labels)->required()->check(CLI::ExistingFile);
  ev->add_option("--out", v_out, "CSV output (default: stdout)");
  ev->callback([&] {
    const auto rows = pipeline::evaluate(read_score_report(v_report), pipeline::read_labels(v_labels));
    if (!v_out.empty()) {
      pipeline::write_auc(rows, v_out);
      return;
    }
    for (const auto& r : rows) std::cout << r.score << " " << format_double(r.auc) << "\n";
  });

  // run
  auto* run = app.add_subcommand("run", "run the whole pipeline from a config file");
  std::vector<std::string> r_overrides;
  run->add_option("--set", r_overrides, "key=value override (repeatable)");
  run->callback([&] {
    if (config_path.empty()) throw ConfigError("run needs --config");
    load_cfg();
    for (const auto& o : r_overrides) pipeline::apply_override(cfg, o);
    const auto res = pipeline::run_pipeline(cfg);
    for (const auto& a : res.artifacts) std::cout << (cfg.resolve(cfg.out_dir) / a).string() << "\n";
  });

  // synth
  auto* syn = app.add_subcommand("synth", "write the synthetic image corpus");
  std::string y_out;
  synthetic::ImageCorpusSpec y_spec;
  syn->add_option("--out", y_out)->required();
  syn->add_option("--seed", y_spec.seed);
  syn->callback([&] { synthetic::write_image_corpus(y_out, y_spec); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "fatal: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
