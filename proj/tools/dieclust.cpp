// dieclust: die clustering of coin images from the command line.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "dieclust/distance_matrix.hpp"
#include "dieclust/metrics.hpp"
#include "dieclust/pipeline.hpp"
#include "dieclust/review.hpp"
#include "dieclust/service.hpp"
#include "dieclust/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dieclust;

namespace {

struct ConfigOptions {
  std::string config_path;
  std::string manifest;
  std::string output_dir;
  std::vector<std::string> overrides;  // key.path=value
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<int> target_height;
  std::optional<int> n_keypoints;
  std::optional<std::uint64_t> iterations;
  std::optional<std::uint64_t> burn_in;
  std::optional<double> size_mean;
  std::optional<double> size_variance;
  std::optional<int> cap;
  std::optional<int> chains;
};

void add_config_options(CLI::App* app, ConfigOptions& o) {
  app->add_option("-c,--config", o.config_path, "JSON config file")->check(CLI::ExistingFile);
  app->add_option("-m,--manifest", o.manifest, "image manifest CSV (image_id,path[,grade])");
  app->add_option("-o,--out", o.output_dir, "output directory");
  app->add_option("--seed", o.seed, "random seed");
  app->add_option("--threads", o.threads, "OpenMP threads (0: default)");
  app->add_option("--target-height", o.target_height, "normalized image height");
  app->add_option("--n-keypoints", o.n_keypoints, "keypoints per image");
  app->add_option("--iterations", o.iterations, "MCMC iterations");
  app->add_option("--burn-in", o.burn_in, "MCMC burn-in");
  app->add_option("--size-mean", o.size_mean, "prior mean cluster size");
  app->add_option("--size-variance", o.size_variance, "prior cluster size variance");
  app->add_option("--cap", o.cap, "maximum cluster size");
  app->add_option("--chains", o.chains, "independent MCMC chains");
  app->add_option("--set", o.overrides, "override any config key, e.g. --set gp.lengthscale_frac=0.03");
}

json parse_value(const std::string& v) {
  try {
    return json::parse(v);
  } catch (const json::parse_error&) {
    return v;
  }
}

PipelineConfig resolve_config(const ConfigOptions& o) {
  PipelineConfig cfg = o.config_path.empty() ? PipelineConfig{} : load_pipeline_config(o.config_path);
  json j = to_json(cfg);
  for (const auto& kv : o.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--set needs key=value: " + kv);
    std::string ptr = "/" + kv.substr(0, eq);
    for (char& c : ptr)
      if (c == '.') c = '/';
    const json::json_pointer p(ptr);
    if (!j.contains(p)) throw std::invalid_argument("unknown config key " + kv.substr(0, eq));
    j[p] = parse_value(kv.substr(eq + 1));
  }
  cfg = pipeline_config_from_json(j);
  if (!o.manifest.empty()) cfg.manifest = o.manifest;
  if (!o.output_dir.empty()) cfg.output_dir = o.output_dir;
  if (o.seed) cfg.seed = *o.seed;
  if (o.threads) cfg.threads = *o.threads;
  if (o.target_height) cfg.preprocess.target_height = *o.target_height;
  if (o.n_keypoints) cfg.gp.n_keypoints = *o.n_keypoints;
  if (o.iterations) cfg.clustering.mcmc.iterations = *o.iterations;
  if (o.burn_in) cfg.clustering.mcmc.burn_in = *o.burn_in;
  else if (o.iterations) cfg.clustering.mcmc.burn_in = *o.iterations / 2;
  if (o.size_mean) cfg.clustering.prior.size_mean = *o.size_mean;
  if (o.size_variance) cfg.clustering.prior.size_variance = *o.size_variance;
  if (o.cap) cfg.clustering.prior.max_cluster_size = *o.cap;
  if (o.chains) cfg.clustering.mcmc.chains = *o.chains;
  return cfg;
}

void print_stages(const PipelineResult& r) {
  for (const auto& s : r.stages)
    std::printf("%-10s %s %8.2fs\n", s.name.c_str(), s.skipped ? "cached " : "ran    ", s.seconds);
}

std::vector<int> read_truth(const std::string& path, const std::vector<std::string>& ids) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<std::string> truth_ids;
  const auto labels = read_label_csv(in, truth_ids);
  std::map<std::string, int> by_id;
  for (std::size_t i = 0; i < truth_ids.size(); ++i) by_id[truth_ids[i]] = labels[i];
  std::vector<int> out;
  for (const auto& id : ids) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw std::runtime_error("no ground-truth label for " + id);
    out.push_back(it->second);
  }
  return out;
}

Partition read_partition_file(const std::string& path, std::vector<std::string>& ids) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_partition_csv(in, ids);
}

std::vector<CoinRecord> read_coins(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  std::getline(in, line);
  std::vector<CoinRecord> coins;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    CoinRecord c;
    if (!std::getline(ss, c.coin_id, ',') || !std::getline(ss, c.obverse_image, ',') ||
        !std::getline(ss, c.reverse_image, ','))
      throw FormatError("coin record needs coin_id,obverse_image,reverse_image: " + line);
    coins.push_back(c);
  }
  return coins;
}

int cmd_stage(const ConfigOptions& o, PipelineStage last) {
  const auto r = run_pipeline(resolve_config(o), last);
  print_stages(r);
  if (last == PipelineStage::cluster)
    std::printf("images %zu, clusters %d\n", r.ids.size(), r.partition.num_clusters());
  return 0;
}

struct ClusterOptions {
  ConfigOptions cfg;
  std::string distances;
};

int cmd_cluster(const ClusterOptions& o) {
  if (o.distances.empty()) return cmd_stage(o.cfg, PipelineStage::cluster);
  ConfigOptions co = o.cfg;
  if (co.manifest.empty()) co.manifest = "-";
  if (co.output_dir.empty()) throw std::invalid_argument("--out is required");
  const PipelineConfig cfg = resolve_config(co);
  fs::create_directories(cfg.output_dir);
  const DistanceMatrix d = read_distance_matrix_file(o.distances);
  const auto out = cluster_distances(d, cfg.clustering, cfg.seed);
  const fs::path root = cfg.output_dir;
  {
    std::ofstream f(root / "partition.csv");
    write_partition_csv(f, out.point, d.ids());
  }
  {
    std::ofstream f(root / "coclustering.dcq", std::ios::binary);
    write_coclustering(f, out.mcmc.coclustering);
  }
  {
    std::ofstream f(root / "chain.jsonl");
    write_diagnostics_jsonl(f, out.mcmc.diagnostics);
  }
  std::printf("images %zu, clusters %d (init %d)\n", d.size(), out.point.num_clusters(), out.init.num_clusters());
  return 0;
}

struct EvaluateOptions {
  std::string truth, pred, report, class_csv;
  std::string coins, reverse, links_out;
  std::vector<std::int64_t> bound;
};

int cmd_evaluate(const EvaluateOptions& o) {
  json report;
  if (!o.pred.empty()) {
    std::vector<std::string> ids;
    const Partition pred = read_partition_file(o.pred, ids);
    report["images"] = ids.size();
    report["clusters"] = pred.num_clusters();
    json chart = json::object();
    for (const auto& [size, count] : frequency_chart(pred)) chart[std::to_string(size)] = count;
    report["frequency_chart"] = chart;
    if (!o.truth.empty()) {
      const auto truth = read_truth(o.truth, ids);
      const auto& labels = pred.labels();
      const auto classes = class_report(truth, labels);
      const auto w = weighted_summary(classes);
      report["nmi"] = nmi(truth, labels);
      report["ari"] = ari(truth, labels);
      report["weighted_sensitivity"] = w.sensitivity;
      report["weighted_fdr"] = w.fdr;
      report["classes"] = classes.size();
      if (!o.class_csv.empty()) {
        std::ofstream f(o.class_csv);
        f << "class,size,sensitivity,fdr\n";
        for (const auto& c : classes) f << c.class_id + 1 << ',' << c.size << ',' << c.sensitivity << ',' << c.fdr << '\n';
      }
    }
    if (!o.coins.empty()) {
      if (o.reverse.empty()) throw std::invalid_argument("--coins needs --reverse");
      std::vector<std::string> rev_ids;
      const Partition rev = read_partition_file(o.reverse, rev_ids);
      const auto coins = read_coins(o.coins);
      const auto g = die_link_graph(pred, ids, rev, rev_ids, coins);
      report["die_links"] = {{"edges", g.edges.size()},
                             {"obverse_dies", g.obverse_dies.size()},
                             {"reverse_dies", g.reverse_dies.size()},
                             {"component_sizes", g.component_sizes}};
      const std::string prefix = o.links_out.empty() ? "die_links" : o.links_out;
      std::ofstream csv(prefix + ".csv"), dot(prefix + ".dot");
      write_die_link_csv(csv, g);
      write_die_link_dot(dot, g);
    }
  }
  if (!o.bound.empty()) {
    if (o.bound.size() < 2) throw std::invalid_argument("--bound needs K,K_tilde[,N]");
    const auto b = verification_bound(o.bound[0], o.bound[1], o.bound.size() > 2 ? o.bound[2] : 0);
    report["verification_bound"] = {{"verification", b.verification},
                                    {"oracle", b.oracle},
                                    {"brute_force", b.brute_force},
                                    {"reduction", b.reduction},
                                    {"oracle_reduction", b.oracle_reduction}};
  }
  const std::string text = report.dump(2);
  std::cout << text << '\n';
  if (!o.report.empty()) std::ofstream(o.report) << text << '\n';
  return 0;
}

struct SynthOptions {
  std::string out;
  std::uint64_t seed = 1;
  SyntheticBenchmarkSpec spec;
};

int cmd_synth(const SynthOptions& o) {
  const auto bench = generate_synthetic_benchmark(o.spec, o.seed);
  write_synthetic_benchmark(o.out, bench);
  std::printf("%zu images of %d dies written to %s\n", bench.images.size(), o.spec.n_dies, o.out.c_str());
  return 0;
}

struct ServeOptions {
  std::string partition, distances, manifest, log, host = "127.0.0.1";
  int port = 8080;
};

int cmd_serve(const ServeOptions& o) {
  std::vector<std::string> ids;
  Partition base = read_partition_file(o.partition, ids);
  std::vector<int> grades;
  std::map<std::string, std::string> paths;
  if (!o.manifest.empty()) {
    std::map<std::string, ManifestEntry> by_id;
    for (auto& e : read_image_manifest(o.manifest)) by_id[e.image_id] = e;
    for (const auto& id : ids) {
      const auto it = by_id.find(id);
      if (it == by_id.end()) throw std::runtime_error("manifest lacks image " + id);
      paths[id] = it->second.path;
      grades.push_back(it->second.grade);
    }
  }
  std::optional<DistanceMatrix> d;
  if (!o.distances.empty()) {
    d = read_distance_matrix_file(o.distances);
    if (d->ids() != ids) throw std::runtime_error("distance matrix ids do not match the partition");
  }
  ReviewService service(ReviewSession(std::move(base), ids, std::move(grades), std::move(d)), paths, o.log);
  std::printf("review service on http://%s:%d/api/v1\n", o.host.c_str(), o.port);
  std::fflush(stdout);
  return service.listen(o.host, o.port) ? 0 : 1;
}

struct SweepOptions {
  ConfigOptions cfg;
  std::string distances, truth, out;
};

int cmd_sweep(const SweepOptions& o) {
  ConfigOptions co = o.cfg;
  if (co.manifest.empty()) co.manifest = "-";
  if (co.output_dir.empty()) co.output_dir = "-";
  if (!co.iterations) {
    co.iterations = 500000;
    co.burn_in = co.burn_in.value_or(250000);
  }
  const PipelineConfig cfg = resolve_config(co);
  const DistanceMatrix d = read_distance_matrix_file(o.distances);
  std::vector<int> truth;
  if (!o.truth.empty()) truth = read_truth(o.truth, d.ids());
  const auto grid = default_sweep_grid();
  const auto cells = run_sweep(d, cfg.clustering, grid, cfg.seed, truth);
  json out = json::array();
  std::printf("%6s %6s %4s %7s %7s %7s %7s\n", "mu", "nu", "K", "NMI", "ARI", "sens", "FDR");
  for (const auto& c : cells) {
    std::printf("%6.2f %6.2f %4d %7.4f %7.4f %7.4f %7.4f\n", c.size_mean, c.size_variance, c.clusters, c.nmi, c.ari,
                c.sensitivity, c.fdr);
    out.push_back({{"size_mean", c.size_mean}, {"size_variance", c.size_variance}, {"clusters", c.clusters},
                   {"nmi", c.nmi}, {"ari", c.ari}, {"sensitivity", c.sensitivity}, {"fdr", c.fdr}});
  }
  if (!o.out.empty()) std::ofstream(o.out) << out.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Die clustering of ancient coin images"};
  app.require_subcommand(1);

  ConfigOptions stage_opts[4];
  const std::pair<const char*, const char*> stages[] = {
      {"preprocess", "denoise, equalize and compute relief weights"},
      {"keypoints", "run through Gaussian-process keypoint extraction"},
      {"distances", "run through pairwise dissimilarities"},
      {"run", "run every stage"}};
  CLI::App* stage_cmds[4];
  for (int s = 0; s < 4; ++s) {
    stage_cmds[s] = app.add_subcommand(stages[s].first, stages[s].second);
    add_config_options(stage_cmds[s], stage_opts[s]);
  }

  ClusterOptions cluster_opts;
  auto* cluster = app.add_subcommand("cluster", "microclustering of a distance matrix");
  add_config_options(cluster, cluster_opts.cfg);
  cluster->add_option("--distances", cluster_opts.distances, "DCD1 file; skips the image stages")
      ->check(CLI::ExistingFile);

  EvaluateOptions eval_opts;
  auto* evaluate = app.add_subcommand("evaluate", "accuracy statistics and die-study summaries");
  evaluate->add_option("--pred", eval_opts.pred, "predicted partition CSV")->check(CLI::ExistingFile);
  evaluate->add_option("--truth", eval_opts.truth, "ground-truth labels CSV")->check(CLI::ExistingFile);
  evaluate->add_option("--report", eval_opts.report, "write the JSON report here");
  evaluate->add_option("--classes", eval_opts.class_csv, "per-class sensitivity/FDR CSV");
  evaluate->add_option("--coins", eval_opts.coins, "coin records CSV (coin_id,obverse_image,reverse_image)")
      ->check(CLI::ExistingFile);
  evaluate->add_option("--reverse", eval_opts.reverse, "reverse partition CSV for the die-link graph")
      ->check(CLI::ExistingFile);
  evaluate->add_option("--links", eval_opts.links_out, "die-link output prefix (.csv and .dot)");
  evaluate->add_option("--bound", eval_opts.bound, "verification bound for K,K_tilde[,N]")->delimiter(',');

  SynthOptions synth_opts;
  auto* synth = app.add_subcommand("synth", "generate a synthetic die benchmark");
  auto& sp = synth_opts.spec;
  synth->add_option("-o,--out", synth_opts.out, "output directory")->required();
  synth->add_option("--seed", synth_opts.seed);
  synth->add_option("--dies", sp.n_dies);
  synth->add_option("--size-mean", sp.size_mean);
  synth->add_option("--size-variance", sp.size_variance);
  synth->add_option("--image-size", sp.image_size);
  synth->add_option("--die-jitter", sp.die_jitter);
  synth->add_option("--die-details", sp.die_details);
  synth->add_option("--blur-min", sp.blur_sigma_min);
  synth->add_option("--blur-max", sp.blur_sigma_max);
  synth->add_option("--noise", sp.noise_level);
  synth->add_option("--contrast", sp.contrast_jitter);
  synth->add_option("--wear", sp.wear_strength);
  synth->add_option("--rotation", sp.rotation_jitter_deg);
  synth->add_option("--shift", sp.shift_jitter);
  synth->add_option("--duplicates", sp.duplicate_probability, "duplicate-image probability");

  ServeOptions serve_opts;
  auto* serve = app.add_subcommand("review-serve", "serve the review API");
  serve->add_option("--partition", serve_opts.partition, "base partition CSV")->required()->check(CLI::ExistingFile);
  serve->add_option("--distances", serve_opts.distances, "DCD1 file for ordering")->check(CLI::ExistingFile);
  serve->add_option("--manifest", serve_opts.manifest, "image manifest for files and grades")->check(CLI::ExistingFile);
  serve->add_option("--log", serve_opts.log, "operation log (JSON lines), replayed on start");
  serve->add_option("--host", serve_opts.host);
  serve->add_option("--port", serve_opts.port);

  SweepOptions sweep_opts;
  auto* sweep = app.add_subcommand("sweep", "prior hyper-parameter grid over a distance matrix");
  add_config_options(sweep, sweep_opts.cfg);
  sweep->add_option("--distances", sweep_opts.distances, "DCD1 file")->required()->check(CLI::ExistingFile);
  sweep->add_option("--truth", sweep_opts.truth, "ground-truth labels CSV")->check(CLI::ExistingFile);
  sweep->add_option("--report", sweep_opts.out, "write per-cell JSON here");

  CLI11_PARSE(app, argc, argv);
  try {
    const PipelineStage last[] = {PipelineStage::preprocess, PipelineStage::keypoints, PipelineStage::distances,
                                  PipelineStage::cluster};
    for (int s = 0; s < 4; ++s)
      if (stage_cmds[s]->parsed()) return cmd_stage(stage_opts[s], last[s]);
    if (cluster->parsed()) return cmd_cluster(cluster_opts);
    if (evaluate->parsed()) return cmd_evaluate(eval_opts);
    if (synth->parsed()) return cmd_synth(synth_opts);
    if (serve->parsed()) return cmd_serve(serve_opts);
    if (sweep->parsed()) return cmd_sweep(sweep_opts);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
