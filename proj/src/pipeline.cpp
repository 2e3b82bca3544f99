#include "dieclust/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <omp.h>
#include <openssl/evp.h>

#include "dieclust/grid_io.hpp"
#include "dieclust/metrics.hpp"

namespace dieclust {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------- config

KernelConfig GpConfig::kernel_for(int height) const {
  KernelConfig k = KernelConfig::for_height(height, lengthscale_frac, n_keypoints);
  k.truncation_radius = truncation_factor * k.lengthscale;
  return k;
}

void GpConfig::validate() const {
  if (!(lengthscale_frac > 0.0) || lengthscale_frac > 0.5)
    throw std::invalid_argument("gp.lengthscale_frac must be in (0, 0.5]");
  if (truncation_factor < 3.0) throw std::invalid_argument("gp.truncation_factor must be >= 3");
  if (n_keypoints < 1) throw std::invalid_argument("gp.n_keypoints must be >= 1");
}

MatchingConfig MatchingParams::config_for(int height) const {
  MatchingConfig m = MatchingConfig::for_height(height);
  if (patch_radius > 0) m.patch_radius = patch_radius;
  m.ratio_threshold = ratio_threshold;
  m.distortion_bound = distortion_bound;
  m.rotation_gate_deg = rotation_gate_deg;
  m.procrustes_floor = procrustes_floor;
  return m;
}

void MatchingParams::validate() const {
  if (patch_radius < 0) throw std::invalid_argument("matching.patch_radius must be >= 0");
  MatchingConfig m = config_for(512);
  m.validate();
}

void ClusteringConfig::validate() const {
  prior.validate();
  mcmc.validate();
  if (init_k < 0) throw std::invalid_argument("clustering.init_k must be >= 0");
  if (salso_restarts < 1) throw std::invalid_argument("clustering.salso_restarts must be >= 1");
  if (!estimate_likelihood) likelihood.validate();
}

void PipelineConfig::validate() const {
  if (manifest.empty()) throw std::invalid_argument("pipeline.manifest is required");
  if (output_dir.empty()) throw std::invalid_argument("pipeline.output_dir is required");
  if (threads < 0) throw std::invalid_argument("pipeline.threads must be >= 0");
  preprocess.validate();
  gp.validate();
  matching.validate();
  clustering.validate();
}

namespace {

// Reads fields from a JSON object and rejects keys nobody asked for.
class Fields {
 public:
  Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j.is_object()) throw std::invalid_argument(where_ + " must be an object");
  }
  ~Fields() noexcept(false) {
    if (std::uncaught_exceptions()) return;
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw std::invalid_argument("unknown config key " + where_ + "." + k);
  }
  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (auto it = j_.find(key); it != j_.end()) {
      try {
        out = it->get<T>();
      } catch (const json::exception&) {
        throw std::invalid_argument("config key " + where_ + "." + key + " has the wrong type");
      }
    }
  }
  const json* sub(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

}  // namespace

json to_json(const PipelineConfig& c) {
  const auto& p = c.preprocess;
  const auto& m = c.matching;
  const auto& k = c.clustering;
  return json{
      {"pipeline",
       {{"manifest", c.manifest}, {"output_dir", c.output_dir}, {"threads", c.threads}, {"seed", c.seed}}},
      {"preprocess",
       {{"target_height", p.target_height},
        {"tv_weight_1", p.tv_weight_1},
        {"tv_weight_2", p.tv_weight_2},
        {"tv_max_iters", p.tv_max_iters},
        {"clahe_clip", p.clahe_clip},
        {"clahe_tiles", p.clahe_tiles},
        {"mask_radius_frac", p.mask_radius_frac}}},
      {"gp",
       {{"lengthscale_frac", c.gp.lengthscale_frac},
        {"truncation_factor", c.gp.truncation_factor},
        {"n_keypoints", c.gp.n_keypoints}}},
      {"matching",
       {{"patch_radius", m.patch_radius},
        {"ratio_threshold", m.ratio_threshold},
        {"distortion_bound", m.distortion_bound},
        {"rotation_gate_deg", m.rotation_gate_deg},
        {"procrustes_floor", m.procrustes_floor}}},
      {"clustering",
       {{"size_mean", k.prior.size_mean},
        {"size_variance", k.prior.size_variance},
        {"max_cluster_size", k.prior.max_cluster_size},
        {"iterations", k.mcmc.iterations},
        {"burn_in", k.mcmc.burn_in},
        {"thin", k.mcmc.thin},
        {"chains", k.mcmc.chains},
        {"log_every", k.mcmc.log_every},
        {"init_k", k.init_k},
        {"salso_restarts", k.salso_restarts},
        {"estimate_likelihood", k.estimate_likelihood},
        {"likelihood",
         {{"cohesion_shape", k.likelihood.cohesion_shape},
          {"cohesion_rate", k.likelihood.cohesion_rate},
          {"repulsion_shape", k.likelihood.repulsion_shape},
          {"repulsion_rate", k.likelihood.repulsion_rate}}}}},
  };
}

PipelineConfig pipeline_config_from_json(const json& j) {
  PipelineConfig c;
  Fields top(j, "config");
  if (const json* s = top.sub("pipeline")) {
    Fields f(*s, "pipeline");
    f.get("manifest", c.manifest);
    f.get("output_dir", c.output_dir);
    f.get("threads", c.threads);
    f.get("seed", c.seed);
  }
  if (const json* s = top.sub("preprocess")) {
    Fields f(*s, "preprocess");
    auto& p = c.preprocess;
    f.get("target_height", p.target_height);
    f.get("tv_weight_1", p.tv_weight_1);
    f.get("tv_weight_2", p.tv_weight_2);
    f.get("tv_max_iters", p.tv_max_iters);
    f.get("clahe_clip", p.clahe_clip);
    f.get("clahe_tiles", p.clahe_tiles);
    f.get("mask_radius_frac", p.mask_radius_frac);
  }
  if (const json* s = top.sub("gp")) {
    Fields f(*s, "gp");
    f.get("lengthscale_frac", c.gp.lengthscale_frac);
    f.get("truncation_factor", c.gp.truncation_factor);
    f.get("n_keypoints", c.gp.n_keypoints);
  }
  if (const json* s = top.sub("matching")) {
    Fields f(*s, "matching");
    auto& m = c.matching;
    f.get("patch_radius", m.patch_radius);
    f.get("ratio_threshold", m.ratio_threshold);
    f.get("distortion_bound", m.distortion_bound);
    f.get("rotation_gate_deg", m.rotation_gate_deg);
    f.get("procrustes_floor", m.procrustes_floor);
  }
  if (const json* s = top.sub("clustering")) {
    Fields f(*s, "clustering");
    auto& k = c.clustering;
    f.get("size_mean", k.prior.size_mean);
    f.get("size_variance", k.prior.size_variance);
    f.get("max_cluster_size", k.prior.max_cluster_size);
    f.get("iterations", k.mcmc.iterations);
    f.get("burn_in", k.mcmc.burn_in);
    f.get("thin", k.mcmc.thin);
    f.get("chains", k.mcmc.chains);
    f.get("log_every", k.mcmc.log_every);
    f.get("init_k", k.init_k);
    f.get("salso_restarts", k.salso_restarts);
    f.get("estimate_likelihood", k.estimate_likelihood);
    if (const json* l = f.sub("likelihood")) {
      Fields g(*l, "clustering.likelihood");
      g.get("cohesion_shape", k.likelihood.cohesion_shape);
      g.get("cohesion_rate", k.likelihood.cohesion_rate);
      g.get("repulsion_shape", k.likelihood.repulsion_shape);
      g.get("repulsion_rate", k.likelihood.repulsion_rate);
    }
  }
  return c;
}

PipelineConfig load_pipeline_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError("config " + path + ": " + e.what());
  }
  return pipeline_config_from_json(j);
}

// ---------------------------------------------------------------- hashing

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return out.str();
}

std::string sha256_hex(const std::string& text) {
  return sha256_hex(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

namespace {

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

std::string sha256_file(const std::string& path) { return sha256_hex(read_bytes(path)); }

// ---------------------------------------------------------------- manifest

std::vector<ManifestEntry> read_image_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest " + path);
  const fs::path base = fs::path(path).parent_path();
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty manifest " + path);
  std::vector<ManifestEntry> out;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cols.push_back(c);
    if (cols.size() < 2) throw FormatError("manifest line needs image_id,path: " + line);
    ManifestEntry e{cols[0], cols[1], 0};
    if (cols.size() > 2 && !cols[2].empty()) e.grade = std::stoi(cols[2]);
    if (fs::path(e.path).is_relative()) e.path = (base / e.path).string();
    if (!seen.insert(e.image_id).second) throw FormatError("duplicate image id " + e.image_id);
    out.push_back(std::move(e));
  }
  if (out.empty()) throw FormatError("manifest lists no images");
  return out;
}

PipelineError::PipelineError(std::string stage, std::vector<Failure> failures)
    : std::runtime_error([&] {
        std::string msg = "stage " + stage + " failed for " + std::to_string(failures.size()) + " image(s):";
        for (const auto& f : failures) msg += " [" + f.image_id + ": " + f.message + "]";
        return msg;
      }()),
      stage_(std::move(stage)),
      failures_(std::move(failures)) {}

// ---------------------------------------------------------------- stages

namespace {

json load_previous_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) return json::object();
  try {
    return json::parse(in);
  } catch (const json::parse_error&) {
    return json::object();
  }
}

// A cached record {"key":..., "outputs": {relpath: sha}} is reusable when
// the key matches and every output still hashes to the recorded value.
bool reusable(const json& record, const std::string& key, const fs::path& root) {
  if (!record.is_object() || record.value("key", "") != key) return false;
  const auto it = record.find("outputs");
  if (it == record.end() || !it->is_object()) return false;
  for (const auto& [rel, sha] : it->items()) {
    const fs::path p = root / rel;
    if (!fs::exists(p) || sha256_file(p.string()) != sha.get<std::string>()) return false;
  }
  return true;
}

json outputs_record(const std::string& key, const std::vector<std::string>& rels, const fs::path& root) {
  json outs = json::object();
  for (const auto& r : rels) outs[r] = sha256_file((root / r).string());
  return {{"key", key}, {"outputs", outs}};
}

const json& find_or_null(const json& j, std::initializer_list<const char*> path) {
  static const json null_json;
  const json* cur = &j;
  for (const char* k : path) {
    if (!cur->is_object()) return null_json;
    auto it = cur->find(k);
    if (it == cur->end()) return null_json;
    cur = &*it;
  }
  return *cur;
}

std::string safe_name(const std::string& id) {
  std::string s = id;
  for (char& c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) c = '_';
  return s;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace

ClusteringOutcome cluster_distances(const DistanceMatrix& d, const ClusteringConfig& cfg,
                                    std::uint64_t seed) {
  cfg.validate();
  const std::size_t n = d.size();
  if (n < 2) throw DegenerateInputError("clustering needs at least two items");
  ClusteringOutcome out;
  int k = cfg.init_k > 0 ? cfg.init_k : static_cast<int>(std::lround(n / cfg.prior.size_mean));
  k = std::clamp(k, 1, static_cast<int>(n));
  out.init = enforce_cluster_cap(d, kmedoids_init(d, k), cfg.prior.max_cluster_size);
  out.likelihood = cfg.estimate_likelihood ? estimate_likelihood_params(d, out.init) : cfg.likelihood;
  McmcConfig mcfg = cfg.mcmc;
  mcfg.seed = seed;
  out.mcmc = run_mcmc(d, cfg.prior, out.likelihood, out.init, mcfg);
  out.point = salso_point_estimate(out.mcmc.coclustering, cfg.salso_restarts, seed);
  return out;
}

std::vector<std::pair<double, double>> default_sweep_grid() {
  std::vector<std::pair<double, double>> g;
  for (double mu : {4.0, 5.0, 6.0, 7.0})
    for (double f : {2.4, 1.5}) g.emplace_back(mu, f * mu);
  return g;
}

std::vector<SweepCell> run_sweep(const DistanceMatrix& d, const ClusteringConfig& base,
                                 std::span<const std::pair<double, double>> grid,
                                 std::uint64_t seed, std::span<const int> truth) {
  if (!truth.empty() && truth.size() != d.size()) throw std::invalid_argument("truth labels do not match D");
  std::vector<SweepCell> cells;
  for (const auto& [mu, nu] : grid) {
    ClusteringConfig cfg = base;
    cfg.prior.size_mean = mu;
    cfg.prior.size_variance = nu;
    const auto out = cluster_distances(d, cfg, seed);
    SweepCell c{mu, nu, out.point.num_clusters()};
    if (!truth.empty()) {
      const auto& pred = out.point.labels();
      c.scored = true;
      c.nmi = nmi(truth, pred);
      c.ari = ari(truth, pred);
      const auto reports = class_report(truth, pred);
      const auto w = weighted_summary(reports);
      c.sensitivity = w.sensitivity;
      c.fdr = w.fdr;
    }
    cells.push_back(c);
  }
  return cells;
}

PipelineResult run_pipeline(const PipelineConfig& cfg, PipelineStage last) {
  cfg.validate();
  if (cfg.threads > 0) omp_set_num_threads(cfg.threads);
  const fs::path root = cfg.output_dir;
  for (const char* d : {"preprocessed", "weights", "keypoints"}) fs::create_directories(root / d);
  const json previous = load_previous_manifest(root / "manifest.json");

  const auto entries = read_image_manifest(cfg.manifest);
  const std::size_t n = entries.size();
  PipelineResult result;
  json manifest;
  json config_json = to_json(cfg);
  config_json["pipeline"].erase("output_dir");
  config_json["pipeline"].erase("threads");
  manifest["config"] = config_json;
  manifest["images"] = json::array();

  std::vector<std::string> source_sha(n);
  std::set<std::string> names;
  for (std::size_t i = 0; i < n; ++i) {
    if (!names.insert(safe_name(entries[i].image_id)).second)
      throw std::invalid_argument("image ids collide after filename sanitizing: " + entries[i].image_id);
    result.ids.push_back(entries[i].image_id);
    result.grades.push_back(entries[i].grade);
  }

  // Preprocessing and relief weights, per image.
  auto t0 = std::chrono::steady_clock::now();
  const std::string pre_cfg = config_json["preprocess"].dump();
  std::vector<std::string> pre_rel(n), w_rel(n), pre_key(n);
  std::vector<char> pre_cached(n, 0);
  std::vector<PipelineError::Failure> failures;
  std::vector<std::string> errors(n);
  #pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t i = 0; i < n; ++i) {
    try {
      const auto bytes = read_bytes(entries[i].path);
      source_sha[i] = sha256_hex(bytes);
      const std::string name = safe_name(entries[i].image_id);
      pre_rel[i] = "preprocessed/" + name + ".dcw";
      w_rel[i] = "weights/" + name + ".dcw";
      pre_key[i] = sha256_hex(source_sha[i] + pre_cfg);
      if (reusable(find_or_null(previous, {"stages", "preprocess", "items", entries[i].image_id.c_str()}),
                   pre_key[i], root)) {
        pre_cached[i] = 1;
        continue;
      }
      const GrayImage raw = load_and_normalize(bytes, cfg.preprocess.target_height);
      const GrayImage pre = preprocess(raw, cfg.preprocess);
      write_grid_file((root / pre_rel[i]).string(), pre);
      const GrayImage stored = read_grid_file((root / pre_rel[i]).string());
      const CircularMask m = default_mask(stored.width(), stored.height(), cfg.preprocess.mask_radius_frac);
      const WeightField w = apply_circular_mask(laplacian_relief(stored), m.center_x, m.center_y, m.radius);
      write_grid_file((root / w_rel[i]).string(), w.weights);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    if (!errors[i].empty()) failures.push_back({entries[i].image_id, errors[i]});
  if (!failures.empty()) throw PipelineError("preprocess", failures);
  json pre_items = json::object();
  for (std::size_t i = 0; i < n; ++i) {
    pre_items[entries[i].image_id] = outputs_record(pre_key[i], {pre_rel[i], w_rel[i]}, root);
    manifest["images"].push_back(
        {{"image_id", entries[i].image_id}, {"sha256", source_sha[i]}, {"grade", entries[i].grade}});
  }
  manifest["stages"]["preprocess"] = {{"items", pre_items}};
  result.stages.push_back({"preprocess", sha256_hex(pre_items.dump()),
                           std::all_of(pre_cached.begin(), pre_cached.end(), [](char c) { return c; }),
                           seconds_since(t0)});

  auto finish = [&]() {
    write_text(root / "manifest.json", manifest.dump(2) + "\n");
    result.manifest = std::move(manifest);
    return std::move(result);
  };
  if (last == PipelineStage::preprocess) return finish();

  // GP keypoints, per image.
  t0 = std::chrono::steady_clock::now();
  const std::string gp_cfg = config_json["gp"].dump() + config_json["preprocess"].dump();
  std::vector<std::string> kp_rel(n), kp_key(n), w_sha(n), pre_sha(n);
  std::vector<char> kp_cached(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const json& outs = pre_items.at(entries[i].image_id).at("outputs");
    pre_sha[i] = outs.at(pre_rel[i]).get<std::string>();
    w_sha[i] = outs.at(w_rel[i]).get<std::string>();
  }
  #pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t i = 0; i < n; ++i) {
    try {
      kp_rel[i] = "keypoints/" + safe_name(entries[i].image_id) + ".csv";
      kp_key[i] = sha256_hex(w_sha[i] + gp_cfg);
      if (reusable(find_or_null(previous, {"stages", "keypoints", "items", entries[i].image_id.c_str()}),
                   kp_key[i], root)) {
        kp_cached[i] = 1;
        continue;
      }
      WeightField w;
      w.weights = read_grid_file((root / w_rel[i]).string());
      w.mask = default_mask(w.width(), w.height(), cfg.preprocess.mask_radius_frac);
      w.masked = true;
      const KeypointSet kps = select_keypoints(w, cfg.gp.kernel_for(w.height()), entries[i].image_id);
      std::ofstream out(root / kp_rel[i]);
      write_keypoints_csv(out, std::span(&kps, 1));
      if (!out) throw std::runtime_error("cannot write " + kp_rel[i]);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    if (!errors[i].empty()) failures.push_back({entries[i].image_id, errors[i]});
  if (!failures.empty()) throw PipelineError("keypoints", failures);
  json kp_items = json::object();
  for (std::size_t i = 0; i < n; ++i) kp_items[entries[i].image_id] = outputs_record(kp_key[i], {kp_rel[i]}, root);
  manifest["stages"]["keypoints"] = {{"items", kp_items}};
  result.stages.push_back({"keypoints", sha256_hex(kp_items.dump()),
                           std::all_of(kp_cached.begin(), kp_cached.end(), [](char c) { return c; }),
                           seconds_since(t0)});

  if (last == PipelineStage::keypoints) return finish();

  // Pairwise dissimilarities.
  t0 = std::chrono::steady_clock::now();
  std::string dist_input = config_json["matching"].dump();
  for (std::size_t i = 0; i < n; ++i)
    dist_input += entries[i].image_id + ':' + pre_sha[i] + ':' +
                  kp_items.at(entries[i].image_id).at("outputs").at(kp_rel[i]).get<std::string>() + ';';
  const std::string dist_key = sha256_hex(dist_input);
  const std::vector<std::string> dist_outputs = {"distances.dcd", "distances.csv"};
  StageReport dist_report{"distances", dist_key, false, 0.0};
  if (reusable(find_or_null(previous, {"stages", "distances"}), dist_key, root)) {
    dist_report.skipped = true;
  } else {
    std::vector<ImageFeatures> features(n);
    #pragma omp parallel for schedule(dynamic, 1)
    for (std::size_t i = 0; i < n; ++i) {
      try {
        const GrayImage pre = read_grid_file((root / pre_rel[i]).string());
        std::ifstream in(root / kp_rel[i]);
        const auto sets = read_keypoints_csv(in);
        if (sets.size() != 1) throw FormatError("expected one keypoint set in " + kp_rel[i]);
        features[i] = extract_features(pre, sets[0], cfg.matching.config_for(pre.height()));
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
    for (std::size_t i = 0; i < n; ++i)
      if (!errors[i].empty()) failures.push_back({entries[i].image_id, errors[i]});
    if (!failures.empty()) throw PipelineError("distances", failures);
    const MatchingConfig mc = cfg.matching.config_for(cfg.preprocess.target_height);
    const auto scores = score_all_pairs(features, mc);
    DistanceMatrix dm = assemble_distance_matrix(scores, n, result.ids, mc.procrustes_floor);
    write_distance_matrix_file((root / "distances.dcd").string(), dm);
    std::ofstream csv(root / "distances.csv");
    write_distance_csv(csv, dm);
  }
  result.distances = read_distance_matrix_file((root / "distances.dcd").string());
  manifest["stages"]["distances"] = outputs_record(dist_key, dist_outputs, root);
  dist_report.seconds = seconds_since(t0);
  result.stages.push_back(dist_report);

  if (last == PipelineStage::distances) return finish();

  // Microclustering.
  t0 = std::chrono::steady_clock::now();
  const std::string cluster_key = sha256_hex(manifest["stages"]["distances"]["outputs"]["distances.dcd"].get<std::string>() +
                                             config_json["clustering"].dump() + std::to_string(cfg.seed));
  const std::vector<std::string> cluster_outputs = {"coclustering.dcq", "partition.csv", "chain.jsonl",
                                                    "clustering.json"};
  StageReport cluster_report{"cluster", cluster_key, false, 0.0};
  if (reusable(find_or_null(previous, {"stages", "cluster"}), cluster_key, root)) {
    cluster_report.skipped = true;
  } else {
    json summary;
    McmcResult mcmc;
    Partition point;
    LikelihoodParams like = cfg.clustering.likelihood;
    if (n < 2) {
      mcmc.coclustering = CoClusteringMatrix(n);
      point = Partition::single_cluster(n);
    } else {
      ClusteringOutcome out = cluster_distances(result.distances, cfg.clustering, cfg.seed);
      like = out.likelihood;
      mcmc = std::move(out.mcmc);
      point = std::move(out.point);
      summary["init_clusters"] = out.init.num_clusters();
      summary["retained_samples"] = mcmc.retained;
      summary["max_cluster_size_seen"] = mcmc.max_cluster_size_seen;
      summary["acceptance"] = {{"split", mcmc.stats.split.rate()},
                               {"merge", mcmc.stats.merge.rate()},
                               {"reallocate", mcmc.stats.reallocate.rate()},
                               {"capped", mcmc.stats.capped.proposed}};
    }
    summary["clusters"] = point.num_clusters();
    summary["likelihood"] = {{"cohesion_shape", like.cohesion_shape},
                             {"cohesion_rate", like.cohesion_rate},
                             {"repulsion_shape", like.repulsion_shape},
                             {"repulsion_rate", like.repulsion_rate}};
    {
      std::ofstream out(root / "coclustering.dcq", std::ios::binary);
      write_coclustering(out, mcmc.coclustering);
    }
    {
      std::ofstream out(root / "partition.csv");
      write_partition_csv(out, point, result.ids);
    }
    {
      std::ofstream out(root / "chain.jsonl");
      write_diagnostics_jsonl(out, mcmc.diagnostics);
    }
    write_text(root / "clustering.json", summary.dump(2) + "\n");
  }
  {
    std::ifstream in(root / "coclustering.dcq", std::ios::binary);
    result.coclustering = read_coclustering(in);
    std::ifstream pin(root / "partition.csv");
    std::vector<std::string> ids;
    result.partition = read_partition_csv(pin, ids);
    if (ids != result.ids) throw FormatError("partition.csv ids do not match the manifest");
    std::ifstream sin(root / "clustering.json");
    const json s = json::parse(sin);
    const auto& l = s.at("likelihood");
    result.likelihood = {l.at("cohesion_shape"), l.at("cohesion_rate"), l.at("repulsion_shape"),
                         l.at("repulsion_rate")};
  }
  manifest["stages"]["cluster"] = outputs_record(cluster_key, cluster_outputs, root);
  cluster_report.seconds = seconds_since(t0);
  result.stages.push_back(cluster_report);

  return finish();
}

}  // namespace dieclust
