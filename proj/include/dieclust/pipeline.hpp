#ifndef DIECLUST_PIPELINE_HPP
#define DIECLUST_PIPELINE_HPP

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "dieclust/distance_matrix.hpp"
#include "dieclust/gp_keypoints.hpp"
#include "dieclust/imaging.hpp"
#include "dieclust/matching.hpp"
#include "dieclust/microclustering.hpp"
#include "dieclust/partition.hpp"

namespace dieclust {

struct GpConfig {
  double lengthscale_frac = 0.02;  ///< of the normalized image height
  double truncation_factor = 4.0;  ///< truncation radius in lengthscales
  int n_keypoints = 300;

  KernelConfig kernel_for(int height) const;
  void validate() const;
};

struct MatchingParams {
  int patch_radius = 0;  ///< 0: scale 24 px at height 512
  double ratio_threshold = 0.8;
  double distortion_bound = 0.15;
  double rotation_gate_deg = 20.0;
  double procrustes_floor = 1e-4;

  MatchingConfig config_for(int height) const;
  void validate() const;
};

struct ClusteringConfig {
  PriorConfig prior;
  McmcConfig mcmc;
  int init_k = 0;  ///< 0: round(N / size_mean)
  int salso_restarts = 20;
  bool estimate_likelihood = true;
  LikelihoodParams likelihood;  ///< used when estimate_likelihood is false

  void validate() const;
};

struct PipelineConfig {
  std::string manifest;    ///< CSV image_id,path[,grade]; paths relative to it
  std::string output_dir;
  PreprocessConfig preprocess;
  GpConfig gp;
  MatchingParams matching;
  ClusteringConfig clustering;
  int threads = 0;         ///< 0: OpenMP default
  std::uint64_t seed = 1;  ///< overrides clustering.mcmc.seed

  void validate() const;
};

nlohmann::json to_json(const PipelineConfig& cfg);
/// Missing keys keep their defaults; unknown keys are an error.
PipelineConfig pipeline_config_from_json(const nlohmann::json& j);
PipelineConfig load_pipeline_config(const std::string& path);

struct ManifestEntry {
  std::string image_id;
  std::string path;  ///< absolute or relative to the manifest directory
  int grade = 0;     ///< 0: unknown
};

std::vector<ManifestEntry> read_image_manifest(const std::string& path);

/// One or more images failed in a stage.
class PipelineError : public std::runtime_error {
 public:
  struct Failure {
    std::string image_id;
    std::string message;
  };
  PipelineError(std::string stage, std::vector<Failure> failures);
  const std::string& stage() const { return stage_; }
  const std::vector<Failure>& failures() const { return failures_; }

 private:
  std::string stage_;
  std::vector<Failure> failures_;
};

struct StageReport {
  std::string name;
  std::string key;  ///< content hash of the stage inputs and config
  bool skipped = false;
  double seconds = 0.0;
};

struct PipelineResult {
  std::vector<std::string> ids;
  std::vector<int> grades;
  DistanceMatrix distances;
  CoClusteringMatrix coclustering;
  Partition partition;
  LikelihoodParams likelihood;
  std::vector<StageReport> stages;
  nlohmann::json manifest;  ///< as written to <output_dir>/manifest.json
};

enum class PipelineStage { preprocess, keypoints, distances, cluster };

/// Runs the stages up to and including `last`. A stage whose key and
/// recorded output hashes match the existing manifest is loaded from disk.
/// Outputs in <output_dir>: preprocessed/ and weights/ (DCW1 grids),
/// keypoints/ (CSV), distances.dcd and .csv, coclustering.dcq,
/// partition.csv, chain.jsonl, clustering.json, manifest.json.
PipelineResult run_pipeline(const PipelineConfig& cfg, PipelineStage last = PipelineStage::cluster);

struct ClusteringOutcome {
  Partition init;
  LikelihoodParams likelihood;
  McmcResult mcmc;
  Partition point;
};

/// k-medoids start (capped), likelihood fit, chaperones chain, SALSO.
ClusteringOutcome cluster_distances(const DistanceMatrix& d, const ClusteringConfig& cfg,
                                    std::uint64_t seed);

struct SweepCell {
  double size_mean = 0.0;
  double size_variance = 0.0;
  int clusters = 0;
  bool scored = false;  ///< metrics below are set only with ground truth
  double nmi = 0.0;
  double ari = 0.0;
  double sensitivity = 0.0;  ///< class-size weighted
  double fdr = 0.0;
};

/// mu in {4,5,6,7}, nu in {2.4 mu, 1.5 mu}.
std::vector<std::pair<double, double>> default_sweep_grid();

/// Re-clusters `d` once per (mu, nu) cell with everything else from `base`.
/// `truth` may be empty.
std::vector<SweepCell> run_sweep(const DistanceMatrix& d, const ClusteringConfig& base,
                                 std::span<const std::pair<double, double>> grid,
                                 std::uint64_t seed, std::span<const int> truth);

std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(const std::string& text);
std::string sha256_file(const std::string& path);

}  // namespace dieclust

#endif
