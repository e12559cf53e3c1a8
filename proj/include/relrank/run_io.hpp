#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "relrank/active.hpp"
#include "relrank/data.hpp"
#include "relrank/nn.hpp"
#include "relrank/ranker.hpp"

namespace relrank::io {

/// Everything a run needs. `seed` is the master seed; sub-configs whose
/// seed was not given explicitly inherit it.
struct RunConfig {
  std::optional<std::filesystem::path> dataset;  // synthesize when absent
  data::SynthConfig synth;
  std::array<double, 3> split{0.6, 0.2, 0.2};
  active::ModelConfig model;
  rank::TrainConfig train;
  active::LoopConfig loop;
  double oracle_flip_probability = 0.0;
  std::uint64_t seed = 0;
  int port = 8080;
  std::string run_id = "run";
  std::optional<std::filesystem::path> ui_dir;

  /// Sets the master seed and every derived seed.
  void reseed(std::uint64_t master);
};

RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& config);
RunConfig load_config(const std::filesystem::path& path);

/// `RLRK` magic, format version, then shapes and little-endian doubles.
inline constexpr std::uint32_t kParamsFormatVersion = 1;
void save_params(const nn::NetworkParams& params, const std::filesystem::path& path);
nn::NetworkParams load_params(const std::filesystem::path& path);

std::string format_label(double c);

/// Writes a run directory:
///   config.json      the resolved RunConfig
///   pairs.csv        id_i,id_j,label,round,source  (one row per annotation)
///   selections.csv   round,id,variance
///   rounds.jsonl     one metrics record per training round
///   params-round-k.bin
/// Rows are appended and flushed as they happen, so an aborted run keeps
/// everything recorded up to the failure.
class RunDirectory : public active::RunSink {
 public:
  RunDirectory(std::filesystem::path root, const data::Dataset& dataset, const RunConfig& config);

  void on_label(const rank::RelativePair& pair, int round, active::Source source) override;
  void on_selection(int round, std::span<const SampleId> ids,
                    std::span<const std::optional<double>> variances) override;
  void on_round(const nlohmann::json& record) override;
  void on_params(int round, const nn::NetworkParams& params) override;

  const std::filesystem::path& root() const noexcept { return root_; }

 private:
  std::filesystem::path root_;
  const data::Dataset* dataset_;
  std::ofstream pairs_;
  std::ofstream selections_;
  std::ofstream rounds_;
};

struct PairRow {
  std::string first;
  std::string second;
  double label = 0.0;
  int round = 0;
  std::string source;
};
std::vector<PairRow> read_pairs_csv(const std::filesystem::path& path);

struct SelectionRow {
  int round = 0;
  std::string id;
  std::optional<double> variance;
};
std::vector<SelectionRow> read_selections_csv(const std::filesystem::path& path);

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);

/// Path of the last params snapshot in a run directory.
std::optional<std::filesystem::path> last_params_snapshot(const std::filesystem::path& run_dir);

}  // namespace relrank::io
