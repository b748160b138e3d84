#pragma once

#include "truthsr/train.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace truthsr {

/// Full run configuration: training hyperparameters, evaluation settings,
/// and optional input/output paths. Loaded from a JSON document; unknown
/// keys are rejected. Command-line flags override file values.
struct RunConfig {
  TrainConfig train;
  std::vector<int> ks{10, 20};
  bool mask_history = false;
  int buckets = 5;

  std::string data;              // interactions .jsonl (or a synth output dir)
  std::string text_embeddings;   // .tsrv file
  std::string image_embeddings;  // .tsrv file
  std::string checkpoint;        // model file
  std::string out;               // output path

  void validate() const {
    train.validate();
    check_data(!ks.empty(), "run config: k list must not be empty");
    for (int k : ks) check_data(k >= 1, "run config: k values must be >= 1");
    check_data(buckets >= 2, "run config: buckets must be >= 2");
  }
};

RunConfig run_config_from_json(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);

/// One-line JSON of every effective setting; printing it makes a run
/// reproducible from its own output.
std::string run_config_to_json(const RunConfig& cfg);

/// Model-shape (de)serialization used inside checkpoints.
std::string model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const std::string& text);

}  // namespace truthsr
