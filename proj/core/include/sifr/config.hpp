#pragma once

#include <cstdint>
#include <string>

#include "sifr/data.hpp"
#include "sifr/losses.hpp"
#include "sifr/networks.hpp"
#include "sifr/tensor.hpp"

namespace sifr {

/// Everything a run needs, resolved from defaults + config file + flags.
struct RunConfig {
  std::uint64_t seed = 1;
  std::string data_dir = "data";
  std::string out_dir = "out";
  std::string checkpoint;  // read by eval/bench, written by train
  std::string split = "eval";

  // model
  UNetConfig unet;
  TNetConfig tnet;
  SENetConfig senet;
  double mask_threshold = 0.5;

  // loss
  LossWeights weights;
  bool fine_tune_angle = false;  // false: naive smooth-L1 residual phase

  // training
  AdamConfig adam;
  std::size_t epochs = 10;
  std::size_t batch = 4;
  std::size_t max_steps = 0;  // 0 = epochs decide
  bool augment = true;
  double zshift = 1.0;
  double flip_prob = 0.5;
  std::string init_checkpoint;  // warm start when non-empty

  // data generation
  SyntheticConfig synth;
  std::size_t train_count = 500;
  std::size_t eval_count = 100;

  // evaluation
  std::string eval_preset = "fixed";  // fixed | kitti | sunrgbd
  double eval_threshold = 0.5;        // used by the fixed preset
  bool forty_point = false;
};

/// Applies one `key = value` assignment. Unknown keys or unparsable values
/// throw ConfigError naming the key.
void apply_config_entry(RunConfig& cfg, const std::string& key,
                        const std::string& value);

/// Line-oriented config: `key = value`, '#' comments, blank lines ignored.
RunConfig load_config(const std::string& path);
void apply_config_text(RunConfig& cfg, const std::string& text,
                       const std::string& origin);

/// All keys with their default values, in config-file syntax.
std::string dump_defaults();

/// The resolved config as a JSON object (string values), for report echoing.
std::string config_json(const RunConfig& cfg);

}  // namespace sifr
