#include "sifr/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "json.hpp"
#include "sifr/errors.hpp"

namespace sifr {
namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing junk");
    return d;
  } catch (const std::exception&) {
    throw ConfigError(key + ": cannot parse '" + v + "' as a number");
  }
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size())
    throw ConfigError(key + ": cannot parse '" + v + "' as an integer");
  return out;
}

std::size_t to_size(const std::string& key, const std::string& v) {
  return static_cast<std::size_t>(to_u64(key, v));
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": cannot parse '" + v + "' as a bool");
}

std::vector<std::size_t> to_list(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty())
      throw ConfigError(key + ": empty element in list '" + v + "'");
    out.push_back(to_size(key, item));
  }
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

std::string list_str(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

std::string num_str(double v) {
  std::ostringstream ss;
  ss << v;
  return ss.str();
}

struct Entry {
  const char* key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

// One row per key keeps apply/dump/echo in lockstep.
const std::vector<Entry>& table() {
  static const std::vector<Entry> t = []() {
    std::vector<Entry> e;
    auto add = [&](const char* key, auto setter, auto getter) {
      e.push_back({key,
                   [key, setter](RunConfig& c, const std::string& v) {
                     setter(c, std::string(key), v);
                   },
                   getter});
    };

    auto size_field = [&](const char* key, std::size_t RunConfig::* f) {
      add(key,
          [f](RunConfig& c, const std::string& k, const std::string& v) {
            c.*f = to_size(k, v);
          },
          [f](const RunConfig& c) { return std::to_string(c.*f); });
    };
    auto double_field = [&](const char* key, double RunConfig::* f) {
      add(key,
          [f](RunConfig& c, const std::string& k, const std::string& v) {
            c.*f = to_double(k, v);
          },
          [f](const RunConfig& c) { return num_str(c.*f); });
    };
    auto bool_field = [&](const char* key, bool RunConfig::* f) {
      add(key,
          [f](RunConfig& c, const std::string& k, const std::string& v) {
            c.*f = to_bool(k, v);
          },
          [f](const RunConfig& c) { return c.*f ? "true" : "false"; });
    };
    auto string_field = [&](const char* key, std::string RunConfig::* f) {
      add(key,
          [f](RunConfig& c, const std::string&, const std::string& v) {
            c.*f = v;
          },
          [f](const RunConfig& c) { return c.*f; });
    };

    add("seed",
        [](RunConfig& c, const std::string& k, const std::string& v) {
          c.seed = to_u64(k, v);
        },
        [](const RunConfig& c) { return std::to_string(c.seed); });
    string_field("data.dir", &RunConfig::data_dir);
    string_field("out.dir", &RunConfig::out_dir);

    // data generation
    add("data.classes",
        [](RunConfig& c, const std::string& k, const std::string& v) {
          const std::size_t n = to_size(k, v);
          const auto all = default_synthetic_classes();
          if (n == 0 || n > all.size())
            throw ConfigError(k + ": class count must be in [1, " +
                              std::to_string(all.size()) + "]");
          c.synth.classes.assign(all.begin(), all.begin() + n);
        },
        [](const RunConfig& c) {
          return std::to_string(c.synth.classes.size());
        });
    add("data.points",
        [](RunConfig& c, const std::string& k, const std::string& v) {
          c.synth.points_per_sample = to_size(k, v);
        },
        [](const RunConfig& c) {
          return std::to_string(c.synth.points_per_sample);
        });
    auto synth_double = [&](const char* key, double SyntheticConfig::* f) {
      add(key,
          [f](RunConfig& c, const std::string& k, const std::string& v) {
            c.synth.*f = to_double(k, v);
          },
          [f](const RunConfig& c) { return num_str(c.synth.*f); });
    };
    synth_double("data.clutter", &SyntheticConfig::clutter_fraction);
    synth_double("data.depth_min", &SyntheticConfig::depth_min);
    synth_double("data.depth_max", &SyntheticConfig::depth_max);
    synth_double("data.lateral_sigma", &SyntheticConfig::lateral_sigma);
    synth_double("data.vertical_sigma", &SyntheticConfig::vertical_sigma);
    synth_double("data.front_boost", &SyntheticConfig::front_face_boost);
    synth_double("data.heading_sigma", &SyntheticConfig::heading_sigma);
    add("data.heading",
        [](RunConfig& c, const std::string& k, const std::string& v) {
          if (v == "uniform")
            c.synth.heading = HeadingModel::kUniform;
          else if (v == "antipodal")
            c.synth.heading = HeadingModel::kAntipodal;
          else
            throw ConfigError(k + ": expected 'uniform' or 'antipodal'");
        },
        [](const RunConfig& c) {
          return c.synth.heading == HeadingModel::kUniform
                     ? std::string("uniform")
                     : std::string("antipodal");
        });
    size_field("data.train_count", &RunConfig::train_count);
    size_field("data.eval_count", &RunConfig::eval_count);

    // model widths
    auto unet_size = [&](const char* key, std::size_t UNetConfig::* f) {
      add(key,
          [f](RunConfig& c, const std::string& k, const std::string& v) {
            c.unet.*f = to_size(k, v);
          },
          [f](const RunConfig& c) { return std::to_string(c.unet.*f); });
    };
    auto unet_double = [&](const char* key, double UNetConfig::* f) {
      add(key,
          [f](RunConfig& c, const std::string& k, const std::string& v) {
            c.unet.*f = to_double(k, v);
          },
          [f](const RunConfig& c) { return num_str(c.unet.*f); });
    };
    auto unet_list = [&](const char* key,
                         std::vector<std::size_t> UNetConfig::* f) {
      add(key,
          [f](RunConfig& c, const std::string& k, const std::string& v) {
            c.unet.*f = to_list(k, v);
          },
          [f](const RunConfig& c) { return list_str(c.unet.*f); });
    };
    unet_size("model.sa1_centroids", &UNetConfig::sa1_centroids);
    unet_double("model.sa1_radius", &UNetConfig::sa1_radius);
    unet_size("model.sa1_group", &UNetConfig::sa1_group);
    unet_list("model.sa1_mlp", &UNetConfig::sa1_mlp);
    unet_size("model.sa2_centroids", &UNetConfig::sa2_centroids);
    unet_double("model.sa2_radius", &UNetConfig::sa2_radius);
    unet_size("model.sa2_group", &UNetConfig::sa2_group);
    unet_list("model.sa2_mlp", &UNetConfig::sa2_mlp);
    unet_size("model.sift_width", &UNetConfig::sift_width);
    unet_list("model.global_mlp", &UNetConfig::global_mlp);
    unet_list("model.fp_mlp", &UNetConfig::fp_widths);
    unet_size("model.head_hidden", &UNetConfig::head_hidden);

    add("model.tnet_mlp",
        [](RunConfig& c, const std::string& k, const std::string& v) {
          c.tnet.sa_mlp = to_list(k, v);
        },
        [](const RunConfig& c) { return list_str(c.tnet.sa_mlp); });
    add("model.tnet_hidden",
        [](RunConfig& c, const std::string& k, const std::string& v) {
          c.tnet.hidden = to_size(k, v);
        },
        [](const RunConfig& c) { return std::to_string(c.tnet.hidden); });

    auto senet_size = [&](const char* key, std::size_t SENetConfig::* f) {
      add(key,
          [f](RunConfig& c, const std::string& k, const std::string& v) {
            c.senet.*f = to_size(k, v);
          },
          [f](const RunConfig& c) { return std::to_string(c.senet.*f); });
    };
    senet_size("model.conv1", &SENetConfig::conv1);
    senet_size("model.conv2", &SENetConfig::conv2);
    senet_size("model.conv3", &SENetConfig::conv3);
    senet_size("model.se_r", &SENetConfig::se_r);
    senet_size("model.lift", &SENetConfig::lift);
    senet_size("model.fc1", &SENetConfig::fc1);
    senet_size("model.fc2", &SENetConfig::fc2);
    senet_size("model.ns", &SENetConfig::ns);
    senet_size("model.nh", &SENetConfig::nh);
    double_field("model.mask_threshold", &RunConfig::mask_threshold);

    // loss
    add("loss.lambda",
        [](RunConfig& c, const std::string& k, const std::string& v) {
          c.weights.lambda = to_double(k, v);
        },
        [](const RunConfig& c) { return num_str(c.weights.lambda); });
    add("loss.gamma",
        [](RunConfig& c, const std::string& k, const std::string& v) {
          c.weights.gamma = to_double(k, v);
        },
        [](const RunConfig& c) { return num_str(c.weights.gamma); });
    bool_field("loss.fine_tune_angle", &RunConfig::fine_tune_angle);

    // optimizer / schedule
    add("train.lr",
        [](RunConfig& c, const std::string& k, const std::string& v) {
          c.adam.lr = to_double(k, v);
        },
        [](const RunConfig& c) { return num_str(c.adam.lr); });
    add("train.beta1",
        [](RunConfig& c, const std::string& k, const std::string& v) {
          c.adam.beta1 = to_double(k, v);
        },
        [](const RunConfig& c) { return num_str(c.adam.beta1); });
    add("train.beta2",
        [](RunConfig& c, const std::string& k, const std::string& v) {
          c.adam.beta2 = to_double(k, v);
        },
        [](const RunConfig& c) { return num_str(c.adam.beta2); });
    size_field("train.epochs", &RunConfig::epochs);
    size_field("train.batch", &RunConfig::batch);
    size_field("train.max_steps", &RunConfig::max_steps);
    bool_field("train.augment", &RunConfig::augment);
    double_field("train.zshift", &RunConfig::zshift);
    double_field("train.flip_prob", &RunConfig::flip_prob);
    string_field("train.init_checkpoint", &RunConfig::init_checkpoint);

    // evaluation
    add("eval.preset",
        [](RunConfig& c, const std::string& k, const std::string& v) {
          if (v != "fixed" && v != "kitti" && v != "sunrgbd")
            throw ConfigError(k + ": expected 'fixed', 'kitti' or 'sunrgbd'");
          c.eval_preset = v;
        },
        [](const RunConfig& c) { return c.eval_preset; });
    double_field("eval.threshold", &RunConfig::eval_threshold);
    bool_field("eval.forty_point", &RunConfig::forty_point);

    return e;
  }();
  return t;
}

}  // namespace

void apply_config_entry(RunConfig& cfg, const std::string& key,
                        const std::string& value) {
  for (const Entry& e : table()) {
    if (key == e.key) {
      e.set(cfg, value);
      // Keep the class count flowing into the segmentation net.
      cfg.unet.num_classes = cfg.synth.classes.size();
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

void apply_config_text(RunConfig& cfg, const std::string& text,
                       const std::string& origin) {
  std::stringstream ss(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) +
                        ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    apply_config_entry(cfg, key, value);
  }
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config file '" + path + "' not readable");
  std::stringstream buf;
  buf << in.rdbuf();
  RunConfig cfg;
  apply_config_text(cfg, buf.str(), path);
  return cfg;
}

std::string dump_defaults() {
  const RunConfig def;
  std::string out;
  for (const Entry& e : table()) {
    out += e.key;
    out += " = ";
    out += e.get(def);
    out += "\n";
  }
  return out;
}

std::string config_json(const RunConfig& cfg) {
  nlohmann::json j = nlohmann::json::object();
  for (const Entry& e : table()) j[e.key] = e.get(cfg);
  return j.dump();
}

}  // namespace sifr
