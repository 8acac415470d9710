#include "srkit/config.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

#include "srkit/io.hpp"

namespace srkit {

using nlohmann::json;

namespace {

const std::set<std::string> kTopKeys = {
    "stage_channels", "image_channels", "image_size", "classes", "sr_insert", "sr", "dropout_kind", "dropout_p",
    "lr0", "momentum", "weight_decay", "lr_decay_factor", "decay_epochs", "epochs", "batch",
    "early_stop_patience", "flip_augment", "decay_memory", "seed", "per_class_train", "per_class_test",
    "noise_sigma", "data_seed"};
const std::set<std::string> kSrKeys = {"u", "p", "hidden_relu", "outside_grid_ok", "c", "h", "w"};

template <typename T>
T get_as(const json& j, const std::string& key) {
  try {
    if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
      if (!j.is_number_integer()) throw ConfigError("");
      if (j.get<long long>() < 0) throw ConfigError("");
    } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
      if (!j.is_number_integer()) throw ConfigError("");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!j.is_number()) throw ConfigError("");
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!j.is_boolean()) throw ConfigError("");
    }
    return j.get<T>();
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' has an invalid value: " + j.dump());
  }
}

template <typename T>
void read(const json& obj, const std::string& key, T& dst) {
  if (auto it = obj.find(key); it != obj.end()) dst = get_as<T>(*it, key);
}

ops::DropoutKind parse_dropout(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "none") return ops::DropoutKind::none;
    if (s == "element") return ops::DropoutKind::element;
    if (s == "channel") return ops::DropoutKind::channel;
  }
  throw ConfigError("config key 'dropout_kind' must be \"none\", \"element\" or \"channel\", got " + j.dump());
}

const char* dropout_name(ops::DropoutKind k) {
  switch (k) {
    case ops::DropoutKind::element: return "element";
    case ops::DropoutKind::channel: return "channel";
    default: return "none";
  }
}

// Re-raise a validation failure so the message always names the key at fault.
template <typename F>
void validated(const char* key, F&& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    if (msg.find(key) != std::string::npos) throw;
    throw ConfigError(std::string("config key '") + key + "': " + msg);
  }
}

}  // namespace

std::optional<SRConfig> RunConfig::sr_block() const {
  if (host.sr_insert) return host.resolved_sr();
  if (sr_dims_given) return host.sr;
  return std::nullopt;
}

void RunConfig::validate() const {
  validated("stage_channels", [&] { host.validate(); });
  if (sr_dims_given && !host.sr_insert) validated("sr", [&] { host.sr.validate(); });
  validated("lr0", [&] { train.validate(); });
  validated("per_class_train", [&] { synth.validate(); });
}

RunConfig parse_run_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, _] : doc.items()) {
    if (!kTopKeys.contains(key)) throw ConfigError("unknown config key '" + key + "'");
  }

  RunConfig rc;
  HostConfig& h = rc.host;
  if (auto it = doc.find("stage_channels"); it != doc.end()) {
    if (!it->is_array() || it->size() != 4) throw ConfigError("config key 'stage_channels' must be an array of 4 counts");
    for (std::size_t k = 0; k < 4; ++k) h.stage_channels[k] = get_as<std::size_t>((*it)[k], "stage_channels");
  }
  std::size_t image_size = h.in_h;
  read(doc, "image_channels", h.in_c);
  read(doc, "image_size", image_size);
  h.in_h = h.in_w = image_size;
  read(doc, "classes", h.classes);
  if (auto it = doc.find("sr_insert"); it != doc.end() && !it->is_null()) h.sr_insert = get_as<int>(*it, "sr_insert");
  if (auto it = doc.find("dropout_kind"); it != doc.end()) h.dropout_kind = parse_dropout(*it);
  read(doc, "dropout_p", h.dropout_p);

  if (auto it = doc.find("sr"); it != doc.end() && !it->is_null()) {
    if (!it->is_object()) throw ConfigError("config key 'sr' must be an object");
    for (const auto& [key, _] : it->items()) {
      if (!kSrKeys.contains(key)) throw ConfigError("unknown config key 'sr." + key + "'");
    }
    read(*it, "u", h.sr.u);
    read(*it, "p", h.sr.p);
    read(*it, "hidden_relu", h.sr.hidden_relu);
    read(*it, "outside_grid_ok", h.sr.outside_grid_ok);
    const int dims = static_cast<int>(it->contains("c")) + it->contains("h") + it->contains("w");
    if (dims != 0 && dims != 3) throw ConfigError("config key 'sr': give all of c, h, w or none");
    if (dims == 3) {
      rc.sr_dims_given = true;
      read(*it, "c", h.sr.c);
      read(*it, "h", h.sr.h);
      read(*it, "w", h.sr.w);
    }
  }

  TrainConfig& t = rc.train;
  read(doc, "lr0", t.lr0);
  read(doc, "momentum", t.momentum);
  read(doc, "weight_decay", t.weight_decay);
  read(doc, "lr_decay_factor", t.lr_decay_factor);
  if (auto it = doc.find("decay_epochs"); it != doc.end() && !it->is_null()) {
    if (!it->is_array()) throw ConfigError("config key 'decay_epochs' must be an array");
    std::vector<int> d;
    for (const auto& e : *it) d.push_back(get_as<int>(e, "decay_epochs"));
    t.decay_epochs = d;
  }
  read(doc, "epochs", t.epochs);
  read(doc, "batch", t.batch);
  read(doc, "early_stop_patience", t.early_stop_patience);
  read(doc, "flip_augment", t.flip_augment);
  read(doc, "decay_memory", t.decay_memory);
  read(doc, "seed", t.seed);

  SynthSpec& s = rc.synth;
  read(doc, "per_class_train", s.per_class_train);
  read(doc, "per_class_test", s.per_class_test);
  read(doc, "noise_sigma", s.noise_sigma);
  read(doc, "data_seed", s.seed);
  s.classes = h.classes;
  s.image_c = h.in_c;
  s.image_h = h.in_h;
  s.image_w = h.in_w;

  if (rc.sr_dims_given && h.sr_insert) {
    const Shape st = h.stage_shape(*h.sr_insert);
    if (h.sr.c != st.c || h.sr.h != st.h || h.sr.w != st.w) {
      throw ConfigError("config key 'sr': c/h/w = " + std::to_string(h.sr.c) + "/" + std::to_string(h.sr.h) + "/" +
                        std::to_string(h.sr.w) + " do not match stage " + std::to_string(*h.sr_insert) +
                        " output " + st.str());
    }
  }
  rc.validate();
  return rc;
}

RunConfig load_run_config(const std::string& path) { return parse_run_config(read_file(path)); }

std::string run_config_json(const RunConfig& rc) {
  const HostConfig& h = rc.host;
  json j;
  j["stage_channels"] = h.stage_channels;
  j["image_channels"] = h.in_c;
  j["image_size"] = h.in_h;
  j["classes"] = h.classes;
  j["sr_insert"] = h.sr_insert ? json(*h.sr_insert) : json(nullptr);
  json sr = {{"u", h.sr.u}, {"p", h.sr.p}, {"hidden_relu", h.sr.hidden_relu}, {"outside_grid_ok", h.sr.outside_grid_ok}};
  if (auto blk = rc.sr_block()) {
    sr["c"] = blk->c;
    sr["h"] = blk->h;
    sr["w"] = blk->w;
  }
  j["sr"] = sr;
  j["dropout_kind"] = dropout_name(h.dropout_kind);
  j["dropout_p"] = h.dropout_p;
  const TrainConfig& t = rc.train;
  j["lr0"] = t.lr0;
  j["momentum"] = t.momentum;
  j["weight_decay"] = t.weight_decay;
  j["lr_decay_factor"] = t.lr_decay_factor;
  j["decay_epochs"] = t.decay_epochs ? json(*t.decay_epochs) : json(nullptr);
  j["epochs"] = t.epochs;
  j["batch"] = t.batch;
  j["early_stop_patience"] = t.early_stop_patience;
  j["flip_augment"] = t.flip_augment;
  j["decay_memory"] = t.decay_memory;
  j["seed"] = t.seed;
  j["per_class_train"] = rc.synth.per_class_train;
  j["per_class_test"] = rc.synth.per_class_test;
  j["noise_sigma"] = rc.synth.noise_sigma;
  j["data_seed"] = rc.synth.seed;
  return j.dump(2);
}

}  // namespace srkit
