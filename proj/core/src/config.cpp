#include "truthsr/config.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace truthsr {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& what) { throw DataError("run config: " + what); }

template <typename T>
T as(const json& j, const char* key, const char* kind, bool (json::*is)() const) {
  if (!((j.*is)())) bad(std::string("\"") + key + "\" must be " + kind);
  return j.get<T>();
}

int as_int(const json& j, const char* key) {
  if (!j.is_number_integer()) bad(std::string("\"") + key + "\" must be an integer");
  return j.get<int>();
}

double as_double(const json& j, const char* key) {
  if (!j.is_number()) bad(std::string("\"") + key + "\" must be a number");
  return j.get<double>();
}

void apply_keys(RunConfig& cfg, const json& doc) {
  if (!doc.is_object()) bad("document must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (key == "lr") cfg.train.lr = as_double(value, "lr");
    else if (key == "epochs") cfg.train.epochs = as_int(value, "epochs");
    else if (key == "batch_size") cfg.train.batch_size = as_int(value, "batch_size");
    else if (key == "eval_every") cfg.train.eval_every = as_int(value, "eval_every");
    else if (key == "seed") {
      if (!value.is_number_integer()) bad("\"seed\" must be an integer");
      cfg.train.seed = value.get<std::uint64_t>();
    }
    else if (key == "lambda") cfg.train.model.lambda = as_double(value, "lambda");
    else if (key == "eps") cfg.train.model.eps = as_double(value, "eps");
    else if (key == "d_i") cfg.train.model.d_i = as_int(value, "d_i");
    else if (key == "d_t") cfg.train.model.d_t = as_int(value, "d_t");
    else if (key == "d_v") cfg.train.model.d_v = as_int(value, "d_v");
    else if (key == "d_m") cfg.train.model.d_m = as_int(value, "d_m");
    else if (key == "d_h") cfg.train.model.d_h = as_int(value, "d_h");
    else if (key == "layers") cfg.train.model.layers = as_int(value, "layers");
    else if (key == "max_len") cfg.train.model.max_len = as_int(value, "max_len");
    else if (key == "bank_max") cfg.train.model.bank_max = as_int(value, "bank_max");
    else if (key == "views") {
      cfg.train.model.views =
          views_from_string(as<std::string>(value, "views", "a string", &json::is_string));
    }
    else if (key == "coattention") {
      cfg.train.model.coattention =
          as<bool>(value, "coattention", "a boolean", &json::is_boolean);
    }
    else if (key == "head") {
      cfg.train.model.head =
          head_from_string(as<std::string>(value, "head", "a string", &json::is_string));
    }
    else if (key == "k") {
      if (!value.is_array() || value.empty()) bad("\"k\" must be a non-empty array");
      cfg.ks.clear();
      for (const auto& e : value) cfg.ks.push_back(as_int(e, "k entry"));
    }
    else if (key == "mask_history") {
      cfg.mask_history = as<bool>(value, "mask_history", "a boolean", &json::is_boolean);
    }
    else if (key == "buckets") cfg.buckets = as_int(value, "buckets");
    else if (key == "data") cfg.data = as<std::string>(value, "data", "a string", &json::is_string);
    else if (key == "text_embeddings") {
      cfg.text_embeddings =
          as<std::string>(value, "text_embeddings", "a string", &json::is_string);
    }
    else if (key == "image_embeddings") {
      cfg.image_embeddings =
          as<std::string>(value, "image_embeddings", "a string", &json::is_string);
    }
    else if (key == "checkpoint") {
      cfg.checkpoint = as<std::string>(value, "checkpoint", "a string", &json::is_string);
    }
    else if (key == "out") cfg.out = as<std::string>(value, "out", "a string", &json::is_string);
    else bad("unknown key \"" + key + "\"");
  }
}

}  // namespace

RunConfig run_config_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("run config: invalid JSON: ") + e.what());
  }
  RunConfig cfg;
  apply_keys(cfg, doc);
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return run_config_from_json(buf.str());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::string run_config_to_json(const RunConfig& cfg) {
  json doc;
  doc["lr"] = cfg.train.lr;
  doc["epochs"] = cfg.train.epochs;
  doc["batch_size"] = cfg.train.batch_size;
  doc["eval_every"] = cfg.train.eval_every;
  doc["seed"] = cfg.train.seed;
  doc["lambda"] = cfg.train.model.lambda;
  doc["eps"] = cfg.train.model.eps;
  doc["d_i"] = cfg.train.model.d_i;
  doc["d_t"] = cfg.train.model.d_t;
  doc["d_v"] = cfg.train.model.d_v;
  doc["d_m"] = cfg.train.model.d_m;
  doc["d_h"] = cfg.train.model.d_h;
  doc["layers"] = cfg.train.model.layers;
  doc["max_len"] = cfg.train.model.max_len;
  doc["bank_max"] = cfg.train.model.bank_max;
  doc["views"] = to_string(cfg.train.model.views);
  doc["coattention"] = cfg.train.model.coattention;
  doc["head"] = to_string(cfg.train.model.head);
  doc["k"] = cfg.ks;
  doc["mask_history"] = cfg.mask_history;
  doc["buckets"] = cfg.buckets;
  doc["data"] = cfg.data;
  doc["text_embeddings"] = cfg.text_embeddings;
  doc["image_embeddings"] = cfg.image_embeddings;
  doc["checkpoint"] = cfg.checkpoint;
  doc["out"] = cfg.out;
  return doc.dump();
}

std::string model_config_to_json(const ModelConfig& cfg) {
  json doc;
  doc["item_count"] = cfg.item_count;
  doc["d_i"] = cfg.d_i;
  doc["d_t"] = cfg.d_t;
  doc["d_v"] = cfg.d_v;
  doc["d_m"] = cfg.d_m;
  doc["d_h"] = cfg.d_h;
  doc["layers"] = cfg.layers;
  doc["max_len"] = cfg.max_len;
  doc["bank_max"] = cfg.bank_max;
  doc["lambda"] = cfg.lambda;
  doc["eps"] = cfg.eps;
  doc["views"] = to_string(cfg.views);
  doc["coattention"] = cfg.coattention;
  doc["head"] = to_string(cfg.head);
  return doc.dump();
}

ModelConfig model_config_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("model config: invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("model config: document must be a JSON object");
  ModelConfig cfg;
  auto geti = [&doc](const char* key, int& dst) {
    if (!doc.contains(key) || !doc[key].is_number_integer()) {
      throw ParseError(std::string("model config: missing integer \"") + key + "\"");
    }
    dst = doc[key].get<int>();
  };
  geti("item_count", cfg.item_count);
  geti("d_i", cfg.d_i);
  geti("d_t", cfg.d_t);
  geti("d_v", cfg.d_v);
  geti("d_m", cfg.d_m);
  geti("d_h", cfg.d_h);
  geti("layers", cfg.layers);
  geti("max_len", cfg.max_len);
  geti("bank_max", cfg.bank_max);
  for (const char* key : {"lambda", "eps", "views", "coattention", "head"}) {
    if (!doc.contains(key)) throw ParseError(std::string("model config: missing \"") + key + "\"");
  }
  if (!doc["lambda"].is_number() || !doc["eps"].is_number()) {
    throw ParseError("model config: lambda and eps must be numbers");
  }
  cfg.lambda = doc["lambda"].get<double>();
  cfg.eps = doc["eps"].get<double>();
  if (!doc["views"].is_string() || !doc["head"].is_string() || !doc["coattention"].is_boolean()) {
    throw ParseError("model config: bad views/coattention/head types");
  }
  cfg.views = views_from_string(doc["views"].get<std::string>());
  cfg.head = head_from_string(doc["head"].get<std::string>());
  cfg.coattention = doc["coattention"].get<bool>();
  cfg.validate();
  return cfg;
}

}  // namespace truthsr
