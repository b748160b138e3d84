#include "truthsr/checkpoint.hpp"

#include "truthsr/config.hpp"

#include <json.hpp>

#include <bit>
#include <cstring>
#include <fstream>

namespace truthsr {

namespace {

constexpr char kMagic[] = "TSRM1\n";
constexpr std::size_t kMagicLen = 6;

static_assert(std::endian::native == std::endian::little,
              "checkpoint codec assumes a little-endian host");

void write_f32(std::ostream& out, const float* data, std::size_t n) {
  out.write(reinterpret_cast<const char*>(data),
            static_cast<std::streamsize>(n * sizeof(float)));
}

}  // namespace

void save_checkpoint(const ModelParams<float>& params,
                     const std::vector<std::string>& item_names,
                     const std::filesystem::path& path) {
  check_data(static_cast<int>(item_names.size()) == params.cfg.item_count,
             "save_checkpoint: item name count does not match the model");
  check_data(all_finite(params), "save_checkpoint: non-finite parameters");

  nlohmann::json header;
  header["format"] = "TSRM1";
  header["config"] = nlohmann::json::parse(model_config_to_json(params.cfg));
  header["items"] = item_names;
  nlohmann::json manifest = nlohmann::json::array();
  const auto refs = params.tensors();
  for (const auto& ref : refs) {
    manifest.push_back({{"name", ref.name}, {"rows", ref.rows}, {"cols", ref.cols}});
  }
  header["tensors"] = std::move(manifest);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open checkpoint for writing: " + path.string());
  out.write(kMagic, kMagicLen);
  const std::string head = header.dump();
  out.write(head.data(), static_cast<std::streamsize>(head.size()));
  out.put('\n');
  for (const auto& ref : refs) {
    write_f32(out, ref.data, static_cast<std::size_t>(ref.size()));
  }
  if (!out) throw DataError("failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path.string());

  char magic[kMagicLen];
  if (!in.read(magic, kMagicLen) || std::memcmp(magic, kMagic, kMagicLen) != 0) {
    throw ParseError("checkpoint: bad magic (not a TSRM1 file): " + path.string());
  }
  std::string head_line;
  if (!std::getline(in, head_line)) throw ParseError("checkpoint: missing header line");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(head_line);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint: invalid header JSON: ") + e.what());
  }
  for (const char* key : {"format", "config", "items", "tensors"}) {
    if (!header.contains(key)) {
      throw ParseError(std::string("checkpoint: header missing \"") + key + "\"");
    }
  }
  if (header["format"] != "TSRM1") throw ParseError("checkpoint: unexpected format tag");

  Checkpoint ck;
  const ModelConfig cfg = model_config_from_json(header["config"].dump());
  if (!header["items"].is_array() ||
      static_cast<int>(header["items"].size()) != cfg.item_count) {
    throw ParseError("checkpoint: item list does not match the configured item count");
  }
  for (const auto& it : header["items"]) {
    if (!it.is_string()) throw ParseError("checkpoint: item names must be strings");
    ck.item_names.push_back(it.get<std::string>());
  }

  // Parameters are allocated from the config, then every tensor is
  // overwritten from the payload; the manifest must match exactly.
  ck.params = init_params<float>(cfg, 0);
  auto refs = ck.params.tensors();
  const auto& manifest = header["tensors"];
  if (!manifest.is_array() || manifest.size() != refs.size()) {
    throw ParseError("checkpoint: tensor manifest size mismatch");
  }
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const auto& entry = manifest[i];
    if (!entry.contains("name") || entry["name"] != refs[i].name ||
        !entry.contains("rows") || entry["rows"].get<Eigen::Index>() != refs[i].rows ||
        !entry.contains("cols") || entry["cols"].get<Eigen::Index>() != refs[i].cols) {
      throw ParseError("checkpoint: manifest entry " + std::to_string(i) +
                       " does not match tensor \"" + refs[i].name + "\"");
    }
    const std::size_t bytes = static_cast<std::size_t>(refs[i].size()) * sizeof(float);
    if (!in.read(reinterpret_cast<char*>(refs[i].data), static_cast<std::streamsize>(bytes))) {
      throw ParseError("checkpoint: truncated payload at tensor \"" + refs[i].name + "\"");
    }
  }
  if (in.peek() != std::ifstream::traits_type::eof()) {
    throw ParseError("checkpoint: trailing bytes after the last tensor");
  }
  check_data(all_finite(ck.params), "checkpoint: non-finite parameters in payload");
  return ck;
}

}  // namespace truthsr
