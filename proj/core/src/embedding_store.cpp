#include "truthsr/embedding_store.hpp"

#include <json.hpp>

#include <cmath>
#include <cstring>
#include <fstream>

namespace truthsr {

namespace {

constexpr char kMagic[] = "TSRV1\n";
constexpr std::size_t kMagicLen = 6;

void put_u16_le(std::ostream& out, std::uint16_t v) {
  const char bytes[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
  out.write(bytes, 2);
}

void put_f32_le(std::ostream& out, float v) {
  static_assert(sizeof(float) == 4);
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  const char bytes[4] = {static_cast<char>(bits & 0xff), static_cast<char>((bits >> 8) & 0xff),
                         static_cast<char>((bits >> 16) & 0xff),
                         static_cast<char>((bits >> 24) & 0xff)};
  out.write(bytes, 4);
}

std::uint16_t get_u16_le(std::istream& in, const std::string& ctx) {
  unsigned char bytes[2];
  if (!in.read(reinterpret_cast<char*>(bytes), 2)) throw ParseError("truncated file: " + ctx);
  return static_cast<std::uint16_t>(bytes[0] | (bytes[1] << 8));
}

float get_f32_le(std::istream& in, const std::string& ctx) {
  unsigned char bytes[4];
  if (!in.read(reinterpret_cast<char*>(bytes), 4)) throw ParseError("truncated file: " + ctx);
  const std::uint32_t bits = static_cast<std::uint32_t>(bytes[0]) |
                             (static_cast<std::uint32_t>(bytes[1]) << 8) |
                             (static_cast<std::uint32_t>(bytes[2]) << 16) |
                             (static_cast<std::uint32_t>(bytes[3]) << 24);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

}  // namespace

const char* to_string(EmbeddingKind kind) {
  return kind == EmbeddingKind::Text ? "text" : "image";
}

std::map<std::string, VecF>& EmbeddingStore::map_for(EmbeddingKind kind) {
  return kind == EmbeddingKind::Text ? text_ : image_;
}

const std::map<std::string, VecF>& EmbeddingStore::map_for(EmbeddingKind kind) const {
  return kind == EmbeddingKind::Text ? text_ : image_;
}

void EmbeddingStore::add(EmbeddingKind kind, const std::string& id, VecF v) {
  check_data(v.size() > 0, "embedding vector must be non-empty");
  check_data(v.allFinite(), "embedding vector has non-finite components: " + id);
  int& dim = kind == EmbeddingKind::Text ? text_dim_ : image_dim_;
  if (dim == 0) {
    dim = static_cast<int>(v.size());
  } else {
    check_data(static_cast<int>(v.size()) == dim,
               "embedding dimension mismatch for id " + id);
  }
  map_for(kind)[id] = std::move(v);
}

const VecF* EmbeddingStore::find(EmbeddingKind kind, const std::string& id) const {
  const auto& m = map_for(kind);
  auto it = m.find(id);
  return it == m.end() ? nullptr : &it->second;
}

std::size_t EmbeddingStore::count(EmbeddingKind kind) const { return map_for(kind).size(); }

const std::map<std::string, VecF>& EmbeddingStore::vectors(EmbeddingKind kind) const {
  return map_for(kind);
}

void EmbeddingStore::merge_from(const EmbeddingStore& other) {
  for (EmbeddingKind kind : {EmbeddingKind::Text, EmbeddingKind::Image}) {
    for (const auto& [id, v] : other.map_for(kind)) add(kind, id, v);
  }
}

void write_embeddings(const EmbeddingStore& store, EmbeddingKind kind,
                      const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path.string());

  const int dim = kind == EmbeddingKind::Text ? store.text_dim() : store.image_dim();
  const auto& vectors = store.vectors(kind);

  nlohmann::json header = {
      {"kind", to_string(kind)}, {"dim", dim}, {"count", vectors.size()}};
  out.write(kMagic, static_cast<std::streamsize>(kMagicLen));
  const std::string hline = header.dump();
  out.write(hline.data(), static_cast<std::streamsize>(hline.size()));
  out.put('\n');

  for (const auto& [id, v] : vectors) {
    check_data(id.size() <= 0xffff, "embedding id longer than 65535 bytes: " + id);
    put_u16_le(out, static_cast<std::uint16_t>(id.size()));
    out.write(id.data(), static_cast<std::streamsize>(id.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) put_f32_le(out, v[i]);
  }
  if (!out) throw DataError("write failed: " + path.string());
}

EmbeddingStore read_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open embedding file: " + path.string());
  const std::string ctx = path.string();

  char magic[kMagicLen];
  if (!in.read(magic, kMagicLen) || std::memcmp(magic, kMagic, kMagicLen) != 0) {
    throw ParseError("bad magic, not a TSRV1 embedding file: " + ctx);
  }
  std::string hline;
  if (!std::getline(in, hline)) throw ParseError("missing header line: " + ctx);

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(hline);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("invalid header JSON in " + ctx + ": " + e.what());
  }
  for (const char* key : {"kind", "dim", "count"}) {
    if (!header.contains(key)) throw ParseError("header missing \"" + std::string(key) + "\": " + ctx);
  }
  const std::string kind_str = header["kind"].get<std::string>();
  EmbeddingKind kind;
  if (kind_str == "text") {
    kind = EmbeddingKind::Text;
  } else if (kind_str == "image") {
    kind = EmbeddingKind::Image;
  } else {
    throw ParseError("unknown embedding kind \"" + kind_str + "\": " + ctx);
  }
  const int dim = header["dim"].get<int>();
  const std::uint64_t count = header["count"].get<std::uint64_t>();
  if (dim < 0 || (count > 0 && dim == 0)) throw ParseError("invalid dim in header: " + ctx);

  EmbeddingStore store;
  for (std::uint64_t rec = 0; rec < count; ++rec) {
    const std::uint16_t id_len = get_u16_le(in, ctx);
    std::string id(id_len, '\0');
    if (!in.read(id.data(), id_len)) throw ParseError("truncated file: " + ctx);
    VecF v(dim);
    for (int i = 0; i < dim; ++i) v[i] = get_f32_le(in, ctx);
    store.add(kind, id, std::move(v));
  }
  // trailing bytes mean the header undercounted
  if (in.peek() != std::ifstream::traits_type::eof()) {
    throw ParseError("trailing bytes after last record: " + ctx);
  }
  return store;
}

EmbeddingStore load_embedding_pair(const std::filesystem::path& text_path,
                                   const std::filesystem::path& image_path) {
  EmbeddingStore store = read_embeddings(text_path);
  store.merge_from(read_embeddings(image_path));
  return store;
}

VecF stub_encode(EmbeddingKind kind, const std::string& id, int dim, std::uint64_t seed) {
  check_data(dim >= 1, "stub_encode requires dim >= 1");
  const std::uint64_t key =
      mix_seed(seed, fnv1a64(std::string(to_string(kind)) + "\x1f" + id));
  Rng rng(key);
  VecF v(dim);
  for (int i = 0; i < dim; ++i) v[i] = static_cast<float>(rng.normal());
  const float norm = v.norm();
  if (norm < 1e-12f) {
    v.setZero();
    v[0] = 1.0f;
    return v;
  }
  return v / norm;
}

}  // namespace truthsr
