#pragma once

#include "truthsr/common.hpp"
#include "truthsr/rng.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace truthsr {

enum class EmbeddingKind { Text, Image };

const char* to_string(EmbeddingKind kind);

/// Frozen encoder boundary: id-keyed dense float vectors for review texts and
/// images. Immutable once loaded; the trainable ID table lives in the model.
class EmbeddingStore {
 public:
  int text_dim() const { return text_dim_; }
  int image_dim() const { return image_dim_; }

  /// First insertion of a kind fixes its dimension; later vectors must match.
  void add(EmbeddingKind kind, const std::string& id, VecF v);

  /// nullptr when the id is absent (missing UGC).
  const VecF* find(EmbeddingKind kind, const std::string& id) const;

  std::size_t count(EmbeddingKind kind) const;
  const std::map<std::string, VecF>& vectors(EmbeddingKind kind) const;

  /// Union of both stores; dimension conflicts raise DataError.
  void merge_from(const EmbeddingStore& other);

 private:
  std::map<std::string, VecF>& map_for(EmbeddingKind kind);
  const std::map<std::string, VecF>& map_for(EmbeddingKind kind) const;

  std::map<std::string, VecF> text_;
  std::map<std::string, VecF> image_;
  int text_dim_ = 0;
  int image_dim_ = 0;
};

/// Writes one kind of the store in the TSRV1 codec. Records are sorted by id,
/// so identical stores produce byte-identical files.
void write_embeddings(const EmbeddingStore& store, EmbeddingKind kind,
                      const std::filesystem::path& path);

/// Reads a TSRV1 file; the result holds only the file's kind.
EmbeddingStore read_embeddings(const std::filesystem::path& path);

/// Reads and merges a text file and an image file.
EmbeddingStore load_embedding_pair(const std::filesystem::path& text_path,
                                   const std::filesystem::path& image_path);

/// Deterministic pseudo-random unit-norm vector derived from (kind, id, seed).
/// Stands in for a frozen pretrained encoder at desk scale.
VecF stub_encode(EmbeddingKind kind, const std::string& id, int dim, std::uint64_t seed);

/// Looks up one table row per sequence position; output column n is the row
/// of item n (d_i x N layout). Unknown ids raise DataError.
template <typename T>
Mat<T> id_embed(const Mat<T>& table, std::span<const int> sequence) {
  Mat<T> out(table.cols(), static_cast<Eigen::Index>(sequence.size()));
  for (std::size_t n = 0; n < sequence.size(); ++n) {
    const int id = sequence[n];
    check_data(id >= 0 && id < table.rows(),
               "id_embed: item id " + std::to_string(id) + " outside vocabulary");
    out.col(static_cast<Eigen::Index>(n)) = table.row(id).transpose();
  }
  return out;
}

}  // namespace truthsr
