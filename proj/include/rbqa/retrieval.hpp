#pragma once

// Dense embeddings and exact cosine top-k retrieval.

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace rbqa {

class Corpus;

inline constexpr int kDefaultDimension = 256;
inline constexpr std::uint64_t kDefaultEmbeddingSeed = 0x5eed'0f'7ab1e5ULL;

/// Unit-norm dense vector. The only way to get one is through normalization
/// (or loading stored values), so every instance satisfies |v| = 1.
class EmbeddingVector {
 public:
  EmbeddingVector() = default;

  /// L2-normalizes `raw`. Throws ZeroVector when |raw| == 0.
  static EmbeddingVector normalize(Eigen::VectorXd raw);
  /// Keeps `stored` verbatim when it is already unit length, so load/save round-trips bytes.
  static EmbeddingVector from_stored(Eigen::VectorXd stored);

  const Eigen::VectorXd& values() const { return values_; }
  Eigen::Index dimension() const { return values_.size(); }
  double norm() const { return values_.norm(); }

 private:
  explicit EmbeddingVector(Eigen::VectorXd v) : values_(std::move(v)) {}
  Eigen::VectorXd values_;
};

/// Dot product of two unit vectors, clamped to [-1, 1].
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual int dimension() const = 0;
  /// Throws EmptyText when `text` has no alphanumeric content.
  virtual EmbeddingVector embed(std::string_view text) const = 0;
};

/// Signed feature hashing of padded character 3-grams, term-frequency weighted.
class HashingEmbedder final : public Embedder {
 public:
  explicit HashingEmbedder(int dimension = kDefaultDimension,
                           std::uint64_t seed = kDefaultEmbeddingSeed);

  int dimension() const override { return dimension_; }
  EmbeddingVector embed(std::string_view text) const override;

  /// Pre-normalization bucket weights; all zeros when the text has no tokens.
  Eigen::VectorXd term_weights(std::string_view text) const;

 private:
  int dimension_;
  std::uint64_t seed_;
};

struct RetrievalHit {
  std::string chunk_id;
  double score = 0.0;

  friend bool operator==(const RetrievalHit&, const RetrievalHit&) = default;
};

/// Ranking order: score descending, then chunk_id ascending.
inline bool ranks_before(const RetrievalHit& a, const RetrievalHit& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.chunk_id < b.chunk_id;
}

/// Exact linear-scan index. Vectors are stored column-major in one buffer so a
/// query is a single matrix-vector product.
///
/// Not internally synchronized: concurrent retrieve() calls are safe, add() needs
/// exclusive access.
class VectorIndex {
 public:
  explicit VectorIndex(int dimension = kDefaultDimension) : dimension_(dimension) {}

  /// Throws DuplicateChunkId or DimensionMismatch.
  void add(std::string chunk_id, const EmbeddingVector& vector);

  /// min(k, size()) best hits. Throws EmptyIndex, DimensionMismatch, or
  /// InvalidArgument for k == 0.
  std::vector<RetrievalHit> retrieve(const EmbeddingVector& query, std::size_t k) const;

  /// Cosine score of every entry, in insertion order.
  Eigen::VectorXd scores(const EmbeddingVector& query) const;

  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }
  int dimension() const { return dimension_; }
  const std::vector<std::string>& ids() const { return ids_; }
  bool contains(std::string_view chunk_id) const { return pos_.count(std::string(chunk_id)) > 0; }
  Eigen::Map<const Eigen::VectorXd> vector(std::size_t i) const;

  /// Keeps the first `n` entries.
  void truncate(std::size_t n);

  /// Text form: `chunk_id<TAB>v1,v2,...,vD` per line, insertion order.
  std::string serialize() const;
  static VectorIndex parse(std::string_view content, int dimension = kDefaultDimension);
  void save(const std::filesystem::path& path) const;
  static VectorIndex load(const std::filesystem::path& path, int dimension = kDefaultDimension);

 private:
  Eigen::Map<const Eigen::MatrixXd> matrix() const;

  int dimension_;
  std::vector<std::string> ids_;
  std::vector<double> data_;
  std::unordered_map<std::string, std::size_t> pos_;
};

inline constexpr const char* kIndexFile = "index.tsv";

/// Embeds every chunk of `corpus` in corpus order.
VectorIndex build_index(const Corpus& corpus, const Embedder& embedder);

}  // namespace rbqa
