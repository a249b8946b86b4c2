#include "rbqa/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numeric>

#include "rbqa/corpus.hpp"
#include "rbqa/error.hpp"
#include "rbqa/text.hpp"

namespace rbqa {

EmbeddingVector EmbeddingVector::normalize(Eigen::VectorXd raw) {
  const double n = raw.norm();
  if (!(n > 0.0)) fail(ErrorCode::ZeroVector, "cannot normalize a zero vector");
  raw /= n;
  return EmbeddingVector(std::move(raw));
}

EmbeddingVector EmbeddingVector::from_stored(Eigen::VectorXd stored) {
  if (std::abs(stored.norm() - 1.0) <= 1e-9) return EmbeddingVector(std::move(stored));
  return normalize(std::move(stored));
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dimension() != b.dimension()) {
    fail(ErrorCode::DimensionMismatch, "cosine of vectors with different dimensions");
  }
  return std::clamp(a.values().dot(b.values()), -1.0, 1.0);
}

namespace {

// splitmix64 finalizer; spreads FNV output over all 64 bits.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

HashingEmbedder::HashingEmbedder(int dimension, std::uint64_t seed) : dimension_(dimension), seed_(seed) {
  if (dimension <= 0) fail(ErrorCode::InvalidArgument, "embedding dimension must be positive");
}

Eigen::VectorXd HashingEmbedder::term_weights(std::string_view input) const {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(dimension_);
  for (const auto& token : text::normalized_tokens(input)) {
    const std::string padded = "^" + token + "$";
    for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
      const auto h = mix64(text::fnv1a64(std::string_view(padded).substr(i, 3), text::kFnvOffsetBasis ^ seed_));
      const auto bucket = static_cast<Eigen::Index>(h % static_cast<std::uint64_t>(dimension_));
      w[bucket] += (h >> 63) ? -1.0 : 1.0;
    }
  }
  return w;
}

EmbeddingVector HashingEmbedder::embed(std::string_view input) const {
  if (text::tokenize(input).empty()) fail(ErrorCode::EmptyText, "text has no alphanumeric content");
  auto w = term_weights(input);
  // Sign collisions can cancel every bucket; fall back to unsigned counts so
  // valid text always embeds.
  if (w.isZero(0.0)) {
    for (const auto& token : text::normalized_tokens(input)) {
      const std::string padded = "^" + token + "$";
      for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
        const auto h = mix64(text::fnv1a64(std::string_view(padded).substr(i, 3), text::kFnvOffsetBasis ^ seed_));
        w[static_cast<Eigen::Index>(h % static_cast<std::uint64_t>(dimension_))] += 1.0;
      }
    }
  }
  return EmbeddingVector::normalize(std::move(w));
}

void VectorIndex::add(std::string chunk_id, const EmbeddingVector& vector) {
  if (vector.dimension() != dimension_) {
    fail(ErrorCode::DimensionMismatch, "vector dimension " + std::to_string(vector.dimension()) +
                                           " does not match index dimension " + std::to_string(dimension_));
  }
  if (pos_.count(chunk_id)) fail(ErrorCode::DuplicateChunkId, "chunk id '" + chunk_id + "' already indexed");
  pos_.emplace(chunk_id, ids_.size());
  ids_.push_back(std::move(chunk_id));
  data_.insert(data_.end(), vector.values().data(), vector.values().data() + dimension_);
}

Eigen::Map<const Eigen::MatrixXd> VectorIndex::matrix() const {
  return {data_.data(), dimension_, static_cast<Eigen::Index>(ids_.size())};
}

Eigen::Map<const Eigen::VectorXd> VectorIndex::vector(std::size_t i) const {
  return {data_.data() + i * static_cast<std::size_t>(dimension_), dimension_};
}

Eigen::VectorXd VectorIndex::scores(const EmbeddingVector& query) const {
  if (query.dimension() != dimension_) {
    fail(ErrorCode::DimensionMismatch, "query dimension " + std::to_string(query.dimension()) +
                                           " does not match index dimension " + std::to_string(dimension_));
  }
  Eigen::VectorXd s = matrix().transpose() * query.values();
  return s.cwiseMax(-1.0).cwiseMin(1.0);
}

std::vector<RetrievalHit> VectorIndex::retrieve(const EmbeddingVector& query, std::size_t k) const {
  if (k == 0) fail(ErrorCode::InvalidArgument, "k must be at least 1");
  if (empty()) fail(ErrorCode::EmptyIndex, "index is empty");
  const Eigen::VectorXd s = scores(query);
  std::vector<std::size_t> order(ids_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto take = std::min(k, order.size());
  const auto before = [&](std::size_t a, std::size_t b) {
    const auto sa = s[static_cast<Eigen::Index>(a)];
    const auto sb = s[static_cast<Eigen::Index>(b)];
    if (sa != sb) return sa > sb;
    return ids_[a] < ids_[b];
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(), before);
  std::vector<RetrievalHit> hits;
  hits.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    hits.push_back({ids_[order[i]], s[static_cast<Eigen::Index>(order[i])]});
  }
  return hits;
}

void VectorIndex::truncate(std::size_t n) {
  if (n >= ids_.size()) return;
  for (auto i = n; i < ids_.size(); ++i) pos_.erase(ids_[i]);
  ids_.resize(n);
  data_.resize(n * static_cast<std::size_t>(dimension_));
}

std::string VectorIndex::serialize() const {
  std::string out;
  char buf[32];
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    out += ids_[i];
    out += '\t';
    const auto v = vector(i);
    for (Eigen::Index d = 0; d < v.size(); ++d) {
      if (d) out += ',';
      std::snprintf(buf, sizeof buf, "%.17g", v[d]);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

VectorIndex VectorIndex::parse(std::string_view content, int dimension) {
  VectorIndex index(dimension);
  std::size_t line_no = 0;
  for (const auto& line : text::split(content, '\n')) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      fail(ErrorCode::IndexFileError, "index line " + std::to_string(line_no) + " has no tab");
    }
    Eigen::VectorXd v(dimension);
    Eigen::Index d = 0;
    for (const auto& field : text::split(std::string_view(line).substr(tab + 1), ',')) {
      if (d >= dimension) fail(ErrorCode::IndexFileError, "index line " + std::to_string(line_no) + " has too many values");
      char* end = nullptr;
      const std::string f(field);
      const double x = std::strtod(f.c_str(), &end);
      if (f.empty() || end != f.c_str() + f.size()) {
        fail(ErrorCode::IndexFileError, "index line " + std::to_string(line_no) + " has a bad number");
      }
      v[d++] = x;
    }
    if (d != dimension) {
      fail(ErrorCode::IndexFileError, "index line " + std::to_string(line_no) + " has " + std::to_string(d) +
                                          " values, expected " + std::to_string(dimension));
    }
    try {
      index.add(line.substr(0, tab), EmbeddingVector::from_stored(std::move(v)));
    } catch (const Error& e) {
      fail(ErrorCode::IndexFileError, "index line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return index;
}

void VectorIndex::save(const std::filesystem::path& path) const { text::write_file_atomic(path, serialize()); }

VectorIndex VectorIndex::load(const std::filesystem::path& path, int dimension) {
  return parse(text::read_file(path), dimension);
}

VectorIndex build_index(const Corpus& corpus, const Embedder& embedder) {
  VectorIndex index(embedder.dimension());
  for (const auto& chunk : corpus.chunks()) index.add(chunk.chunk_id, embedder.embed(chunk.text));
  return index;
}

}  // namespace rbqa
