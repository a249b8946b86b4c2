#pragma once

// Rulebook ingestion: document bundles, table serialization and chunking.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace rbqa {

struct TableGrid {
  std::string table_name;
  std::vector<std::string> row_labels;
  std::vector<std::string> column_labels;
  std::vector<std::vector<std::string>> cells;  // row-major, |rows| x |columns|

  friend bool operator==(const TableGrid&, const TableGrid&) = default;
};

struct TableCellRecord {
  std::string table_name;
  std::string row;
  std::string column;
  std::string value;

  friend bool operator==(const TableCellRecord&, const TableCellRecord&) = default;
};

struct SourceDocument {
  std::string doc_id;
  std::string title;
  std::string body_text;
  std::vector<TableGrid> tables;

  friend bool operator==(const SourceDocument&, const SourceDocument&) = default;
};

enum class ChunkKind { Prose, Table };

struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;
  friend bool operator==(const Span&, const Span&) = default;
};

struct Chunk {
  std::string chunk_id;
  std::string doc_id;
  int seq_no = 0;
  ChunkKind kind = ChunkKind::Prose;
  std::string text;
  std::optional<Span> char_span;  // prose chunks only, byte offsets into body_text

  friend bool operator==(const Chunk&, const Chunk&) = default;
};

struct SerializedTable {
  std::vector<TableCellRecord> records;
  std::string rendered;
};

/// Throws DimensionMismatch when the cell matrix disagrees with the labels and
/// ValidationError for empty names/labels or labels that would break the line format.
void validate_table(const TableGrid& grid);
void validate_document(const SourceDocument& doc);

/// One record per non-empty cell in row-major order. Rendered form:
///   TABLE: <name>
///   <name> | row=<row> | column=<column> | value=<value>
SerializedTable serialize_table(const TableGrid& grid);

struct ParsedTable {
  std::string table_name;
  std::vector<TableCellRecord> records;
};

/// Inverse of the rendered form of serialize_table.
ParsedTable parse_serialized_table(std::string_view rendered);

struct ChunkParams {
  std::size_t max_chars = 2000;
  std::size_t overlap_chars = 200;
  std::size_t snap_window = 200;  // how far back a cut may move to reach a sentence end
};

/// Prose chunks first (in body order), then one chunk per table. Lengths are in
/// bytes; cuts never split a UTF-8 sequence.
std::vector<Chunk> chunk_document(const SourceDocument& doc, const ChunkParams& params = {});

/// Rebuilds body_text from a document's prose chunks using their spans.
std::string reassemble_prose(const std::vector<Chunk>& chunks);

// Document-bundle text format.
SourceDocument parse_bundle(std::string_view content);
std::string format_bundle(const SourceDocument& doc);
SourceDocument load_bundle(const std::filesystem::path& path);
void save_bundle(const SourceDocument& doc, const std::filesystem::path& path);

struct DocumentSummary {
  std::string doc_id;
  std::string title;
  std::size_t tables = 0;
  std::size_t chunks = 0;

  friend bool operator==(const DocumentSummary&, const DocumentSummary&) = default;
};

struct CorpusStats {
  std::size_t documents = 0;
  std::size_t chunks = 0;
  std::size_t tables = 0;
};

/// Chunk store persisted as `documents.jsonl` + `chunks.jsonl` in a corpus directory.
class Corpus {
 public:
  static constexpr const char* kDocumentsFile = "documents.jsonl";
  static constexpr const char* kChunksFile = "chunks.jsonl";

  Corpus() = default;

  /// Missing files load as an empty corpus.
  static Corpus load(const std::filesystem::path& dir);
  void save(const std::filesystem::path& dir) const;

  /// Chunks `doc` and appends it. Throws DuplicateDocument when the id exists.
  std::vector<Chunk> add_document(const SourceDocument& doc, const ChunkParams& params = {});
  /// Appends pre-chunked content; used by add_document and when loading.
  void append(DocumentSummary summary, std::vector<Chunk> chunks);
  /// Drops documents (and their chunks) beyond the first `documents`.
  void truncate(std::size_t documents);

  bool contains_document(std::string_view doc_id) const;
  const Chunk* find_chunk(std::string_view chunk_id) const;

  const std::vector<Chunk>& chunks() const { return chunks_; }
  const std::vector<DocumentSummary>& documents() const { return documents_; }
  CorpusStats stats() const;
  bool empty() const { return chunks_.empty(); }

 private:
  std::vector<DocumentSummary> documents_;
  std::vector<Chunk> chunks_;
  std::vector<std::size_t> doc_chunk_begin_;
  std::unordered_map<std::string, std::size_t> chunk_pos_;
};

std::string_view to_string(ChunkKind kind);

}  // namespace rbqa
