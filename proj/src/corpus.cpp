#include "rbqa/corpus.hpp"

#include <algorithm>
#include "json.hpp"

#include "rbqa/error.hpp"
#include "rbqa/text.hpp"

namespace rbqa {

using nlohmann::json;

std::string_view to_string(ChunkKind kind) {
  return kind == ChunkKind::Table ? "table" : "prose";
}

namespace {

bool has_line_break_or_tab(std::string_view s) {
  return s.find_first_of("\t\r\n") != std::string_view::npos;
}

void check_field(std::string_view value, std::string_view what) {
  if (has_line_break_or_tab(value)) {
    fail(ErrorCode::ValidationError, std::string(what) + " must not contain tabs or line breaks");
  }
}

void check_dimensions(const TableGrid& grid) {
  if (grid.cells.size() != grid.row_labels.size()) {
    fail(ErrorCode::DimensionMismatch,
         "table '" + grid.table_name + "' has " + std::to_string(grid.cells.size()) +
             " cell rows for " + std::to_string(grid.row_labels.size()) + " row labels");
  }
  for (std::size_t r = 0; r < grid.cells.size(); ++r) {
    if (grid.cells[r].size() != grid.column_labels.size()) {
      fail(ErrorCode::DimensionMismatch,
           "table '" + grid.table_name + "' row " + std::to_string(r) + " has " +
               std::to_string(grid.cells[r].size()) + " cells for " +
               std::to_string(grid.column_labels.size()) + " columns");
    }
  }
}

}  // namespace

void validate_table(const TableGrid& grid) {
  check_dimensions(grid);
  if (text::trim(grid.table_name).empty()) fail(ErrorCode::ValidationError, "table_name is empty");
  check_field(grid.table_name, "table_name");
  for (const auto& label : grid.row_labels) {
    if (text::trim(label).empty()) fail(ErrorCode::ValidationError, "empty row label in '" + grid.table_name + "'");
    check_field(label, "row label");
  }
  for (const auto& label : grid.column_labels) {
    if (text::trim(label).empty()) fail(ErrorCode::ValidationError, "empty column label in '" + grid.table_name + "'");
    check_field(label, "column label");
  }
  for (const auto& row : grid.cells) {
    for (const auto& cell : row) check_field(cell, "cell");
  }
}

void validate_document(const SourceDocument& doc) {
  if (text::trim(doc.doc_id).empty()) fail(ErrorCode::ValidationError, "doc_id is empty");
  check_field(doc.doc_id, "doc_id");
  if (doc.title.find_first_of("\r\n") != std::string::npos) {
    fail(ErrorCode::ValidationError, "title must be a single line");
  }
  if (doc.body_text.empty() && doc.tables.empty()) {
    fail(ErrorCode::ValidationError, "document '" + doc.doc_id + "' has neither body text nor tables");
  }
  for (const auto& t : doc.tables) validate_table(t);
}

SerializedTable serialize_table(const TableGrid& grid) {
  check_dimensions(grid);
  SerializedTable out;
  out.rendered = "TABLE: " + grid.table_name;
  for (std::size_t r = 0; r < grid.row_labels.size(); ++r) {
    for (std::size_t c = 0; c < grid.column_labels.size(); ++c) {
      const auto& value = grid.cells[r][c];
      if (value.empty()) continue;
      out.records.push_back({grid.table_name, grid.row_labels[r], grid.column_labels[c], value});
      out.rendered += '\n';
      out.rendered += grid.table_name + " | row=" + grid.row_labels[r] +
                      " | column=" + grid.column_labels[c] + " | value=" + value;
    }
  }
  return out;
}

ParsedTable parse_serialized_table(std::string_view rendered) {
  const auto lines = text::split(rendered, '\n');
  constexpr std::string_view kHeader = "TABLE: ";
  if (lines.empty() || !lines[0].starts_with(kHeader)) {
    fail(ErrorCode::BundleParseError, "serialized table lacks 'TABLE:' header");
  }
  ParsedTable out;
  out.table_name = lines[0].substr(kHeader.size());
  const std::string prefix = out.table_name + " | row=";
  for (std::size_t i = 1; i < lines.size(); ++i) {
    std::string_view line = lines[i];
    if (!line.starts_with(prefix)) {
      fail(ErrorCode::BundleParseError, "table line " + std::to_string(i) + " does not start with the table name");
    }
    line.remove_prefix(prefix.size());
    const auto col = line.find(" | column=");
    if (col == std::string_view::npos) fail(ErrorCode::BundleParseError, "table line lacks column field");
    const auto val = line.find(" | value=", col);
    if (val == std::string_view::npos) fail(ErrorCode::BundleParseError, "table line lacks value field");
    TableCellRecord rec;
    rec.table_name = out.table_name;
    rec.row = std::string(line.substr(0, col));
    rec.column = std::string(line.substr(col + 10, val - col - 10));
    rec.value = std::string(line.substr(val + 9));
    out.records.push_back(std::move(rec));
  }
  return out;
}

namespace {

bool sentence_end_at(std::string_view s, std::size_t p) {
  if (p == 0) return false;
  const char c = s[p - 1];
  if (c == '.' || c == '?' || c == '!' || c == '\n') return true;
  return p >= 3 && s.substr(p - 3, 3) == "\xE3\x80\x82";  // U+3002 ideographic full stop
}

}  // namespace

std::vector<Chunk> chunk_document(const SourceDocument& doc, const ChunkParams& params) {
  if (params.max_chars == 0 || params.overlap_chars >= params.max_chars) {
    fail(ErrorCode::InvalidChunkParams,
         "need max_chars > overlap_chars >= 0 (got max_chars=" + std::to_string(params.max_chars) +
             ", overlap_chars=" + std::to_string(params.overlap_chars) + ")");
  }
  std::vector<Chunk> out;
  const std::string_view body = doc.body_text;
  const auto n = body.size();
  const auto overlap = params.overlap_chars;
  std::size_t start = 0;
  int seq = 0;
  while (start < n) {
    std::size_t end = n;
    const auto limit = start + params.max_chars;
    if (limit < n) {
      end = text::floor_boundary(body, limit);
      const auto window_lo = end > params.snap_window ? end - params.snap_window : 0;
      const auto lo = std::max(start + overlap + 1, window_lo);
      for (auto p = end; p >= lo && p > 0; --p) {
        if (sentence_end_at(body, p)) {
          end = p;
          break;
        }
      }
      if (end <= start + overlap) end = text::ceil_boundary(body, limit);
    }
    Chunk c;
    c.doc_id = doc.doc_id;
    c.seq_no = seq;
    c.chunk_id = doc.doc_id + "#" + std::to_string(seq);
    c.kind = ChunkKind::Prose;
    c.text = std::string(body.substr(start, end - start));
    c.char_span = Span{start, end};
    out.push_back(std::move(c));
    ++seq;
    if (end == n) break;
    start = text::ceil_boundary(body, end - overlap);
  }
  for (const auto& table : doc.tables) {
    Chunk c;
    c.doc_id = doc.doc_id;
    c.seq_no = seq;
    c.chunk_id = doc.doc_id + "#" + std::to_string(seq);
    c.kind = ChunkKind::Table;
    c.text = serialize_table(table).rendered;
    out.push_back(std::move(c));
    ++seq;
  }
  return out;
}

std::string reassemble_prose(const std::vector<Chunk>& chunks) {
  std::vector<const Chunk*> prose;
  for (const auto& c : chunks) {
    if (c.kind == ChunkKind::Prose && c.char_span) prose.push_back(&c);
  }
  std::sort(prose.begin(), prose.end(), [](auto* a, auto* b) { return a->seq_no < b->seq_no; });
  std::string out;
  std::size_t covered = 0;
  for (const auto* c : prose) {
    const auto skip = covered > c->char_span->begin ? covered - c->char_span->begin : 0;
    if (skip < c->text.size()) out += c->text.substr(skip);
    covered = std::max(covered, c->char_span->end);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Bundle format

namespace {

constexpr std::string_view kBodyBegin = "BODY";
constexpr std::string_view kBodyEnd = "END BODY";
constexpr std::string_view kTableBegin = "TABLE";
constexpr std::string_view kTableEnd = "END TABLE";

std::string_view chomp(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

bool header_field(std::string_view line, std::string_view key, std::string& out) {
  if (!line.starts_with(key)) return false;
  line.remove_prefix(key.size());
  if (line.starts_with(' ')) line.remove_prefix(1);
  out = std::string(line);
  return true;
}

[[noreturn]] void parse_error(std::size_t line_no, const std::string& what) {
  fail(ErrorCode::BundleParseError, "line " + std::to_string(line_no + 1) + ": " + what);
}

}  // namespace

SourceDocument parse_bundle(std::string_view content) {
  auto lines = text::split(content, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  SourceDocument doc;
  bool have_id = false;
  bool have_body = false;
  std::size_t i = 0;
  while (i < lines.size()) {
    const auto line = chomp(lines[i]);
    if (text::trim(line).empty()) {
      ++i;
      continue;
    }
    std::string value;
    if (header_field(line, "doc_id:", value)) {
      doc.doc_id = std::string(text::trim(value));
      have_id = true;
      ++i;
    } else if (header_field(line, "title:", value)) {
      doc.title = std::string(text::trim(value));
      ++i;
    } else if (line == kBodyBegin) {
      if (have_body) parse_error(i, "duplicate BODY section");
      have_body = true;
      std::vector<std::string> body;
      ++i;
      bool closed = false;
      for (; i < lines.size(); ++i) {
        std::string_view raw = lines[i];
        if (chomp(raw) == kBodyEnd) {
          closed = true;
          ++i;
          break;
        }
        if (raw.starts_with('\\')) raw.remove_prefix(1);
        body.emplace_back(raw);
      }
      if (!closed) parse_error(i - 1, "BODY section not terminated by 'END BODY'");
      doc.body_text = text::join(body, "\n");
    } else if (line == kTableBegin) {
      const auto table_line = i;
      TableGrid grid;
      bool have_name = false, have_cols = false, closed = false;
      for (++i; i < lines.size(); ++i) {
        const auto row = chomp(lines[i]);
        if (row == kTableEnd) {
          closed = true;
          ++i;
          break;
        }
        if (!have_name && header_field(row, "name:", value)) {
          grid.table_name = value;
          have_name = true;
        } else if (!have_cols && header_field(row, "columns:", value)) {
          grid.column_labels = text::split(value, '\t');
          have_cols = true;
        } else if (have_name && have_cols) {
          if (row.empty()) continue;
          auto fields = text::split(row, '\t');
          grid.row_labels.push_back(fields.front());
          fields.erase(fields.begin());
          grid.cells.push_back(std::move(fields));
        } else {
          parse_error(i, "TABLE section needs 'name:' and 'columns:' before rows");
        }
      }
      if (!closed) parse_error(table_line, "TABLE section not terminated by 'END TABLE'");
      if (!have_name || !have_cols) parse_error(table_line, "TABLE section missing name or columns");
      doc.tables.push_back(std::move(grid));
    } else {
      parse_error(i, "unexpected line '" + std::string(line.substr(0, 40)) + "'");
    }
  }
  if (!have_id) fail(ErrorCode::ValidationError, "bundle has no doc_id");
  try {
    validate_document(doc);
  } catch (const Error& e) {
    // Row arity problems in a bundle are invariant violations of the file, not of a grid.
    if (e.code() == ErrorCode::DimensionMismatch) fail(ErrorCode::ValidationError, e.what());
    throw;
  }
  return doc;
}

std::string format_bundle(const SourceDocument& doc) {
  validate_document(doc);
  std::string out = "doc_id: " + doc.doc_id + "\n";
  out += "title: " + doc.title + "\n";
  if (!doc.body_text.empty()) {
    out += "BODY\n";
    for (const auto& line : text::split(doc.body_text, '\n')) {
      if (line.starts_with('\\') || chomp(line) == kBodyEnd) out += '\\';
      out += line;
      out += '\n';
    }
    out += "END BODY\n";
  }
  for (const auto& t : doc.tables) {
    out += "TABLE\nname: " + t.table_name + "\ncolumns: " + text::join(t.column_labels, "\t") + "\n";
    for (std::size_t r = 0; r < t.row_labels.size(); ++r) {
      out += t.row_labels[r];
      for (const auto& cell : t.cells[r]) out += "\t" + cell;
      out += '\n';
    }
    out += "END TABLE\n";
  }
  return out;
}

SourceDocument load_bundle(const std::filesystem::path& path) {
  std::string content;
  try {
    content = text::read_file(path);
  } catch (const Error& e) {
    fail(ErrorCode::BundleParseError, e.what());
  }
  return parse_bundle(content);
}

void save_bundle(const SourceDocument& doc, const std::filesystem::path& path) {
  text::write_file_atomic(path, format_bundle(doc));
}

// ---------------------------------------------------------------------------
// Corpus store

namespace {

json chunk_to_json(const Chunk& c) {
  json j{{"chunk_id", c.chunk_id}, {"doc_id", c.doc_id}, {"seq_no", c.seq_no},
         {"kind", to_string(c.kind)}, {"text", c.text}};
  if (c.char_span) j["char_span"] = {c.char_span->begin, c.char_span->end};
  return j;
}

Chunk chunk_from_json(const json& j) {
  Chunk c;
  c.chunk_id = j.at("chunk_id").get<std::string>();
  c.doc_id = j.at("doc_id").get<std::string>();
  c.seq_no = j.at("seq_no").get<int>();
  c.kind = j.at("kind").get<std::string>() == "table" ? ChunkKind::Table : ChunkKind::Prose;
  c.text = j.at("text").get<std::string>();
  if (j.contains("char_span")) {
    c.char_span = Span{j["char_span"].at(0).get<std::size_t>(), j["char_span"].at(1).get<std::size_t>()};
  }
  return c;
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
  std::vector<json> out;
  if (!std::filesystem::exists(path)) return out;
  const auto content = text::read_file(path);
  std::size_t line_no = 0;
  for (const auto& line : text::split(content, '\n')) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::exception& e) {
      fail(ErrorCode::IoError, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

Corpus Corpus::load(const std::filesystem::path& dir) {
  Corpus corpus;
  std::unordered_map<std::string, std::vector<Chunk>> by_doc;
  try {
    for (const auto& j : read_jsonl(dir / kChunksFile)) {
      auto c = chunk_from_json(j);
      by_doc[c.doc_id].push_back(std::move(c));
    }
    for (const auto& j : read_jsonl(dir / kDocumentsFile)) {
      DocumentSummary s{j.at("doc_id").get<std::string>(), j.value("title", ""),
                        j.value("tables", std::size_t{0}), j.value("chunks", std::size_t{0})};
      auto chunks = std::move(by_doc[s.doc_id]);
      std::sort(chunks.begin(), chunks.end(), [](const Chunk& a, const Chunk& b) { return a.seq_no < b.seq_no; });
      if (chunks.size() != s.chunks) {
        fail(ErrorCode::IoError, "corpus document '" + s.doc_id + "' lists " + std::to_string(s.chunks) +
                                     " chunks but " + std::to_string(chunks.size()) + " are stored");
      }
      corpus.append(std::move(s), std::move(chunks));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::IoError, "corrupt corpus in " + dir.string() + ": " + e.what());
  }
  return corpus;
}

void Corpus::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  std::string docs, chunks;
  for (const auto& d : documents_) {
    docs += json{{"doc_id", d.doc_id}, {"title", d.title}, {"tables", d.tables}, {"chunks", d.chunks}}.dump();
    docs += '\n';
  }
  for (const auto& c : chunks_) {
    chunks += chunk_to_json(c).dump();
    chunks += '\n';
  }
  text::write_file_atomic(dir / kChunksFile, chunks);
  text::write_file_atomic(dir / kDocumentsFile, docs);
}

std::vector<Chunk> Corpus::add_document(const SourceDocument& doc, const ChunkParams& params) {
  validate_document(doc);
  if (contains_document(doc.doc_id)) {
    fail(ErrorCode::DuplicateDocument, "document '" + doc.doc_id + "' is already in the corpus");
  }
  auto chunks = chunk_document(doc, params);
  DocumentSummary s{doc.doc_id, doc.title, doc.tables.size(), chunks.size()};
  append(std::move(s), chunks);
  return chunks;
}

void Corpus::append(DocumentSummary summary, std::vector<Chunk> chunks) {
  if (contains_document(summary.doc_id)) {
    fail(ErrorCode::DuplicateDocument, "document '" + summary.doc_id + "' is already in the corpus");
  }
  for (const auto& c : chunks) {
    if (chunk_pos_.count(c.chunk_id)) fail(ErrorCode::DuplicateChunkId, "duplicate chunk id " + c.chunk_id);
  }
  doc_chunk_begin_.push_back(chunks_.size());
  documents_.push_back(std::move(summary));
  for (auto& c : chunks) {
    chunk_pos_.emplace(c.chunk_id, chunks_.size());
    chunks_.push_back(std::move(c));
  }
}

void Corpus::truncate(std::size_t documents) {
  if (documents >= documents_.size()) return;
  const auto keep_chunks = doc_chunk_begin_[documents];
  for (auto i = keep_chunks; i < chunks_.size(); ++i) chunk_pos_.erase(chunks_[i].chunk_id);
  chunks_.resize(keep_chunks);
  documents_.resize(documents);
  doc_chunk_begin_.resize(documents);
}

bool Corpus::contains_document(std::string_view doc_id) const {
  return std::any_of(documents_.begin(), documents_.end(),
                     [&](const DocumentSummary& d) { return d.doc_id == doc_id; });
}

const Chunk* Corpus::find_chunk(std::string_view chunk_id) const {
  const auto it = chunk_pos_.find(std::string(chunk_id));
  return it == chunk_pos_.end() ? nullptr : &chunks_[it->second];
}

CorpusStats Corpus::stats() const {
  CorpusStats s;
  s.documents = documents_.size();
  s.chunks = chunks_.size();
  for (const auto& d : documents_) s.tables += d.tables;
  return s;
}

}  // namespace rbqa
