#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "json.hpp"

namespace reflect {

using ordered_json = nlohmann::ordered_json;

// Append-only JSON-L writer. Records are buffered until commit(), which
// flushes and fsyncs so a committed batch survives a crash.
class JsonlWriter {
 public:
  explicit JsonlWriter(const std::string& path, bool truncate = false);
  JsonlWriter(const JsonlWriter&) = delete;
  JsonlWriter& operator=(const JsonlWriter&) = delete;
  ~JsonlWriter();

  void append(const ordered_json& record);
  void commit();
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::FILE* file_ = nullptr;
  bool dirty_ = false;
};

struct JsonlReadResult {
  std::vector<ordered_json> records;
  bool truncated_tail = false;   // a malformed or partial trailing region was dropped
  std::size_t valid_bytes = 0;   // byte length of the well-formed prefix
};

// Reads records up to the first malformed line; the remainder is reported
// as a truncated tail instead of failing the whole file.
JsonlReadResult read_jsonl_prefix(const std::string& path);

// Strict variant: throws on any malformed line, with the line number.
std::vector<ordered_json> read_jsonl(const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);
// Writes via a temp file + rename so readers never observe a partial file.
void write_text_file_atomic(const std::string& path, const std::string& content);
bool file_exists(const std::string& path);
void truncate_file(const std::string& path, std::size_t length);

}  // namespace reflect
