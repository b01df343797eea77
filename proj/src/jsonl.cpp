#include "reflect/jsonl.hpp"

#include <cerrno>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#ifdef _WIN32
#include <io.h>
#else
#include <unistd.h>
#endif

namespace reflect {

namespace {

void fsync_file(std::FILE* file) {
#ifdef _WIN32
  _commit(_fileno(file));
#else
  ::fsync(fileno(file));
#endif
}

}  // namespace

JsonlWriter::JsonlWriter(const std::string& path, bool truncate) : path_(path) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  file_ = std::fopen(path.c_str(), truncate ? "wb" : "ab");
  if (!file_) {
    throw std::runtime_error("cannot open for append: " + path + ": " + std::strerror(errno));
  }
}

JsonlWriter::~JsonlWriter() {
  if (file_) {
    if (dirty_) commit();
    std::fclose(file_);
  }
}

void JsonlWriter::append(const ordered_json& record) {
  // Model completions are not guaranteed to be valid UTF-8; substitute
  // rather than abort a long run mid-phase.
  std::string line =
      record.dump(-1, ' ', false, nlohmann::ordered_json::error_handler_t::replace);
  line.push_back('\n');
  if (std::fwrite(line.data(), 1, line.size(), file_) != line.size()) {
    throw std::runtime_error("short write to " + path_);
  }
  dirty_ = true;
}

void JsonlWriter::commit() {
  if (!dirty_) return;
  if (std::fflush(file_) != 0) {
    throw std::runtime_error("flush failed for " + path_);
  }
  fsync_file(file_);
  dirty_ = false;
}

JsonlReadResult read_jsonl_prefix(const std::string& path) {
  JsonlReadResult result;
  std::ifstream in(path, std::ios::binary);
  if (!in) return result;
  std::string line;
  std::size_t offset = 0;
  while (std::getline(in, line)) {
    bool has_newline = !in.eof();
    std::string trimmed = line;
    if (!trimmed.empty() && trimmed.back() == '\r') trimmed.pop_back();
    if (trimmed.empty()) {
      if (has_newline) {
        offset += line.size() + 1;
        result.valid_bytes = offset;
        continue;
      }
      break;
    }
    ordered_json record = ordered_json::parse(trimmed, nullptr, false);
    if (record.is_discarded() || !has_newline) {
      // A record without a trailing newline is treated as a partial write.
      if (!record.is_discarded() && !has_newline) {
        result.truncated_tail = true;
        break;
      }
      result.truncated_tail = true;
      break;
    }
    result.records.push_back(std::move(record));
    offset += line.size() + 1;
    result.valid_bytes = offset;
  }
  return result;
}

std::vector<ordered_json> read_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::vector<ordered_json> records;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    try {
      records.push_back(ordered_json::parse(line));
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(line_number) +
                               ": malformed JSON line: " + e.what());
    }
  }
  return records;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path);
}

void write_text_file_atomic(const std::string& path, const std::string& content) {
  std::string tmp = path + ".tmp";
  write_text_file(tmp, content);
  std::filesystem::rename(tmp, path);
}

bool file_exists(const std::string& path) {
  std::error_code ec;
  return std::filesystem::exists(path, ec);
}

void truncate_file(const std::string& path, std::size_t length) {
  std::filesystem::resize_file(path, length);
}

}  // namespace reflect
