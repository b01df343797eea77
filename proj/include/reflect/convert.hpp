#pragma once

#include <string>
#include <vector>

#include "reflect/corpus.hpp"

namespace reflect {

struct ConversionReport {
  std::size_t converted = 0;
  std::size_t skipped = 0;
  std::vector<std::string> messages;
};

std::vector<std::string> known_formats();  // arc, agieval, hellaswag, medmcqa

/// Converts one upstream benchmark file (JSON-L) into the standardized
/// problem schema. Rows that cannot be mapped (missing gold answer, bad
/// option index) are skipped and counted, not fatal. source_id is the
/// 1-based row number within the input file.
ConversionReport convert_file(const std::string& input_path, const std::string& format,
                              const std::string& source_name, const std::string& topic,
                              const std::string& output_path);

}  // namespace reflect
