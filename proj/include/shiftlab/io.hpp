#pragma once

#include <string>

#include "shiftlab/dataset.hpp"

#include <json.hpp>

// Deterministic serialization: every floating-point value rendered with 17
// significant digits so identical runs produce byte-identical files.
namespace shiftlab {
namespace io {

using Json = nlohmann::ordered_json;

// %.17g rendering used by every CSV and JSON writer.
std::string format_g17(double value);

// Dataset CSV: header f0,...,f{d-1},label,group,domain; label +1/-1;
// group/domain cells empty when the dataset carries no tags.
std::string dataset_to_csv(const LabeledDataset& data);
LabeledDataset dataset_from_csv(const std::string& text);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

// JSON rendered with insertion-ordered keys, two-space indent, doubles in
// %.17g, trailing newline.
std::string render_json(const Json& value);

// Incremental CSV assembly with %.17g numeric cells.
class CsvBuilder {
 public:
  CsvBuilder& cell(const std::string& value);
  CsvBuilder& cell(const char* value);
  CsvBuilder& cell(double value);
  CsvBuilder& cell(std::size_t value);
  CsvBuilder& cell(long long value);
  CsvBuilder& end_row();
  const std::string& str() const { return text_; }

 private:
  std::string text_;
  bool row_open_ = false;
};

}  // namespace io
}  // namespace shiftlab
