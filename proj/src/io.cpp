#include "shiftlab/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "shiftlab/errors.hpp"

namespace shiftlab {
namespace io {

std::string format_g17(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

std::string dataset_to_csv(const LabeledDataset& data) {
  validate(data);
  std::string text;
  for (std::size_t j = 0; j < data.dim(); ++j) {
    text += "f" + std::to_string(j) + ",";
  }
  text += "label,group,domain\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto row = data.features.row(i);
    for (std::size_t j = 0; j < data.dim(); ++j) {
      text += format_g17(row[j]);
      text += ',';
    }
    text += std::to_string(data.labels[i]);
    text += ',';
    if (data.group) text += std::to_string((*data.group)[i]);
    text += ',';
    if (data.domain) text += std::to_string((*data.domain)[i]);
    text += '\n';
  }
  return text;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cell);
      cell.clear();
    } else if (c != '\r') {
      cell += c;
    }
  }
  cells.push_back(cell);
  return cells;
}

int parse_int(const std::string& cell, const char* what) {
  try {
    std::size_t used = 0;
    const int value = std::stoi(cell, &used);
    if (used != cell.size()) throw std::invalid_argument(cell);
    return value;
  } catch (const std::exception&) {
    throw InvalidInputError(std::string("dataset csv: bad ") + what + ": " + cell);
  }
}

double parse_double(const std::string& cell) {
  try {
    std::size_t used = 0;
    const double value = std::stod(cell, &used);
    if (used != cell.size()) throw std::invalid_argument(cell);
    return value;
  } catch (const std::exception&) {
    throw InvalidInputError("dataset csv: bad number: " + cell);
  }
}

}  // namespace

LabeledDataset dataset_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) {
    throw InvalidInputError("dataset csv: empty input");
  }
  const std::vector<std::string> header = split_line(line);
  if (header.size() < 4) {
    throw InvalidInputError("dataset csv: malformed header");
  }
  const std::size_t d = header.size() - 3;
  for (std::size_t j = 0; j < d; ++j) {
    if (header[j] != "f" + std::to_string(j)) {
      throw InvalidInputError("dataset csv: unexpected column " + header[j]);
    }
  }
  if (header[d] != "label" || header[d + 1] != "group" ||
      header[d + 2] != "domain") {
    throw InvalidInputError("dataset csv: unexpected trailing columns");
  }

  std::vector<Vector> rows;
  std::vector<int> labels;
  std::vector<int> groups, domains;
  bool any_group = false, any_domain = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> cells = split_line(line);
    if (cells.size() != header.size()) {
      throw InvalidInputError("dataset csv: wrong cell count in row");
    }
    Vector features(d);
    for (std::size_t j = 0; j < d; ++j) features[j] = parse_double(cells[j]);
    rows.push_back(std::move(features));
    labels.push_back(parse_int(cells[d], "label"));
    if (cells[d + 1].empty()) {
      groups.push_back(0);
    } else {
      any_group = true;
      groups.push_back(parse_int(cells[d + 1], "group"));
    }
    if (cells[d + 2].empty()) {
      domains.push_back(0);
    } else {
      any_domain = true;
      domains.push_back(parse_int(cells[d + 2], "domain"));
    }
  }

  LabeledDataset data;
  data.features = Matrix(rows.size(), d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy(rows[i].begin(), rows[i].end(), data.features.row(i).data());
  }
  data.labels = std::move(labels);
  if (any_group) data.group = std::move(groups);
  if (any_domain) data.domain = std::move(domains);
  validate(data);
  return data;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidInputError("cannot open for writing: " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw InvalidInputError("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInputError("cannot open for reading: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

namespace {

void render(const Json& value, std::string& out, int depth) {
  const std::string pad(2 * static_cast<std::size_t>(depth), ' ');
  const std::string pad_in(2 * static_cast<std::size_t>(depth + 1), ' ');
  switch (value.type()) {
    case Json::value_t::object: {
      if (value.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      std::size_t i = 0;
      for (const auto& [key, child] : value.items()) {
        out += pad_in + Json(key).dump() + ": ";
        render(child, out, depth + 1);
        if (++i < value.size()) out += ',';
        out += '\n';
      }
      out += pad + "}";
      return;
    }
    case Json::value_t::array: {
      if (value.empty()) {
        out += "[]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < value.size(); ++i) {
        out += pad_in;
        render(value[i], out, depth + 1);
        if (i + 1 < value.size()) out += ',';
        out += '\n';
      }
      out += pad + "]";
      return;
    }
    case Json::value_t::number_float:
      out += format_g17(value.get<double>());
      return;
    default:
      // Integers, strings, booleans, null: nlohmann's rendering is already
      // deterministic.
      out += value.dump();
      return;
  }
}

}  // namespace

std::string render_json(const Json& value) {
  std::string out;
  render(value, out, 0);
  out += '\n';
  return out;
}

CsvBuilder& CsvBuilder::cell(const std::string& value) {
  if (row_open_) text_ += ',';
  text_ += value;
  row_open_ = true;
  return *this;
}

CsvBuilder& CsvBuilder::cell(const char* value) {
  return cell(std::string(value));
}

CsvBuilder& CsvBuilder::cell(double value) { return cell(format_g17(value)); }

CsvBuilder& CsvBuilder::cell(std::size_t value) {
  return cell(std::to_string(value));
}

CsvBuilder& CsvBuilder::cell(long long value) {
  return cell(std::to_string(value));
}

CsvBuilder& CsvBuilder::end_row() {
  text_ += '\n';
  row_open_ = false;
  return *this;
}

}  // namespace io
}  // namespace shiftlab
