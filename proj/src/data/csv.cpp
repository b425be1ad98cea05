#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "qmoe/data.hpp"
#include "qmoe/error.hpp"

namespace qmoe::data {
namespace {

// Reads one RFC-4180 record; returns false at end of input.
bool read_record(std::istream& in, std::vector<std::string>& fields, std::size_t& line) {
  fields.clear();
  int c = in.peek();
  if (c == EOF) return false;
  std::string field;
  bool quoted = false;
  bool in_quotes = false;
  while (true) {
    c = in.get();
    if (c == EOF) {
      if (in_quotes) throw IngestError("line " + std::to_string(line) + ": unterminated quote");
      fields.push_back(std::move(field));
      return true;
    }
    const char ch = static_cast<char>(c);
    if (in_quotes) {
      if (ch == '"') {
        if (in.peek() == '"') {
          in.get();
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        if (ch == '\n') ++line;
        field.push_back(ch);
      }
      continue;
    }
    if (ch == '"' && field.empty() && !quoted) {
      quoted = in_quotes = true;
    } else if (ch == ',') {
      fields.push_back(std::move(field));
      field.clear();
      quoted = false;
    } else if (ch == '\r') {
      if (in.peek() == '\n') in.get();
      fields.push_back(std::move(field));
      ++line;
      return true;
    } else if (ch == '\n') {
      fields.push_back(std::move(field));
      ++line;
      return true;
    } else {
      field.push_back(ch);
    }
  }
}

double parse_number(const std::string& text, const std::string& where) {
  std::size_t b = 0;
  std::size_t e = text.size();
  while (b < e && (text[b] == ' ' || text[b] == '\t')) ++b;
  while (e > b && (text[e - 1] == ' ' || text[e - 1] == '\t')) --e;
  if (b == e) throw IngestError(where + ": missing value");
  double v = 0.0;
  const char* first = text.data() + b;
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, text.data() + e, v);
  if (ec != std::errc{} || ptr != text.data() + e || !std::isfinite(v)) {
    throw IngestError(where + ": cannot parse '" + text + "' as a number");
  }
  return v;
}

}  // namespace

std::vector<std::string> feature_names() {
  std::vector<std::string> names;
  for (int i = 1; i <= 28; ++i) names.push_back("V" + std::to_string(i));
  names.emplace_back("Amount");
  return names;
}

std::size_t Dataset::positives() const {
  std::size_t n = 0;
  for (int y : labels) n += static_cast<std::size_t>(y == 1);
  return n;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset d;
  d.features = features.select_rows(indices);
  d.columns = columns;
  d.labels.reserve(indices.size());
  for (std::size_t i : indices) d.labels.push_back(labels[i]);
  if (!components.empty()) {
    for (std::size_t i : indices) d.components.push_back(components[i]);
  }
  return d;
}

void Dataset::validate() const {
  if (features.rows() != labels.size()) throw InputError("dataset: row/label count mismatch");
  if (!components.empty() && components.size() != labels.size()) {
    throw InputError("dataset: component metadata length mismatch");
  }
  for (int y : labels) {
    if (y != 0 && y != 1) throw InputError("dataset: labels must be 0 or 1");
  }
}

Dataset read_csv(std::istream& in, const std::string& source_name) {
  std::size_t line = 1;
  std::vector<std::string> header;
  if (!read_record(in, header, line)) throw IngestError(source_name + ": empty file");
  if (!header.empty() && header[0].rfind("\xEF\xBB\xBF", 0) == 0) header[0].erase(0, 3);

  std::map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < header.size(); ++i) position.emplace(header[i], i);
  std::vector<std::string> required{"Time"};
  for (const auto& n : feature_names()) required.push_back(n);
  required.emplace_back("Class");
  std::string missing;
  for (const auto& name : required) {
    if (!position.contains(name)) missing += (missing.empty() ? "" : ", ") + name;
  }
  if (!missing.empty()) throw IngestError(source_name + ": schema error, missing column(s) " + missing);

  std::vector<std::size_t> feature_cols;
  for (const auto& n : feature_names()) feature_cols.push_back(position.at(n));
  const std::size_t class_col = position.at("Class");

  Dataset d;
  d.columns = feature_names();
  d.features = FeatureMatrix(0, kFeatureCount);
  std::vector<std::string> fields;
  std::vector<double> row(kFeatureCount);
  std::size_t record = 0;
  while (true) {
    const std::size_t record_line = line;
    if (!read_record(in, fields, line)) break;
    if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
    ++record;
    auto where = [&](const std::string& col) {
      return source_name + ": row " + std::to_string(record) + " (line " +
             std::to_string(record_line) + "), column " + col;
    };
    if (fields.size() != header.size()) {
      throw IngestError(where("*") + ": expected " + std::to_string(header.size()) +
                        " fields, found " + std::to_string(fields.size()));
    }
    for (std::size_t j = 0; j < kFeatureCount; ++j) {
      row[j] = parse_number(fields[feature_cols[j]], where(d.columns[j]));
    }
    const double cls = parse_number(fields[class_col], where("Class"));
    if (cls != 0.0 && cls != 1.0) throw IngestError(where("Class") + ": label must be 0 or 1");
    d.features.append_row(row);
    d.labels.push_back(static_cast<int>(cls));
  }
  return d;
}

Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError("cannot open " + path.string());
  return read_csv(in, path.string());
}

void write_csv(std::ostream& out, const Dataset& dataset) {
  dataset.validate();
  if (dataset.features.cols() != kFeatureCount) {
    throw InputError("write_csv: dataset must have " + std::to_string(kFeatureCount) + " features");
  }
  out << "\"Time\"";
  for (const auto& n : feature_names()) out << ",\"" << n << '"';
  out << ",\"Class\"\n";
  char buf[64];
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    out << i;
    for (double v : dataset.features.row(i)) {
      const auto res = std::to_chars(buf, buf + sizeof buf, v);
      out << ',' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
    }
    out << ",\"" << dataset.labels[i] << "\"\n";
  }
}

void save_csv(const std::filesystem::path& path, const Dataset& dataset) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestError("cannot write " + path.string());
  write_csv(out, dataset);
}

}  // namespace qmoe::data
