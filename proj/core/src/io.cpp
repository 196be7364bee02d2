#include "fluxfilter/io.hpp"

#include <openssl/crypto.h>

#include <array>
#include <charconv>
#include <fstream>
#include <cmath>
#include <sstream>

#include "fluxfilter/errors.hpp"
#include "json.hpp"

#ifndef FLUXFILTER_VERSION
#define FLUXFILTER_VERSION "unknown"
#endif

namespace fluxfilter {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

/// Minimal reader for the numeric CSVs written by CsvWriter.
class CsvReader {
 public:
  CsvReader(const std::filesystem::path& path, const std::vector<std::string>& expected)
      : path_(path.string()), in_(path) {
    if (!in_) throw ConfigError("cannot open " + path_);
    std::string line;
    while (next_line(line)) {
      if (line.empty() || line.front() == '#') continue;
      if (split(line, ',') != expected) {
        std::string want;
        for (const auto& c : expected) want += (want.empty() ? "" : ",") + c;
        throw ParseError(path_, line_no_, "expected header '" + want + "'");
      }
      width_ = expected.size();
      return;
    }
    throw ParseError(path_, line_no_, "missing column header");
  }

  /// Next data row, parsed as numbers. False at end of file.
  bool next(std::vector<double>& values) {
    std::string line;
    while (next_line(line)) {
      if (line.empty() || line.front() == '#') continue;
      const auto cells = split(line, ',');
      if (cells.size() != width_) {
        throw ParseError(path_, line_no_,
                         "expected " + std::to_string(width_) + " columns, got " +
                             std::to_string(cells.size()));
      }
      values.resize(width_);
      for (std::size_t c = 0; c < width_; ++c) {
        const std::string& s = cells[c];
        double v = 0.0;
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size() ||
            !std::isfinite(v)) {
          throw ParseError(path_, line_no_, "malformed number '" + s + "' in column " +
                                                std::to_string(c + 1));
        }
        values[c] = v;
      }
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(path_, line_no_, what); }
  std::size_t line() const { return line_no_; }

 private:
  bool next_line(std::string& line) {
    if (!std::getline(in_, line)) return false;
    ++line_no_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  }

  std::string path_;
  std::ifstream in_;
  std::size_t line_no_ = 0;
  std::size_t width_ = 0;
};

int as_index(const CsvReader& reader, double v, const char* what) {
  if (v < 0 || v != std::floor(v) || v > 1e9) {
    reader.fail(std::string(what) + " must be a non-negative integer");
  }
  return static_cast<int>(v);
}

/// Reads (time, id, value) rows into per-time vectors with ids 0..n-1 in order.
void read_indexed(const std::filesystem::path& path, const std::vector<std::string>& columns,
                  std::vector<double>& times, std::vector<Eigen::VectorXd>& values) {
  CsvReader reader(path, columns);
  times.clear();
  values.clear();
  std::vector<double> row;
  std::vector<double> current;
  Eigen::Index width = -1;
  auto flush = [&]() {
    if (width >= 0 && static_cast<Eigen::Index>(current.size()) != width) {
      reader.fail("time " + format_number(times.back()) + " has " + std::to_string(current.size()) +
                  " entries, expected " + std::to_string(width));
    }
    width = static_cast<Eigen::Index>(current.size());
    values.emplace_back(Eigen::Map<const Eigen::VectorXd>(current.data(), width));
    current.clear();
  };
  while (reader.next(row)) {
    const int id = as_index(reader, row[1], columns[1].c_str());
    if (times.empty() || row[0] != times.back()) {
      if (!times.empty()) {
        if (row[0] < times.back()) reader.fail("time stamps are not increasing");
        flush();
      }
      times.push_back(row[0]);
    }
    if (id != static_cast<int>(current.size())) {
      reader.fail(columns[1] + " " + std::to_string(id) + " out of order, expected " +
                  std::to_string(current.size()));
    }
    current.push_back(row[2]);
  }
  if (times.empty()) reader.fail("no data rows");
  flush();
}

}  // namespace

std::string format_number(double value) {
  std::array<char, 64> buf{};
  const auto res =
      std::to_chars(buf.data(), buf.data() + buf.size(), value, std::chars_format::general, 17);
  return std::string(buf.data(), res.ptr);
}

CsvWriter::CsvWriter(CsvTag tag, std::vector<std::string> columns) : width_(columns.size()) {
  text_ = "# fluxfilter config_hash=" + tag.config_hash + " seed=" + std::to_string(tag.seed);
  for (const auto& [k, v] : tag.extra) text_ += " " + k + "=" + v;
  text_ += "\n";
  for (std::size_t c = 0; c < columns.size(); ++c) text_ += (c ? "," : "") + columns[c];
  text_ += "\n";
}

CsvWriter& CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != width_) throw std::logic_error("CSV row width mismatch");
  for (std::size_t c = 0; c < cells.size(); ++c) text_ += (c ? "," : "") + cells[c];
  text_ += "\n";
  return *this;
}

CsvWriter& CsvWriter::row(std::initializer_list<double> values) {
  std::vector<std::string> cells;
  cells.reserve(values.size());
  for (double v : values) cells.push_back(format_number(v));
  return row(cells);
}

std::string CsvWriter::str() const { return text_; }

void CsvWriter::save(const std::filesystem::path& path) const { write_text(path, text_); }

std::map<std::string, std::string> read_csv_tag(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  const std::string prefix = "# fluxfilter ";
  if (line.rfind(prefix, 0) != 0) throw ParseError(path.string(), 1, "missing '# fluxfilter' tag line");
  std::map<std::string, std::string> out;
  std::istringstream words(line.substr(prefix.size()));
  std::string word;
  while (words >> word) {
    const auto eq = word.find('=');
    if (eq == std::string::npos) throw ParseError(path.string(), 1, "malformed tag '" + word + "'");
    out[word.substr(0, eq)] = word.substr(eq + 1);
  }
  return out;
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (columns[c] == name) return c;
  }
  throw ConfigError("CSV has no column '" + name + "'");
}

double CsvTable::number(std::size_t row, const std::string& name) const {
  const std::string& s = rows.at(row).at(column(name));
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ConfigError("CSV cell '" + s + "' in column " + name + " is not a number");
  }
  return v;
}

CsvTable read_csv_table(const std::filesystem::path& path) {
  CsvTable table;
  table.tag = read_csv_tag(path);
  std::ifstream in(path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    auto cells = split(line, ',');
    if (table.columns.empty()) {
      table.columns = std::move(cells);
    } else if (cells.size() != table.columns.size()) {
      throw ParseError(path.string(), line_no,
                       "expected " + std::to_string(table.columns.size()) + " columns, got " +
                           std::to_string(cells.size()));
    } else {
      table.rows.push_back(std::move(cells));
    }
  }
  if (table.columns.empty()) throw ParseError(path.string(), line_no, "missing column header");
  return table;
}

void write_measurements(const std::filesystem::path& path, const CsvTag& tag,
                        const std::vector<MeasurementBatch>& batches) {
  CsvWriter csv(tag, {"time", "sensor_id", "reading"});
  for (const auto& b : batches) {
    for (Eigen::Index s = 0; s < b.readings.size(); ++s) {
      csv.row({format_number(b.time), std::to_string(b.sensor_ids[static_cast<std::size_t>(s)]),
               format_number(b.readings[s])});
    }
  }
  csv.save(path);
}

std::vector<MeasurementBatch> read_measurements(const std::filesystem::path& path) {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> values;
  read_indexed(path, {"time", "sensor_id", "reading"}, times, values);
  std::vector<MeasurementBatch> out(times.size());
  for (std::size_t t = 0; t < times.size(); ++t) {
    out[t].time = times[t];
    out[t].readings = std::move(values[t]);
    out[t].sensor_ids.resize(static_cast<std::size_t>(out[t].readings.size()));
    for (std::size_t s = 0; s < out[t].sensor_ids.size(); ++s) out[t].sensor_ids[s] = static_cast<int>(s);
  }
  return out;
}

void write_flux_series(const std::filesystem::path& path, const CsvTag& tag,
                       const std::vector<FluxField>& series, const std::string& value_column) {
  CsvWriter csv(tag, {"time", "face_id", value_column});
  for (const auto& field : series) {
    const std::string t = format_number(field.time);
    for (Eigen::Index f = 0; f < field.values.size(); ++f) {
      csv.row({t, std::to_string(f), format_number(field.values[f])});
    }
  }
  csv.save(path);
}

std::vector<FluxField> read_flux_series(const std::filesystem::path& path,
                                        const std::string& value_column) {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> values;
  read_indexed(path, {"time", "face_id", value_column}, times, values);
  std::vector<FluxField> out(times.size());
  for (std::size_t t = 0; t < times.size(); ++t) out[t] = {std::move(values[t]), times[t]};
  return out;
}

void write_sensor_series(const std::filesystem::path& path, const CsvTag& tag,
                         const std::vector<double>& times,
                         const std::vector<Eigen::VectorXd>& temperatures) {
  CsvWriter csv(tag, {"time", "sensor_id", "temperature"});
  for (std::size_t t = 0; t < times.size(); ++t) {
    const std::string ts = format_number(times[t]);
    for (Eigen::Index s = 0; s < temperatures[t].size(); ++s) {
      csv.row({ts, std::to_string(s), format_number(temperatures[t][s])});
    }
  }
  csv.save(path);
}

void read_sensor_series(const std::filesystem::path& path, std::vector<double>& times,
                        std::vector<Eigen::VectorXd>& temperatures) {
  read_indexed(path, {"time", "sensor_id", "temperature"}, times, temperatures);
}

void write_manifest(const std::filesystem::path& path, const Manifest& m) {
  nlohmann::ordered_json j;
  j["command"] = m.command;
  j["config_hash"] = m.config_hash;
  j["twin_hash"] = m.twin_hash;
  j["seed"] = m.seed;
  j["files"] = m.files;
  j["versions"] = m.versions;
  j["timings_s"] = m.timings;
  write_text(path, j.dump(2) + "\n");
}

Manifest read_manifest(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(path));
    Manifest m;
    m.command = j.at("command").get<std::string>();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.twin_hash = j.at("twin_hash").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.files = j.at("files").get<std::vector<std::string>>();
    m.versions = j.value("versions", std::map<std::string, std::string>{});
    m.timings = j.value("timings_s", std::map<std::string, double>{});
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed manifest " + path.string() + ": " + e.what());
  }
}

std::map<std::string, std::string> version_info() {
  return {
      {"fluxfilter", FLUXFILTER_VERSION},
      {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                    "." + std::to_string(EIGEN_MINOR_VERSION)},
      {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                            std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                            std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
      {"openssl", OpenSSL_version(OPENSSL_VERSION)},
  };
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
  if (!out) throw ConfigError("write failed for " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace fluxfilter
