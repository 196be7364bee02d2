#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "fluxfilter/filter.hpp"
#include "fluxfilter/forward_model.hpp"

namespace fluxfilter {

/// 17 significant digits, round-trips every double.
std::string format_number(double value);

/// Key/value pairs written to the leading `# fluxfilter key=value ...` line of every CSV.
struct CsvTag {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> extra;
};

/// Buffered CSV writer: tag line, column header, rows. Nothing touches disk until `save`.
class CsvWriter {
 public:
  CsvWriter(CsvTag tag, std::vector<std::string> columns);

  CsvWriter& row(const std::vector<std::string>& cells);
  CsvWriter& row(std::initializer_list<double> values);
  std::string str() const;
  void save(const std::filesystem::path& path) const;

 private:
  std::string text_;
  std::size_t width_;
};

/// Parsed tag line of a CSV written by CsvWriter.
std::map<std::string, std::string> read_csv_tag(const std::filesystem::path& path);

/// Any CSV written by CsvWriter, kept as text.
struct CsvTable {
  std::map<std::string, std::string> tag;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  /// Index of `name` in columns; throws ConfigError when absent.
  std::size_t column(const std::string& name) const;
  double number(std::size_t row, const std::string& name) const;
};

CsvTable read_csv_table(const std::filesystem::path& path);

/// time, sensor_id, reading. One batch per distinct time, sensors in id order.
void write_measurements(const std::filesystem::path& path, const CsvTag& tag,
                        const std::vector<MeasurementBatch>& batches);
std::vector<MeasurementBatch> read_measurements(const std::filesystem::path& path);

/// time, face_id, flux.
void write_flux_series(const std::filesystem::path& path, const CsvTag& tag,
                       const std::vector<FluxField>& series, const std::string& value_column = "flux");
std::vector<FluxField> read_flux_series(const std::filesystem::path& path,
                                        const std::string& value_column = "flux");

/// time, sensor_id, temperature (noise-free truth at the sensors).
void write_sensor_series(const std::filesystem::path& path, const CsvTag& tag,
                         const std::vector<double>& times,
                         const std::vector<Eigen::VectorXd>& temperatures);
void read_sensor_series(const std::filesystem::path& path, std::vector<double>& times,
                        std::vector<Eigen::VectorXd>& temperatures);

struct Manifest {
  std::string command;
  std::string config_hash;
  std::string twin_hash;
  std::uint64_t seed = 0;
  std::vector<std::string> files;  // relative to the manifest's directory
  std::map<std::string, std::string> versions;
  std::map<std::string, double> timings;  // seconds
};

void write_manifest(const std::filesystem::path& path, const Manifest& manifest);
Manifest read_manifest(const std::filesystem::path& path);

/// Library and dependency versions recorded in manifests.
std::map<std::string, std::string> version_info();

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace fluxfilter
