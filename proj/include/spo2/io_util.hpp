#pragma once

#include <string>
#include <vector>

namespace spo2 {

// Writes content to a temp file in the same directory, then renames it
// over the target, so interrupted runs never leave partial artifacts.
void atomic_write(const std::string& path, const std::string& content);
void atomic_write_binary(const std::string& path,
                         const std::vector<unsigned char>& content);

std::string read_file(const std::string& path);

std::string format_double(double v);

struct Csv {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  bool has_column(const std::string& name) const;
  std::size_t column_index(const std::string& name) const;  // throws schema
  std::vector<double> column(const std::string& name) const;
};

Csv read_csv(const std::string& path);
void write_csv(const std::string& path, const std::vector<std::string>& cols,
               const std::vector<std::vector<double>>& rows);

}  // namespace spo2
