#include "spo2/io_util.hpp"

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "spo2/error.hpp"

namespace spo2 {

namespace {

void rename_into_place(const std::string& tmp, const std::string& path) {
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error(Errc::corrupt_input,
                "cannot write " + path + ": " + ec.message());
  }
}

std::string temp_name(const std::string& path) {
  return path + ".tmp." + std::to_string(::getpid());
}

}  // namespace

void atomic_write(const std::string& path, const std::string& content) {
  const std::string tmp = temp_name(path);
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw Error(Errc::corrupt_input, "cannot open " + tmp);
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!f) throw Error(Errc::corrupt_input, "short write to " + tmp);
  }
  rename_into_place(tmp, path);
}

void atomic_write_binary(const std::string& path,
                         const std::vector<unsigned char>& content) {
  const std::string tmp = temp_name(path);
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw Error(Errc::corrupt_input, "cannot open " + tmp);
    f.write(reinterpret_cast<const char*>(content.data()),
            static_cast<std::streamsize>(content.size()));
    if (!f) throw Error(Errc::corrupt_input, "short write to " + tmp);
  }
  rename_into_place(tmp, path);
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::corrupt_input, "cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

bool Csv::has_column(const std::string& name) const {
  for (const auto& c : columns)
    if (c == name) return true;
  return false;
}

std::size_t Csv::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name) return i;
  throw Error(Errc::shape_mismatch, "missing CSV column '" + name + "'");
}

std::vector<double> Csv::column(const std::string& name) const {
  const std::size_t idx = column_index(name);
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r[idx]);
  return out;
}

Csv read_csv(const std::string& path) {
  const std::string text = read_file(path);
  Csv csv;
  std::istringstream in(text);
  std::string line;
  bool header = true;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t pos = 0;
    while (true) {
      const std::size_t comma = line.find(',', pos);
      cells.push_back(line.substr(pos, comma - pos));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (header) {
      csv.columns = cells;
      header = false;
      continue;
    }
    if (cells.size() != csv.columns.size())
      throw Error(Errc::corrupt_input, path + ":" + std::to_string(lineno) +
                                           ": wrong number of cells");
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(c, &used));
        if (used != c.size()) throw std::invalid_argument(c);
      } catch (const std::exception&) {
        throw Error(Errc::corrupt_input, path + ":" + std::to_string(lineno) +
                                             ": not a number: '" + c + "'");
      }
    }
    csv.rows.push_back(std::move(row));
  }
  if (csv.columns.empty())
    throw Error(Errc::corrupt_input, path + ": empty CSV");
  return csv;
}

void write_csv(const std::string& path, const std::vector<std::string>& cols,
               const std::vector<std::vector<double>>& rows) {
  std::string out;
  for (std::size_t i = 0; i < cols.size(); ++i)
    out += (i ? "," : "") + cols[i];
  out += "\n";
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i)
      out += (i ? "," : "") + format_double(r[i]);
    out += "\n";
  }
  atomic_write(path, out);
}

}  // namespace spo2
