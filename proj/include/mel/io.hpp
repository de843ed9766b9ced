#pragma once

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "mel/array.hpp"
#include "mel/errors.hpp"

namespace mel {

namespace io_detail {

inline std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(trim(field));
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

inline double parse_double(const std::string& s, int line_number) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError("line " + std::to_string(line_number) +
                    ": cannot parse number '" + s + "'");
  }
}

inline long parse_index(const std::string& s, int line_number) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError("line " + std::to_string(line_number) +
                    ": cannot parse index '" + s + "'");
  }
}

struct CsvHeader {
  int index_count = 0;  // 2 or 3
  int dim = 0;
};

inline CsvHeader parse_header(const std::string& line) {
  const auto fields = split_csv_line(line);
  CsvHeader h;
  if (fields.size() >= 3 && fields[0] == "i" && fields[1] == "j") {
    h.index_count = (fields.size() >= 4 && fields[2] == "t") ? 3 : 2;
  } else {
    throw DataError("line 1: header must start with i,j[,t] followed by v1..vd");
  }
  h.dim = int(fields.size()) - h.index_count;
  if (h.dim < 1) {
    throw DataError("line 1: header names no value columns v1..vd");
  }
  for (int k = 0; k < h.dim; ++k) {
    const std::string expected = "v" + std::to_string(k + 1);
    if (fields[h.index_count + k] != expected) {
      throw DataError("line 1: expected column '" + expected + "', found '" +
                      fields[h.index_count + k] + "'");
    }
  }
  return h;
}

struct CsvRecord {
  long i = 0, j = 0, t = 0;
  std::vector<double> values;
};

/// Streams the file once, validating per-line; index_count distinguishes
/// two-way from three-way files.
inline std::vector<CsvRecord> read_records(std::istream& in, CsvHeader* header) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("line 1: empty file, header row required");
  *header = parse_header(line);
  std::vector<CsvRecord> records;
  int line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    if (int(fields.size()) != header->index_count + header->dim) {
      throw DataError("line " + std::to_string(line_number) + ": expected " +
                      std::to_string(header->index_count + header->dim) +
                      " fields, found " + std::to_string(fields.size()));
    }
    CsvRecord rec;
    rec.i = parse_index(fields[0], line_number);
    rec.j = parse_index(fields[1], line_number);
    if (header->index_count == 3) rec.t = parse_index(fields[2], line_number);
    if (rec.i < 1 || rec.j < 1 || (header->index_count == 3 && rec.t < 1)) {
      throw DataError("line " + std::to_string(line_number) +
                      ": indices are 1-based and must be positive");
    }
    rec.values.resize(header->dim);
    for (int k = 0; k < header->dim; ++k) {
      rec.values[k] = parse_double(fields[header->index_count + k], line_number);
      if (!std::isfinite(rec.values[k])) {
        throw DataError("line " + std::to_string(line_number) +
                        ": non-finite value");
      }
    }
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace io_detail

/// Reads a balanced two-way array from CSV with header `i,j,v1..vd` and
/// 1-based indices. Every (i,j) pair up to the maximum indices must appear
/// exactly once.
inline TwoWayArray read_two_way_csv(std::istream& in) {
  io_detail::CsvHeader header;
  const auto records = io_detail::read_records(in, &header);
  if (header.index_count != 2) {
    throw DataError("expected a two-way file (header i,j,v1..), found three indices");
  }
  long max_i = 0, max_j = 0;
  for (const auto& r : records) {
    max_i = std::max(max_i, r.i);
    max_j = std::max(max_j, r.j);
  }
  if (max_i < 1 || max_j < 1) throw DataError("no data rows");
  TwoWayArray array(int(max_i), int(max_j), header.dim);
  std::vector<char> seen(std::size_t(max_i) * max_j, 0);
  for (const auto& r : records) {
    auto& flag = seen[std::size_t(r.i - 1) * max_j + (r.j - 1)];
    if (flag) {
      throw DataError("duplicate cell (" + std::to_string(r.i) + "," +
                      std::to_string(r.j) + ")");
    }
    flag = 1;
    for (int k = 0; k < header.dim; ++k) {
      array.at(int(r.i - 1), int(r.j - 1), k) = r.values[k];
    }
  }
  for (long i = 1; i <= max_i; ++i) {
    for (long j = 1; j <= max_j; ++j) {
      if (!seen[std::size_t(i - 1) * max_j + (j - 1)]) {
        throw DataError("missing cell (" + std::to_string(i) + "," +
                        std::to_string(j) + "); balanced arrays only");
      }
    }
  }
  return array;
}

inline ThreeWayArray read_three_way_csv(std::istream& in) {
  io_detail::CsvHeader header;
  const auto records = io_detail::read_records(in, &header);
  if (header.index_count != 3) {
    throw DataError("expected a three-way file (header i,j,t,v1..)");
  }
  long max_i = 0, max_j = 0, max_t = 0;
  for (const auto& r : records) {
    max_i = std::max(max_i, r.i);
    max_j = std::max(max_j, r.j);
    max_t = std::max(max_t, r.t);
  }
  if (max_i < 1 || max_j < 1 || max_t < 1) throw DataError("no data rows");
  ThreeWayArray array(int(max_i), int(max_j), int(max_t), header.dim);
  std::vector<char> seen(std::size_t(max_i) * max_j * max_t, 0);
  for (const auto& r : records) {
    auto& flag =
        seen[(std::size_t(r.i - 1) * max_j + (r.j - 1)) * max_t + (r.t - 1)];
    if (flag) {
      throw DataError("duplicate cell (" + std::to_string(r.i) + "," +
                      std::to_string(r.j) + "," + std::to_string(r.t) + ")");
    }
    flag = 1;
    for (int k = 0; k < header.dim; ++k) {
      array.at(int(r.i - 1), int(r.j - 1), int(r.t - 1), k) = r.values[k];
    }
  }
  for (std::size_t c = 0; c < seen.size(); ++c) {
    if (!seen[c]) {
      throw DataError("missing cells; balanced arrays only");
    }
  }
  return array;
}

inline TwoWayArray read_two_way_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return read_two_way_csv(in);
}

inline ThreeWayArray read_three_way_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return read_three_way_csv(in);
}

/// Detects two-way vs three-way from the header line alone.
inline int csv_index_count(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError("line 1: empty file");
  return io_detail::parse_header(line).index_count;
}

inline void write_two_way_csv(std::ostream& out, const TwoWayArray& array) {
  out << "i,j";
  for (int k = 0; k < array.dim(); ++k) out << ",v" << (k + 1);
  out << "\n";
  char buf[32];
  for (int i = 0; i < array.rows(); ++i) {
    for (int j = 0; j < array.cols(); ++j) {
      out << (i + 1) << ',' << (j + 1);
      for (int k = 0; k < array.dim(); ++k) {
        std::snprintf(buf, sizeof(buf), "%.17g", array.at(i, j, k));
        out << ',' << buf;
      }
      out << "\n";
    }
  }
}

inline void write_three_way_csv(std::ostream& out, const ThreeWayArray& array) {
  out << "i,j,t";
  for (int k = 0; k < array.dim(); ++k) out << ",v" << (k + 1);
  out << "\n";
  char buf[32];
  for (int i = 0; i < array.rows(); ++i) {
    for (int j = 0; j < array.cols(); ++j) {
      for (int t = 0; t < array.slabs(); ++t) {
        out << (i + 1) << ',' << (j + 1) << ',' << (t + 1);
        for (int k = 0; k < array.dim(); ++k) {
          std::snprintf(buf, sizeof(buf), "%.17g", array.at(i, j, t, k));
          out << ',' << buf;
        }
        out << "\n";
      }
    }
  }
}

}  // namespace mel
