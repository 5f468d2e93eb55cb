#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "resonet/chain.hpp"
#include "resonet/hypotheses.hpp"
#include "resonet/resonance.hpp"
#include "resonet/simulate.hpp"

namespace resonet {

inline constexpr const char* kVersion = "0.1.0";

using json = nlohmann::ordered_json;

struct OutputHeader {
  std::string command;
  std::string config_hash;
  std::uint64_t seed = 0;
};

// %.17g with -0 printed as 0.
std::string fmt(double x);
// -0 -> 0, non-finite -> null.
json num(double x);
json vec_json(const Vec& v);
json mode_json(const Mode& m);

// FNV-1a, 16 hex digits.
std::string hash_hex(const std::string& text);

// Writes path.tmp then renames it over path.
void write_atomic(const std::filesystem::path& path, const std::string& content);

class CsvTable {
 public:
  CsvTable(const OutputHeader& h, std::vector<std::string> columns);
  void row(const std::vector<double>& values);
  void row(const std::vector<std::string>& cells);
  std::string str() const;
  std::size_t rows() const { return rows_; }

 private:
  std::string text_;
  std::size_t width_;
  std::size_t rows_ = 0;
};

json header_json(const OutputHeader& h);
std::string dump(const json& j);  // two-space indent, trailing newline

json to_json(const Resonance& r);
json to_json(const CodimTwo& c);
json to_json(const HypothesisReport& r);
json to_json(const Chain& c);
json to_json(const ScatteringMeasurement& s);

// gnuplot script plotting columns (x, y...) of a CSV file with '#' comments.
std::string gnuplot_script(const std::string& csv, const std::string& title, int xcol,
                           const std::vector<std::pair<int, std::string>>& ycols);

// Polyline, one point per line, comma or blank separated; '#' starts a comment.
std::vector<Vec> read_path_file(const std::string& path);

}  // namespace resonet
