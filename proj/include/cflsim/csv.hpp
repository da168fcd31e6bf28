#pragma once

// Minimal CSV: comma separated, no quoting (no field ever contains a comma).

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace cflsim {

// Full-precision, locale-independent rendering.
std::string csv_real(double v);

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {}
  void add(std::vector<std::string> row);
  std::string str() const;
  void save(const std::filesystem::path& path) const;
  std::size_t rows() const { return rows_.size(); }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Throws std::out_of_range naming the column when it is absent.
  std::size_t column(std::string_view name) const;
  bool has_column(std::string_view name) const;
  const std::string& get(std::size_t row, std::string_view name) const;
  double real(std::size_t row, std::string_view name) const;
  long long integer(std::size_t row, std::string_view name) const;
};

CsvTable parse_csv(std::string_view text);
CsvTable read_csv(const std::filesystem::path& path);

}  // namespace cflsim
