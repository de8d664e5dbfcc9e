#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace damsim::harness {

/// Exact trace header; rows follow (seed, t, agent) order with agent -1 for
/// the network aggregate.
inline constexpr std::string_view kTraceHeader =
    "run_id,seed,protocol,t,agent,cumulative_loss,comparator_loss,regret_prefix";

struct TraceRow {
  std::string run_id;
  std::uint64_t seed = 0;
  std::string protocol;
  std::size_t t = 0;
  long long agent = -1;
  double cumulative_loss = 0.0;
  double comparator_loss = 0.0;
  double regret_prefix = 0.0;
};

/// 17 significant digits: round-trips every double.
std::string format_real(double value);

void write_trace_row(std::string& out, const TraceRow& row);

/// A parsed CSV file: header names and string cells.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of `name` in the header; throws ValidationError naming the column.
  std::size_t column(std::string_view name) const;
};

CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);

/// Ordered `key = value` document (manifests).
class KeyValueDoc {
 public:
  void set(std::string key, std::string value);
  bool contains(std::string_view key) const;
  /// Throws ValidationError when the key is absent.
  const std::string& get(std::string_view key) const;
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  std::string render(std::string_view title) const;
  static KeyValueDoc parse(std::istream& in);
  static KeyValueDoc load(const std::string& path);

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

/// Writes `content` to `path` atomically (temporary file + rename).
void write_file(const std::string& path, std::string_view content);

}  // namespace damsim::harness
