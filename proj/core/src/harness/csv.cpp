#include "damsim/harness/csv.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "damsim/types.hpp"

namespace damsim::harness {

std::string format_real(double value) { return fmt::format("{:.17g}", value); }

void write_trace_row(std::string& out, const TraceRow& row) {
  fmt::format_to(std::back_inserter(out), "{},{},{},{},{},{:.17g},{:.17g},{:.17g}\n", row.run_id, row.seed,
                 row.protocol, row.t, row.agent, row.cumulative_loss, row.comparator_loss, row.regret_prefix);
}

std::size_t CsvTable::column(std::string_view name) const {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw ValidationError(fmt::format("CSV is missing column '{}'", name));
  return static_cast<std::size_t>(it - header.begin());
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("CSV is empty");
  table.header = split(line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != table.header.size()) {
      throw ValidationError(
          fmt::format("CSV line {} has {} cells, header has {}", lineno, cells.size(), table.header.size()));
    }
    table.rows.push_back(std::move(cells));
  }
  return table;
}

CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open '{}'", path));
  return read_csv(in);
}

void KeyValueDoc::set(std::string key, std::string value) {
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  entries_.emplace_back(std::move(key), std::move(value));
}

bool KeyValueDoc::contains(std::string_view key) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const auto& e) { return e.first == key; });
}

const std::string& KeyValueDoc::get(std::string_view key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return v;
  }
  throw ValidationError(fmt::format("manifest has no entry '{}'", key));
}

std::string KeyValueDoc::render(std::string_view title) const {
  std::string out = fmt::format("# {}\n", title);
  for (const auto& [k, v] : entries_) out += fmt::format("{} = {}\n", k, v);
  return out;
}

KeyValueDoc KeyValueDoc::parse(std::istream& in) {
  KeyValueDoc doc;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) throw ValidationError(fmt::format("malformed manifest line '{}'", line));
    doc.set(line.substr(0, eq), line.substr(eq + 3));
  }
  return doc;
}

KeyValueDoc KeyValueDoc::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open manifest '{}'", path));
  return parse(in);
}

void write_file(const std::string& path, std::string_view content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", tmp));
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error(fmt::format("write to '{}' failed", tmp));
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace damsim::harness
