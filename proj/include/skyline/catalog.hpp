#ifndef SKYLINE_CATALOG_HPP_
#define SKYLINE_CATALOG_HPP_

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "skyline/error.hpp"

namespace skyline {

struct BuildingRecord {
  std::string id;
  std::optional<std::string> name;
  std::string city;
  double height = 0.0;  // meters
  int floors = 0;
  int year = 0;  // completion year
};

inline constexpr int kMinYear = 1850;
inline constexpr int kMaxYear = 2100;

/**
 * Immutable, deterministically ordered collection of building records.
 *
 * Records are sorted by (year, id) on construction; every downstream tie
 * (sextile boundaries, city groups, synthetic ids) relies on that order.
 * Construction validates the record invariants and id uniqueness.
 */
class Catalog {
 public:
  Catalog() = default;

  explicit Catalog(std::vector<BuildingRecord> records, std::string provenance = {})
      : records_(std::move(records)), provenance_(std::move(provenance)) {
    std::sort(records_.begin(), records_.end(), [](const auto& a, const auto& b) {
      return a.year != b.year ? a.year < b.year : a.id < b.id;
    });
    for (const auto& r : records_) {
      if (!(r.height > 0.0) || !std::isfinite(r.height))
        throw data_error("record '" + r.id + "': height must be positive");
      if (r.floors < 1) throw data_error("record '" + r.id + "': floors must be >= 1");
      if (r.year < kMinYear || r.year > kMaxYear)
        throw data_error("record '" + r.id + "': year outside [1850, 2100]");
    }
    std::set<std::string_view> seen;
    for (const auto& r : records_)
      if (!seen.insert(r.id).second) throw data_error("duplicate record id '" + r.id + "'");
  }

  std::span<const BuildingRecord> records() const noexcept { return records_; }
  const std::string& provenance() const noexcept { return provenance_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }
  auto begin() const noexcept { return records_.begin(); }
  auto end() const noexcept { return records_.end(); }
  const BuildingRecord& operator[](std::size_t i) const { return records_[i]; }

  std::vector<double> heights() const {
    std::vector<double> out;
    out.reserve(records_.size());
    for (const auto& r : records_) out.push_back(r.height);
    return out;
  }

 private:
  std::vector<BuildingRecord> records_;
  std::string provenance_;
};

enum class Join { all_of, any_of };

/// Height/floor exceedance predicate. Comparisons are strict by default.
struct FilterSpec {
  double min_height = 0.0;
  int min_floors = 0;
  Join join = Join::all_of;
  bool strict = true;

  /// Over 150 m and 40 floors.
  static FilterSpec tall() { return {150.0, 40, Join::all_of, true}; }
  /// Over 225 m or 59 floors.
  static FilterSpec extreme() { return {225.0, 59, Join::any_of, true}; }
  /// Over 225 m, floors ignored.
  static FilterSpec extreme_height() { return {225.0, 0, Join::all_of, true}; }

  bool matches(const BuildingRecord& r) const {
    const bool h = strict ? r.height > min_height : r.height >= min_height;
    const bool f = strict ? r.floors > min_floors : r.floors >= min_floors;
    return join == Join::all_of ? (h && f) : (h || f);
  }

  void validate() const {
    if (!(min_height >= 0.0)) throw argument_error("filter: min_height must be >= 0");
    if (min_floors < 0) throw argument_error("filter: min_floors must be >= 0");
  }
};

inline Catalog filter(const Catalog& catalog, const FilterSpec& spec) {
  spec.validate();
  std::vector<BuildingRecord> kept;
  for (const auto& r : catalog)
    if (spec.matches(r)) kept.push_back(r);
  return Catalog(std::move(kept), catalog.provenance());
}

inline Catalog filter_years(const Catalog& catalog, int from, int to) {
  std::vector<BuildingRecord> kept;
  for (const auto& r : catalog)
    if (r.year >= from && r.year <= to) kept.push_back(r);
  return Catalog(std::move(kept), catalog.provenance());
}

struct YearCount {
  int year = 0;
  long long count = 0;
  friend bool operator==(const YearCount&, const YearCount&) = default;
};

/// Completions per year over [from, to], zero-filled.
inline std::vector<YearCount> counts_by_year(const Catalog& catalog, int from, int to) {
  if (from > to) throw argument_error("counts_by_year: from > to");
  std::vector<YearCount> out;
  out.reserve(static_cast<std::size_t>(to - from + 1));
  for (int y = from; y <= to; ++y) out.push_back({y, 0});
  for (const auto& r : catalog)
    if (r.year >= from && r.year <= to) ++out[static_cast<std::size_t>(r.year - from)].count;
  return out;
}

/**
 * Splits records completed in or after `from` into six chronological groups.
 *
 * Group sizes differ by at most one, and the larger groups come first.
 */
inline std::array<Catalog, 6> partition_sextiles(const Catalog& catalog, int from) {
  std::vector<BuildingRecord> eligible;
  for (const auto& r : catalog)
    if (r.year >= from) eligible.push_back(r);
  if (eligible.size() < 6)
    throw argument_error("partition_sextiles: need at least 6 records, have " +
                         std::to_string(eligible.size()));
  const std::size_t base = eligible.size() / 6;
  const std::size_t extra = eligible.size() % 6;
  std::array<Catalog, 6> groups;
  std::size_t pos = 0;
  for (std::size_t g = 0; g < 6; ++g) {
    const std::size_t len = base + (g < extra ? 1 : 0);
    std::vector<BuildingRecord> part(eligible.begin() + static_cast<std::ptrdiff_t>(pos),
                                     eligible.begin() + static_cast<std::ptrdiff_t>(pos + len));
    groups[g] = Catalog(std::move(part), catalog.provenance());
    pos += len;
  }
  return groups;
}

/// Keys are the city strings verbatim.
inline std::map<std::string, Catalog> group_by_city(const Catalog& catalog) {
  std::map<std::string, std::vector<BuildingRecord>> buckets;
  for (const auto& r : catalog) buckets[r.city].push_back(r);
  std::map<std::string, Catalog> out;
  for (auto& [city, recs] : buckets) out.emplace(city, Catalog(std::move(recs), catalog.provenance()));
  return out;
}

// ---------------------------------------------------------------------------
// CSV ingestion

/// Column names in the input header. An empty `id` means ids are generated
/// from the data line number.
struct CsvSchema {
  std::string id;
  std::string name = "name";
  std::string city = "city";
  std::string height = "height_m";
  std::string floors = "floors";
  std::string year = "year";
};

struct ParseDiagnostics {
  std::size_t rows_read = 0;
  std::size_t rows_dropped = 0;
  std::map<std::string, std::size_t> reasons;

  void drop(const std::string& reason) {
    ++rows_dropped;
    ++reasons[reason];
  }
};

struct ParseResult {
  Catalog catalog;
  ParseDiagnostics diagnostics;
};

namespace detail {

// Reads one RFC 4180 record. Quoted fields may contain commas, doubled
// quotes and newlines. Returns false at end of input.
inline bool read_csv_record(std::istream& in, std::vector<std::string>& fields,
                            std::size_t& line) {
  fields.clear();
  std::string field;
  bool in_quotes = false;
  bool any = false;
  const std::size_t start_line = line + 1;
  char c;
  while (in.get(c)) {
    any = true;
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      if (!field.empty())
        throw parse_error(start_line, "unexpected quote inside unquoted field");
      in_quotes = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      ++line;
      if (!field.empty() && field.back() == '\r') field.pop_back();
      fields.push_back(std::move(field));
      return true;
    } else {
      field.push_back(c);
    }
  }
  if (in_quotes) throw parse_error(start_line, "unterminated quoted field");
  if (!any) return false;
  ++line;
  if (!field.empty() && field.back() == '\r') field.pop_back();
  fields.push_back(std::move(field));
  return true;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

inline bool is_missing(std::string_view s) {
  s = trim(s);
  return s.empty() || s == "NA" || s == "na" || s == "NaN" || s == "null";
}

inline double parse_number(std::string_view s, std::size_t line, const std::string& column) {
  s = trim(s);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(value))
    throw parse_error(line, "column '" + column + "': not a number: '" + std::string(s) + "'");
  return value;
}

}  // namespace detail

/**
 * Parses a comma-delimited UTF-8 catalog with a header row.
 *
 * Rows with a missing height, floor count or year are dropped and tallied.
 * Rows whose values violate the record invariants (non-positive height,
 * zero floors, year outside [1850, 2100], repeated id) are dropped too.
 */
inline ParseResult parse_catalog(std::istream& in, const CsvSchema& schema = {},
                                 std::string provenance = {}) {
  std::vector<std::string> fields;
  std::size_t line = 0;
  if (!detail::read_csv_record(in, fields, line)) throw empty_input_error("CSV input is empty");
  std::map<std::string, std::size_t> header;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    std::string key(detail::trim(fields[i]));
    if (i == 0 && key.size() >= 3 && key.compare(0, 3, "\xEF\xBB\xBF") == 0) key.erase(0, 3);
    header.emplace(key, i);
  }
  const std::size_t width = fields.size();
  auto column = [&](const std::string& name, bool required) -> std::optional<std::size_t> {
    if (name.empty()) return std::nullopt;
    auto it = header.find(name);
    if (it == header.end()) {
      if (required) throw schema_error("missing mapped column '" + name + "'");
      return std::nullopt;
    }
    return it->second;
  };
  const auto c_id = column(schema.id, !schema.id.empty());
  const auto c_name = column(schema.name, false);
  const auto c_city = column(schema.city, true);
  const auto c_height = column(schema.height, true);
  const auto c_floors = column(schema.floors, true);
  const auto c_year = column(schema.year, true);

  ParseResult result;
  auto& diag = result.diagnostics;
  std::vector<BuildingRecord> records;
  std::set<std::string> ids;
  std::size_t data_row = 0;
  while (true) {
    const std::size_t record_line = line + 1;
    if (!detail::read_csv_record(in, fields, line)) break;
    if (fields.size() == 1 && detail::trim(fields[0]).empty()) continue;  // blank line
    ++data_row;
    ++diag.rows_read;
    if (fields.size() != width)
      throw parse_error(record_line, "expected " + std::to_string(width) + " fields, found " +
                                         std::to_string(fields.size()));
    if (detail::is_missing(fields[*c_height])) {
      diag.drop("missing_height");
      continue;
    }
    if (detail::is_missing(fields[*c_floors])) {
      diag.drop("missing_floors");
      continue;
    }
    if (detail::is_missing(fields[*c_year])) {
      diag.drop("missing_year");
      continue;
    }
    BuildingRecord r;
    r.height = detail::parse_number(fields[*c_height], record_line, schema.height);
    const double floors = detail::parse_number(fields[*c_floors], record_line, schema.floors);
    const double year = detail::parse_number(fields[*c_year], record_line, schema.year);
    if (floors != std::floor(floors))
      throw parse_error(record_line, "column '" + schema.floors + "': not an integer");
    if (year != std::floor(year))
      throw parse_error(record_line, "column '" + schema.year + "': not an integer");
    r.floors = static_cast<int>(floors);
    r.year = static_cast<int>(year);
    r.city = std::string(detail::trim(fields[*c_city]));
    if (c_name && !detail::trim(fields[*c_name]).empty())
      r.name = std::string(detail::trim(fields[*c_name]));
    r.id = c_id ? std::string(detail::trim(fields[*c_id])) : "row-" + std::to_string(data_row);
    if (!(r.height > 0.0)) {
      diag.drop("nonpositive_height");
      continue;
    }
    if (r.floors < 1) {
      diag.drop("nonpositive_floors");
      continue;
    }
    if (r.year < kMinYear || r.year > kMaxYear) {
      diag.drop("year_out_of_range");
      continue;
    }
    if (!ids.insert(r.id).second) {
      diag.drop("duplicate_id");
      continue;
    }
    records.push_back(std::move(r));
  }
  if (records.empty()) throw empty_input_error("no valid data rows");
  result.catalog = Catalog(std::move(records), std::move(provenance));
  return result;
}

}  // namespace skyline

#endif  // SKYLINE_CATALOG_HPP_
