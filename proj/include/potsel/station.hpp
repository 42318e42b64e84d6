#pragma once

#include <chrono>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace potsel {

using Date = std::chrono::year_month_day;

struct Observation {
  Date date;
  double value = 0.0;  // mm

  friend bool operator==(const Observation&, const Observation&) = default;
};

/// Daily precipitation of one station. Dates strictly increase; missing and
/// flagged days are absent and only counted.
struct StationSeries {
  std::string station_id;
  std::vector<Observation> observations;
  std::size_t missing_dropped = 0;
  std::size_t quality_dropped = 0;
  // Set by screen_and_filter.
  std::size_t years_available = 0;
  bool season_filtered = false;

  [[nodiscard]] std::vector<double> values() const;
};

/// Days since 1970-01-01.
[[nodiscard]] long day_number(const Date& d);
[[nodiscard]] Date parse_iso_date(const std::string& s);
[[nodiscard]] std::string format_iso_date(const Date& d);

inline constexpr std::size_t kDlyLineWidth = 269;

/// PRCP records of a GHCN-Daily file, one series per station id in order of
/// first appearance. Values are tenths of mm; -9999 is missing; a day with a
/// nonblank quality flag is dropped. Other elements are skipped. Throws
/// ParseError (with the line number) on a line that is not 269 characters,
/// a bad number, a negative value, or a value on a nonexistent date.
[[nodiscard]] std::vector<StationSeries> parse_ghcn_dly(std::istream& in);

/// Writes PRCP lines for every month that has an observation; absent days
/// become -9999. Values are rounded to tenths of mm.
void write_ghcn_dly(std::ostream& out, const StationSeries& series);

/// Header `station_id,date,value_mm`, ISO dates. An empty or `NA` value is
/// missing. Series come out in order of first appearance.
[[nodiscard]] std::vector<StationSeries> parse_station_csv(std::istream& in);
void write_station_csv(std::ostream& out, const StationSeries& series);

/// Reads a .dly file or, for any other extension, a station CSV.
[[nodiscard]] std::vector<StationSeries> load_station_file(const std::string& path);

struct ScreenOptions {
  std::size_t min_years = 50;
  std::vector<unsigned> season_months{11, 12, 1, 2, 3};
  // A calendar year counts when this fraction of its season days is present.
  double completeness = 0.8;
};

struct ScreenResult {
  std::optional<StationSeries> series;
  std::size_t years_available = 0;
  std::string reason;
};

/// Keeps season-month observations of the calendar years that meet the
/// completeness rule; rejects the site if fewer than min_years remain.
[[nodiscard]] ScreenResult screen_and_filter(const StationSeries& series, const ScreenOptions& opts);

}  // namespace potsel
