#include "potsel/station.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>

#include "potsel/errors.hpp"

namespace potsel {

namespace {

using namespace std::chrono;

constexpr int kMissing = -9999;

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

int parse_int(const std::string& field, std::size_t line, const char* what) {
  const std::string t = trim(field);
  int v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    throw ParseError(std::string("bad ") + what + " '" + field + "'", line);
  }
  return v;
}

// Series under construction: observations keyed by day, plus drop tallies.
struct Builder {
  std::string id;
  std::map<long, Observation> obs;
  std::size_t missing = 0, quality = 0;
};

class Collector {
 public:
  Builder& get(const std::string& id) {
    auto it = index_.find(id);
    if (it != index_.end()) return builders_[it->second];
    index_.emplace(id, builders_.size());
    builders_.push_back({id, {}, 0, 0});
    return builders_.back();
  }

  static void add(Builder& b, const Date& d, double v, std::size_t line) {
    if (!b.obs.emplace(day_number(d), Observation{d, v}).second) {
      throw ParseError("duplicate date " + format_iso_date(d) + " for station " + b.id, line);
    }
  }

  std::vector<StationSeries> finish() {
    std::vector<StationSeries> out;
    for (auto& b : builders_) {
      StationSeries s;
      s.station_id = b.id;
      s.missing_dropped = b.missing;
      s.quality_dropped = b.quality;
      for (auto& [day, o] : b.obs) s.observations.push_back(o);
      out.push_back(std::move(s));
    }
    return out;
  }

 private:
  std::map<std::string, std::size_t> index_;
  std::vector<Builder> builders_;
};

}  // namespace

std::vector<double> StationSeries::values() const {
  std::vector<double> v;
  v.reserve(observations.size());
  for (const auto& o : observations) v.push_back(o.value);
  return v;
}

long day_number(const Date& d) { return static_cast<long>(sys_days(d).time_since_epoch().count()); }

Date parse_iso_date(const std::string& s) {
  int y = 0;
  unsigned m = 0, d = 0;
  char tail = 0;
  if (std::sscanf(s.c_str(), "%d-%u-%u%c", &y, &m, &d, &tail) != 3) throw DomainError("bad date '" + s + "'");
  const Date date{year{y}, month{m}, day{d}};
  if (!date.ok()) throw DomainError("nonexistent date '" + s + "'");
  return date;
}

std::string format_iso_date(const Date& d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()), static_cast<unsigned>(d.month()),
                static_cast<unsigned>(d.day()));
  return buf;
}

std::vector<StationSeries> parse_ghcn_dly(std::istream& in) {
  Collector c;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    if (line.empty()) continue;
    if (line.size() != kDlyLineWidth) {
      throw ParseError("expected " + std::to_string(kDlyLineWidth) + " characters, got " + std::to_string(line.size()),
                       lineno);
    }
    if (line.compare(17, 4, "PRCP") != 0) continue;
    const std::string id = trim(line.substr(0, 11));
    const int y = parse_int(line.substr(11, 4), lineno, "year");
    const int m = parse_int(line.substr(15, 2), lineno, "month");
    if (m < 1 || m > 12) throw ParseError("bad month " + std::to_string(m), lineno);
    Builder& b = c.get(id);
    for (unsigned d = 1; d <= 31; ++d) {
      const std::size_t at = 21 + 8 * (d - 1);
      const int raw = parse_int(line.substr(at, 5), lineno, "value");
      const Date date{year{y}, month{static_cast<unsigned>(m)}, day{d}};
      if (!date.ok()) {
        if (raw != kMissing) throw ParseError("value on nonexistent day " + std::to_string(d), lineno);
        continue;
      }
      if (raw == kMissing) {
        ++b.missing;
        continue;
      }
      if (raw < 0) throw ParseError("negative precipitation " + std::to_string(raw), lineno);
      if (line[at + 6] != ' ') {
        ++b.quality;
        continue;
      }
      Collector::add(b, date, raw / 10.0, lineno);
    }
  }
  return c.finish();
}

void write_ghcn_dly(std::ostream& out, const StationSeries& s) {
  std::map<std::pair<int, unsigned>, std::array<long, 31>> months;
  for (const auto& o : s.observations) {
    auto key = std::make_pair(static_cast<int>(o.date.year()), static_cast<unsigned>(o.date.month()));
    auto it = months.find(key);
    if (it == months.end()) {
      std::array<long, 31> blank;
      blank.fill(kMissing);
      it = months.emplace(key, blank).first;
    }
    it->second[static_cast<unsigned>(o.date.day()) - 1] = std::lround(o.value * 10.0);
  }
  char head[32], group[16];
  for (const auto& [key, vals] : months) {
    std::snprintf(head, sizeof head, "%-11.11s%04d%02uPRCP", s.station_id.c_str(), key.first, key.second);
    std::string line = head;
    for (long v : vals) {
      std::snprintf(group, sizeof group, "%5ld   ", v);
      line += group;
    }
    out << line << '\n';
  }
}

std::vector<StationSeries> parse_station_csv(std::istream& in) {
  Collector c;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    if (trim(line).empty()) continue;
    if (!header) {
      std::string h;
      for (char ch : line)
        if (ch != ' ') h += ch;
      if (h != "station_id,date,value_mm") throw ParseError("expected header station_id,date,value_mm", lineno);
      header = true;
      continue;
    }
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string::npos ? c1 : line.find(',', c1 + 1);
    if (c2 == std::string::npos || line.find(',', c2 + 1) != std::string::npos) {
      throw ParseError("expected three fields", lineno);
    }
    const std::string id = trim(line.substr(0, c1));
    if (id.empty()) throw ParseError("empty station id", lineno);
    Date date;
    try {
      date = parse_iso_date(trim(line.substr(c1 + 1, c2 - c1 - 1)));
    } catch (const DomainError& e) {
      throw ParseError(e.what(), lineno);
    }
    Builder& b = c.get(id);
    const std::string v = trim(line.substr(c2 + 1));
    if (v.empty() || v == "NA") {
      ++b.missing;
      continue;
    }
    double x = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(x)) {
      throw ParseError("bad value '" + v + "'", lineno);
    }
    if (x < 0.0) throw ParseError("negative precipitation", lineno);
    Collector::add(b, date, x, lineno);
  }
  if (!header) throw ParseError("missing header", lineno);
  return c.finish();
}

void write_station_csv(std::ostream& out, const StationSeries& s) {
  out << "station_id,date,value_mm\n";
  char buf[40];
  for (const auto& o : s.observations) {
    std::snprintf(buf, sizeof buf, "%.17g", o.value);
    out << s.station_id << ',' << format_iso_date(o.date) << ',' << buf << '\n';
  }
}

std::vector<StationSeries> load_station_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  const bool dly = path.size() >= 4 && path.compare(path.size() - 4, 4, ".dly") == 0;
  return dly ? parse_ghcn_dly(in) : parse_station_csv(in);
}

ScreenResult screen_and_filter(const StationSeries& series, const ScreenOptions& opts) {
  if (opts.season_months.empty()) throw DomainError("season needs at least one month");
  if (!(opts.completeness >= 0.0 && opts.completeness <= 1.0)) throw DomainError("completeness must lie in [0, 1]");
  std::set<unsigned> season;
  for (unsigned m : opts.season_months) {
    if (m < 1 || m > 12) throw DomainError("season month must lie in 1..12");
    season.insert(m);
  }
  auto in_season = [&](const Date& d) { return season.count(static_cast<unsigned>(d.month())) > 0; };

  std::map<int, std::size_t> present;
  for (const auto& o : series.observations)
    if (in_season(o.date)) ++present[static_cast<int>(o.date.year())];

  std::set<int> kept_years;
  for (const auto& [y, count] : present) {
    unsigned days = 0;
    for (unsigned m : season) days += static_cast<unsigned>((year{y} / month{m} / last).day());
    if (static_cast<double>(count) >= opts.completeness * days) kept_years.insert(y);
  }

  ScreenResult r;
  r.years_available = kept_years.size();
  if (r.years_available < opts.min_years) {
    r.reason = std::to_string(r.years_available) + " qualifying years, need " + std::to_string(opts.min_years);
    return r;
  }
  StationSeries s;
  s.station_id = series.station_id;
  s.missing_dropped = series.missing_dropped;
  s.quality_dropped = series.quality_dropped;
  s.years_available = r.years_available;
  s.season_filtered = true;
  for (const auto& o : series.observations)
    if (in_season(o.date) && kept_years.count(static_cast<int>(o.date.year()))) s.observations.push_back(o);
  r.series = std::move(s);
  return r;
}

}  // namespace potsel
