#include "stsc/speed_data.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <numbers>
#include <unordered_map>

#include "stsc/error.hpp"
#include "stsc/io.hpp"

namespace stsc {

namespace {

double parse_real(std::string_view field, std::size_t line, std::string_view what) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(value))
    throw Error(Errc::parse, "line " + std::to_string(line) + ": bad " + std::string(what) +
                                 " '" + std::string(field) + "'");
  return value;
}

void expect_header(std::string_view line, std::string_view header) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  if (line != header)
    throw Error(Errc::parse, "line 1: expected header '" + std::string(header) + "'");
}

// Calls fn(line_number, fields) for each non-empty data line.
template <typename Fn>
void for_each_row(std::string_view text, std::string_view header, std::size_t width, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (line_no == 1) {
      expect_header(line, header);
      continue;
    }
    if (line.empty() || line == "\r") continue;
    auto fields = split_csv_line(line);
    if (fields.size() != width)
      throw Error(Errc::parse, "line " + std::to_string(line_no) + ": expected " +
                                   std::to_string(width) + " fields, got " +
                                   std::to_string(fields.size()));
    fn(line_no, fields);
  }
  if (line_no == 0) throw Error(Errc::parse, "line 1: empty file");
}

}  // namespace

// ---------------------------------------------------------------------------
// SpeedMatrix

SpeedMatrix::SpeedMatrix(Day first_day, std::size_t day_count, std::vector<std::string> sensors,
                         DayWindow window)
    : first_day_(first_day),
      day_count_(day_count),
      window_(window),
      sensors_(std::move(sensors)),
      values_(day_count * window.slots() * sensors_.size(), kMissing) {}

TimePoint SpeedMatrix::time(std::size_t row) const {
  const std::size_t day = row / slots_per_day();
  const std::size_t slot = row % slots_per_day();
  return TimePoint{first_day_ + std::chrono::days{day}} + window_.start +
         kStep * static_cast<long>(slot);
}

std::vector<TimePoint> SpeedMatrix::times() const {
  std::vector<TimePoint> out(time_count());
  for (std::size_t r = 0; r < out.size(); ++r) out[r] = time(r);
  return out;
}

std::optional<std::size_t> SpeedMatrix::row_of(TimePoint t) const {
  const Day d = day_of(t);
  if (d < first_day_) return std::nullopt;
  const auto day = static_cast<std::size_t>((d - first_day_).count());
  const Minutes tod = time_of_day(t);
  if (day >= day_count_ || !window_.contains(tod) || (tod - window_.start) % kStep != Minutes{0})
    return std::nullopt;
  return row(day, static_cast<std::size_t>((tod - window_.start) / kStep));
}

std::optional<std::size_t> SpeedMatrix::find_sensor(std::string_view id) const {
  auto it = std::find(sensors_.begin(), sensors_.end(), id);
  if (it == sensors_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - sensors_.begin());
}

std::size_t SpeedMatrix::sensor_index(std::string_view id) const {
  if (auto i = find_sensor(id)) return *i;
  throw Error(Errc::not_found, "unknown sensor '" + std::string(id) + "'");
}

std::vector<double> SpeedMatrix::column(std::size_t col) const {
  std::vector<double> out(time_count());
  for (std::size_t r = 0; r < out.size(); ++r) out[r] = at(r, col);
  return out;
}

SpeedMatrix SpeedMatrix::select_sensors(std::span<const std::size_t> cols) const {
  std::vector<std::string> ids;
  for (auto c : cols) ids.push_back(sensors_.at(c));
  SpeedMatrix out(first_day_, day_count_, std::move(ids), window_);
  for (std::size_t r = 0; r < time_count(); ++r)
    for (std::size_t k = 0; k < cols.size(); ++k) out.at(r, k) = at(r, cols[k]);
  return out;
}

std::size_t SpeedMatrix::missing_count() const {
  return static_cast<std::size_t>(std::count_if(values_.begin(), values_.end(), is_missing));
}

bool operator==(const SpeedMatrix& a, const SpeedMatrix& b) {
  if (a.first_day_ != b.first_day_ || a.day_count_ != b.day_count_ ||
      a.window_.start != b.window_.start || a.window_.end != b.window_.end ||
      a.sensors_ != b.sensors_ || a.values_.size() != b.values_.size())
    return false;
  for (std::size_t i = 0; i < a.values_.size(); ++i) {
    const double x = a.values_[i], y = b.values_[i];
    if (!(x == y || (is_missing(x) && is_missing(y)))) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// SensorNetwork

SensorNetwork::SensorNetwork(std::vector<SensorInfo> sensors, std::vector<double> km)
    : sensors_(std::move(sensors)), km_(std::move(km)) {
  if (km_.size() != sensors_.size() * sensors_.size())
    throw Error(Errc::dimension, "distance matrix does not match sensor count");
}

std::optional<std::size_t> SensorNetwork::find(std::string_view id) const {
  for (std::size_t i = 0; i < sensors_.size(); ++i)
    if (sensors_[i].id == id) return i;
  return std::nullopt;
}

std::size_t SensorNetwork::index_of(std::string_view id) const {
  if (auto i = find(id)) return *i;
  throw Error(Errc::not_found, "unknown sensor '" + std::string(id) + "'");
}

SensorNetwork SensorNetwork::subset(std::span<const std::string> ids) const {
  std::vector<std::size_t> idx;
  std::vector<SensorInfo> kept;
  for (const auto& id : ids) {
    idx.push_back(index_of(id));
    kept.push_back(sensors_[idx.back()]);
  }
  std::vector<double> km(idx.size() * idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i)
    for (std::size_t j = 0; j < idx.size(); ++j) km[i * idx.size() + j] = distance(idx[i], idx[j]);
  return SensorNetwork(std::move(kept), std::move(km));
}

double haversine_km(double lat1, double lon1, double lat2, double lon2) {
  for (double lat : {lat1, lat2})
    if (!(std::abs(lat) <= 90.0)) throw Error(Errc::range, "latitude out of range");
  for (double lon : {lon1, lon2})
    if (!(std::abs(lon) <= 180.0)) throw Error(Errc::range, "longitude out of range");
  constexpr double deg = std::numbers::pi / 180.0;
  const double dphi = (lat2 - lat1) * deg;
  const double dlambda = (lon2 - lon1) * deg;
  const double a = std::sin(dphi / 2) * std::sin(dphi / 2) +
                   std::cos(lat1 * deg) * std::cos(lat2 * deg) * std::sin(dlambda / 2) *
                       std::sin(dlambda / 2);
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(a)));
}

SensorNetwork build_distance_matrix(std::vector<SensorInfo> sensors,
                                    std::span<const DistanceOverride> overrides) {
  const std::size_t n = sensors.size();
  std::vector<double> km(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = haversine_km(sensors[i].latitude, sensors[i].longitude,
                                    sensors[j].latitude, sensors[j].longitude);
      km[i * n + j] = km[j * n + i] = d;
    }
  SensorNetwork probe(sensors, km);
  for (const auto& o : overrides) {
    if (!(o.km >= 0.0)) throw Error(Errc::range, "negative distance override");
    const auto i = probe.find(o.from_id), j = probe.find(o.to_id);
    if (!i || !j) continue;
    if (*i == *j) continue;
    km[*i * n + *j] = km[*j * n + *i] = o.km;
  }
  return SensorNetwork(std::move(sensors), std::move(km));
}

// ---------------------------------------------------------------------------
// CSV

SpeedMatrix parse_speed_csv(std::string_view text, DayWindow window) {
  struct Cell {
    TimePoint t;
    std::size_t sensor;
    double speed;
  };
  std::vector<Cell> cells;
  std::vector<std::string> sensor_ids;
  std::unordered_map<std::string, std::size_t> sensor_lookup;
  std::map<std::pair<TimePoint, std::size_t>, std::size_t> seen;

  for_each_row(text, "timestamp,sensor_id,speed_mph", 3,
               [&](std::size_t line, const std::vector<std::string_view>& f) {
                 TimePoint t;
                 try {
                   t = parse_timestamp(f[0]);
                 } catch (const Error& e) {
                   throw Error(Errc::parse, "line " + std::to_string(line) + ": " + e.what());
                 }
                 if (time_of_day(t) % kStep != Minutes{0})
                   throw Error(Errc::parse, "line " + std::to_string(line) +
                                                ": timestamp not on a 5-minute boundary");
                 if (f[1].empty())
                   throw Error(Errc::parse, "line " + std::to_string(line) + ": empty sensor id");
                 const double speed = f[2].empty() ? kMissing : parse_real(f[2], line, "speed");
                 std::string id(f[1]);
                 auto [it, inserted] = sensor_lookup.try_emplace(id, sensor_ids.size());
                 if (inserted) sensor_ids.push_back(id);
                 auto [prev, fresh] = seen.try_emplace({t, it->second}, line);
                 if (!fresh)
                   throw Error(Errc::duplicate, "line " + std::to_string(line) + ": (" +
                                                    std::string(f[0]) + ", " + id +
                                                    ") already given on line " +
                                                    std::to_string(prev->second));
                 if (window.contains(time_of_day(t))) cells.push_back({t, it->second, speed});
               });

  if (cells.empty()) return SpeedMatrix({}, 0, sensor_ids, window);
  Day first = day_of(cells.front().t), last = first;
  for (const auto& c : cells) {
    first = std::min(first, day_of(c.t));
    last = std::max(last, day_of(c.t));
  }
  SpeedMatrix m(first, static_cast<std::size_t>((last - first).count()) + 1, sensor_ids, window);
  for (const auto& c : cells) m.at(*m.row_of(c.t), c.sensor) = c.speed;
  return m;
}

SpeedMatrix load_speed_csv(const std::filesystem::path& path, DayWindow window) {
  return parse_speed_csv(read_file(path), window);
}

std::string speed_csv(const SpeedMatrix& m) {
  std::string out = "timestamp,sensor_id,speed_mph\n";
  for (std::size_t r = 0; r < m.time_count(); ++r) {
    const std::string ts = format_timestamp(m.time(r));
    for (std::size_t c = 0; c < m.sensor_count(); ++c) {
      out += ts;
      out += ',';
      out += m.sensors()[c];
      out += ',';
      if (!is_missing(m.at(r, c))) out += format_double(m.at(r, c));
      out += '\n';
    }
  }
  return out;
}

std::vector<SensorInfo> parse_sensors_csv(std::string_view text) {
  std::vector<SensorInfo> out;
  for_each_row(text, "sensor_id,latitude,longitude,highway,direction", 5,
               [&](std::size_t line, const std::vector<std::string_view>& f) {
                 SensorInfo s;
                 s.id = std::string(f[0]);
                 if (s.id.empty())
                   throw Error(Errc::parse, "line " + std::to_string(line) + ": empty sensor id");
                 s.latitude = parse_real(f[1], line, "latitude");
                 s.longitude = parse_real(f[2], line, "longitude");
                 if (std::abs(s.latitude) > 90.0 || std::abs(s.longitude) > 180.0)
                   throw Error(Errc::range, "line " + std::to_string(line) +
                                                ": coordinates out of range");
                 s.highway = std::string(f[3]);
                 s.direction = std::string(f[4]);
                 for (const auto& o : out)
                   if (o.id == s.id)
                     throw Error(Errc::duplicate,
                                 "line " + std::to_string(line) + ": sensor '" + s.id + "' repeated");
                 out.push_back(std::move(s));
               });
  return out;
}

std::vector<SensorInfo> load_sensors_csv(const std::filesystem::path& path) {
  return parse_sensors_csv(read_file(path));
}

std::string sensors_csv(const std::vector<SensorInfo>& sensors) {
  std::string out = "sensor_id,latitude,longitude,highway,direction\n";
  for (const auto& s : sensors)
    out += s.id + "," + format_double(s.latitude) + "," + format_double(s.longitude) + "," +
           s.highway + "," + s.direction + "\n";
  return out;
}

std::vector<DistanceOverride> parse_distances_csv(std::string_view text) {
  std::vector<DistanceOverride> out;
  for_each_row(text, "from_id,to_id,km", 3,
               [&](std::size_t line, const std::vector<std::string_view>& f) {
                 out.push_back({std::string(f[0]), std::string(f[1]), parse_real(f[2], line, "km")});
               });
  return out;
}

std::vector<DistanceOverride> load_distances_csv(const std::filesystem::path& path) {
  return parse_distances_csv(read_file(path));
}

}  // namespace stsc
