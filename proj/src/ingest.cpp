#include "tracklab/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include "tracklab/error.hpp"

namespace tracklab::ingest {

namespace {

YAML::Node load_yaml(std::string_view text) {
  try {
    return YAML::Load(std::string(text));
  } catch (const YAML::Exception& e) {
    fail(ErrorCode::validation, fmt::format("malformed YAML: {}", e.what()));
  }
}

std::string required_string(const YAML::Node& node, const std::string& key) {
  const auto value = node[key];
  if (!value || !value.IsScalar() || value.as<std::string>().empty()) {
    fail(ErrorCode::validation, fmt::format("missing required key '{}'", key));
  }
  return value.as<std::string>();
}

std::optional<double> parse_double(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t')) text.remove_suffix(1);
  if (text.empty()) return std::nullopt;
  if (text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(value)) return std::nullopt;
  return value;
}

// Days since 1970-01-01 for a proleptic Gregorian date.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, std::int64_t& y, unsigned& m, unsigned& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const auto doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp < 10 ? mp + 3 : mp - 9;
  y += m <= 2;
}

std::string format_double(double v) {
  return fmt::format("{}", v);  // shortest round-trip representation
}

}  // namespace

// ---------------------------------------------------------------------------
// Delimited text

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

std::vector<std::string> split_delimited(std::string_view line, char delimiter) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          current.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        current.push_back(c);
      }
    } else if (c == '"' && current.empty()) {
      quoted = true;
    } else if (c == delimiter) {
      fields.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  fields.push_back(std::move(current));
  return fields;
}

std::string quote_field(std::string_view field, char delimiter) {
  if (field.find_first_of(std::string{delimiter, '"', '\n', '\r'}) == std::string_view::npos) {
    return std::string(field);
  }
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

// ---------------------------------------------------------------------------
// Time

double parse_iso8601(std::string_view s) {
  // YYYY-MM-DD[T| ]hh:mm:ss[.fff][Z|+hh:mm|-hh:mm]
  auto bad = [&]() -> double { fail(ErrorCode::validation, fmt::format("bad ISO-8601 time '{}'", s)); };
  auto num = [&](std::size_t pos, std::size_t len) -> int {
    if (pos + len > s.size()) bad();
    int v = 0;
    for (std::size_t i = pos; i < pos + len; ++i) {
      if (s[i] < '0' || s[i] > '9') bad();
      v = v * 10 + (s[i] - '0');
    }
    return v;
  };
  if (s.size() < 19 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') || s[13] != ':' ||
      s[16] != ':') {
    bad();
  }
  const int year = num(0, 4), month = num(5, 2), day = num(8, 2);
  const int hour = num(11, 2), minute = num(14, 2), second = num(17, 2);
  if (month < 1 || month > 12 || day < 1 || day > 31 || hour > 23 || minute > 59 || second > 60) bad();
  std::size_t pos = 19;
  double frac = 0.0;
  if (pos < s.size() && s[pos] == '.') {
    double scale = 0.1;
    ++pos;
    if (pos >= s.size() || s[pos] < '0' || s[pos] > '9') bad();
    while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') {
      frac += (s[pos] - '0') * scale;
      scale /= 10.0;
      ++pos;
    }
  }
  int offset_s = 0;
  if (pos < s.size()) {
    if (s[pos] == 'Z') {
      ++pos;
    } else if (s[pos] == '+' || s[pos] == '-') {
      const int sign = s[pos] == '+' ? 1 : -1;
      const int oh = num(pos + 1, 2);
      std::size_t mpos = pos + 3;
      if (mpos < s.size() && s[mpos] == ':') ++mpos;
      const int om = num(mpos, 2);
      offset_s = sign * (oh * 3600 + om * 60);
      pos = mpos + 2;
    }
  }
  if (pos != s.size()) bad();
  const auto days = days_from_civil(year, static_cast<unsigned>(month), static_cast<unsigned>(day));
  return static_cast<double>(days * 86400 + hour * 3600 + minute * 60 + second - offset_s) + frac;
}

std::string format_iso8601(double epoch_seconds) {
  const double whole = std::floor(epoch_seconds);
  auto millis = static_cast<int>(std::lround((epoch_seconds - whole) * 1000.0));
  auto secs = static_cast<std::int64_t>(whole);
  if (millis == 1000) {
    millis = 0;
    ++secs;
  }
  std::int64_t days = secs / 86400;
  std::int64_t rem = secs % 86400;
  if (rem < 0) {
    rem += 86400;
    --days;
  }
  std::int64_t y;
  unsigned m, d;
  civil_from_days(days, y, m, d);
  return fmt::format("{:04}-{:02}-{:02}T{:02}:{:02}:{:02}.{:03}Z", y, m, d, rem / 3600, (rem % 3600) / 60, rem % 60,
                     millis);
}

// ---------------------------------------------------------------------------
// Descriptors

TrackFormatDescriptor parse_format_descriptor(std::string_view yaml_text) {
  const YAML::Node root = load_yaml(yaml_text);
  if (!root.IsMap()) fail(ErrorCode::validation, "format descriptor must be a mapping");
  TrackFormatDescriptor desc;
  desc.format_name = required_string(root, "format_name");
  if (const auto delim = root["delimiter"]) {
    auto text = delim.as<std::string>();
    if (text == "\\t") text = "\t";
    if (text.size() != 1) fail(ErrorCode::validation, "key 'delimiter' must be a single character");
    desc.delimiter = text[0];
  }
  const YAML::Node columns = root["columns"];
  if (!columns || !columns.IsMap()) fail(ErrorCode::validation, "missing required key 'columns'");

  std::map<std::string, std::string> used;  // source column -> role
  auto claim = [&](const std::string& source, const std::string& role) {
    const auto [it, inserted] = used.emplace(source, role);
    if (!inserted) {
      fail(ErrorCode::validation,
           fmt::format("duplicate mapping: source column '{}' used by '{}' and '{}'", source, it->second, role));
    }
  };
  auto role = [&](const std::string& key, std::initializer_list<std::string_view> allowed) {
    const YAML::Node node = columns[key];
    if (!node) fail(ErrorCode::validation, fmt::format("missing required role '{}'", key));
    std::string source, type;
    if (node.IsScalar()) {
      source = node.as<std::string>();
      type = std::string(*allowed.begin());
    } else {
      source = node["source"] ? node["source"].as<std::string>() : "";
      type = node["type"] ? node["type"].as<std::string>() : std::string(*allowed.begin());
    }
    if (source.empty()) fail(ErrorCode::validation, fmt::format("role '{}' has no source column", key));
    if (std::find(allowed.begin(), allowed.end(), type) == allowed.end()) {
      fail(ErrorCode::validation, fmt::format("unknown unit '{}' for role '{}'", type, key));
    }
    claim(source, key);
    return std::pair{source, type};
  };

  auto [ts_col, ts_type] = role("timestamp", {"epoch_seconds", "iso8601"});
  desc.timestamp_column = ts_col;
  desc.time_unit = ts_type == "iso8601" ? TimeUnit::iso8601 : TimeUnit::epoch_seconds;
  desc.latitude_column = role("latitude", {"degrees"}).first;
  desc.longitude_column = role("longitude", {"degrees"}).first;
  auto [alt_col, alt_type] = role("altitude", {"meters", "feet"});
  desc.altitude_column = alt_col;
  desc.altitude_unit = alt_type == "feet" ? AltitudeUnit::feet : AltitudeUnit::meters;
  desc.track_id_column = role("track_id", {"string"}).first;

  for (const auto& entry : columns) {
    const auto key = entry.first.as<std::string>();
    if (key != "timestamp" && key != "latitude" && key != "longitude" && key != "altitude" && key != "track_id") {
      fail(ErrorCode::validation, fmt::format("unknown role '{}'", key));
    }
  }
  if (const auto extras = root["extra_columns"]) {
    if (!extras.IsSequence()) fail(ErrorCode::validation, "key 'extra_columns' must be a list");
    for (const auto& e : extras) {
      const auto name = e.as<std::string>();
      claim(name, "extra_columns");
      desc.extra_columns.push_back(name);
    }
  }
  return desc;
}

std::string to_yaml(const TrackFormatDescriptor& desc) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "format_name" << YAML::Value << desc.format_name;
  out << YAML::Key << "delimiter" << YAML::Value << YAML::DoubleQuoted
      << (desc.delimiter == '\t' ? std::string("\\t") : std::string(1, desc.delimiter));
  out << YAML::Key << "columns" << YAML::Value << YAML::BeginMap;
  auto col = [&](const char* role, const std::string& source, const char* type) {
    out << YAML::Key << role << YAML::Value << YAML::Flow << YAML::BeginMap << YAML::Key << "source"
        << YAML::Value << YAML::DoubleQuoted << source << YAML::Key << "type" << YAML::Value << type
        << YAML::EndMap;
  };
  col("timestamp", desc.timestamp_column, desc.time_unit == TimeUnit::iso8601 ? "iso8601" : "epoch_seconds");
  col("latitude", desc.latitude_column, "degrees");
  col("longitude", desc.longitude_column, "degrees");
  col("altitude", desc.altitude_column, desc.altitude_unit == AltitudeUnit::feet ? "feet" : "meters");
  col("track_id", desc.track_id_column, "string");
  out << YAML::EndMap;
  out << YAML::Key << "extra_columns" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (const auto& e : desc.extra_columns) out << YAML::DoubleQuoted << e;
  out << YAML::EndSeq << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

LabelSet parse_label_set(std::string_view yaml_text) {
  const YAML::Node root = load_yaml(yaml_text);
  if (!root.IsMap()) fail(ErrorCode::validation, "label set must be a mapping");
  LabelSet set;
  set.project_name = required_string(root, "project");
  const YAML::Node labels = root["labels"];
  if (!labels || !labels.IsSequence()) fail(ErrorCode::validation, "missing required key 'labels'");
  for (const auto& entry : labels) {
    if (entry.IsMap()) {
      set.labels.push_back(entry["name"] ? entry["name"].as<std::string>() : std::string());
    } else {
      set.labels.push_back(entry.as<std::string>());
    }
  }
  set.validate();
  return set;
}

void AnnotationIngestDescriptor::validate_against(const LabelSet& project_labels) const {
  for (const auto& label : labels) {
    if (!project_labels.contains(label)) {
      fail(ErrorCode::validation,
           fmt::format("label '{}' is not in project '{}' label set", label, project_labels.project_name));
    }
  }
}

AnnotationIngestDescriptor parse_annotation_descriptor(std::string_view yaml_text) {
  const YAML::Node root = load_yaml(yaml_text);
  if (!root.IsMap()) fail(ErrorCode::validation, "annotation descriptor must be a mapping");
  AnnotationIngestDescriptor desc;
  desc.algorithm = required_string(root, "algorithm");
  desc.version = required_string(root, "version");
  const YAML::Node labels = root["labels"];
  if (!labels || !labels.IsSequence() || labels.size() == 0) {
    fail(ErrorCode::validation, "missing required key 'labels'");
  }
  for (const auto& l : labels) desc.labels.push_back(l.as<std::string>());
  return desc;
}

void FilterCriteria::validate() const {
  if (!airport_ref.valid()) fail(ErrorCode::validation, "filter airport reference is invalid");
  if (!(radius_nm > 0.0)) fail(ErrorCode::validation, "filter radius_nm must be positive");
  if (!(agl_ceiling_ft > 0.0)) fail(ErrorCode::validation, "filter agl_ceiling_ft must be positive");
}

// ---------------------------------------------------------------------------
// Track files

TrackParseResult parse_track_file(std::string_view bytes, const TrackFormatDescriptor& desc) {
  auto lines = split_lines(bytes);
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) fail(ErrorCode::validation, "track file is empty");

  const auto header = split_delimited(lines[0], desc.delimiter);
  auto find_col = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) fail(ErrorCode::validation, fmt::format("header is missing column '{}'", name));
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t c_time = find_col(desc.timestamp_column);
  const std::size_t c_lat = find_col(desc.latitude_column);
  const std::size_t c_lon = find_col(desc.longitude_column);
  const std::size_t c_alt = find_col(desc.altitude_column);
  const std::size_t c_id = find_col(desc.track_id_column);
  std::vector<std::size_t> c_extra;
  for (const auto& e : desc.extra_columns) c_extra.push_back(find_col(e));

  struct Row {
    geo::TrackPoint point;
    std::vector<geo::ExtraValue> extras;
  };
  std::map<std::string, std::vector<Row>> grouped;
  TrackParseResult result;

  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (lines[li].empty()) continue;
    ++result.total_rows;
    const auto fields = split_delimited(lines[li], desc.delimiter);
    auto reject = [&](std::string message) { result.rejected.push_back({result.total_rows, std::move(message)}); };
    if (fields.size() != header.size()) {
      reject(fmt::format("expected {} fields, found {}", header.size(), fields.size()));
      continue;
    }
    Row row;
    row.point.track_id = fields[c_id];
    if (row.point.track_id.empty()) {
      reject("empty track id");
      continue;
    }
    const auto lat = parse_double(fields[c_lat]);
    const auto lon = parse_double(fields[c_lon]);
    const auto alt = parse_double(fields[c_alt]);
    if (!lat || !lon || !alt) {
      reject(fmt::format("non-numeric position in '{}'", lines[li]));
      continue;
    }
    std::optional<double> ts;
    if (desc.time_unit == TimeUnit::epoch_seconds) {
      ts = parse_double(fields[c_time]);
    } else {
      try {
        ts = parse_iso8601(fields[c_time]);
      } catch (const Error&) {
        ts.reset();
      }
    }
    if (!ts) {
      reject(fmt::format("unparseable timestamp '{}'", fields[c_time]));
      continue;
    }
    row.point.geo = {*lat, *lon == 180.0 ? -180.0 : *lon, *alt * desc.altitude_scale()};
    row.point.timestamp_s = *ts;
    if (!row.point.geo.valid()) {
      reject("latitude/longitude out of range");
      continue;
    }
    for (std::size_t c : c_extra) {
      if (auto v = parse_double(fields[c])) {
        row.extras.emplace_back(*v);
      } else {
        row.extras.emplace_back(fields[c]);
      }
    }
    grouped[row.point.track_id].push_back(std::move(row));
  }

  if (result.total_rows == 0) fail(ErrorCode::validation, "track file has no data rows");
  if (static_cast<double>(result.rejected.size()) > kMaxMalformedFraction * static_cast<double>(result.total_rows)) {
    fail(ErrorCode::validation, fmt::format("{} of {} rows are malformed (limit {}%); first: row {}: {}",
                                            result.rejected.size(), result.total_rows, kMaxMalformedFraction * 100,
                                            result.rejected.front().row, result.rejected.front().message));
  }

  for (auto& [id, rows] : grouped) {
    std::stable_sort(rows.begin(), rows.end(),
                     [](const Row& a, const Row& b) { return a.point.timestamp_s < b.point.timestamp_s; });
    geo::Track track;
    track.track_id = id;
    for (const auto& e : desc.extra_columns) track.extras[e].reserve(rows.size());
    for (auto& row : rows) {
      track.points.push_back(row.point);
      for (std::size_t k = 0; k < desc.extra_columns.size(); ++k) {
        track.extras[desc.extra_columns[k]].push_back(std::move(row.extras[k]));
      }
    }
    result.tracks.push_back(std::move(track));
  }
  return result;
}

std::string serialize_tracks(std::span<const geo::Track> tracks, const TrackFormatDescriptor& desc) {
  std::ostringstream out;
  const char d = desc.delimiter;
  out << quote_field(desc.timestamp_column, d) << d << quote_field(desc.track_id_column, d) << d
      << quote_field(desc.latitude_column, d) << d << quote_field(desc.longitude_column, d) << d
      << quote_field(desc.altitude_column, d);
  for (const auto& e : desc.extra_columns) out << d << quote_field(e, d);
  out << '\n';
  for (const auto& track : tracks) {
    for (std::size_t i = 0; i < track.points.size(); ++i) {
      const auto& p = track.points[i];
      out << (desc.time_unit == TimeUnit::iso8601 ? format_iso8601(p.timestamp_s) : format_double(p.timestamp_s))
          << d << quote_field(track.track_id, d) << d << format_double(p.geo.latitude_deg) << d
          << format_double(p.geo.longitude_deg) << d << format_double(p.geo.altitude_m / desc.altitude_scale());
      for (const auto& e : desc.extra_columns) {
        out << d;
        const auto it = track.extras.find(e);
        if (it == track.extras.end() || i >= it->second.size()) continue;
        const auto& v = it->second[i];
        if (const double* num = std::get_if<double>(&v)) {
          out << format_double(*num);
        } else {
          out << quote_field(std::get<std::string>(v), d);
        }
      }
      out << '\n';
    }
  }
  return out.str();
}

std::vector<geo::Track> apply_filter_criteria(std::span<const geo::Track> tracks, const FilterCriteria& criteria) {
  criteria.validate();
  const double radius_m = criteria.radius_nm * geo::kMetersPerNauticalMile;
  const double ceiling_m = criteria.agl_ceiling_ft * geo::kMetersPerFoot;
  std::vector<geo::Track> out;
  for (const auto& track : tracks) {
    std::vector<std::pair<std::size_t, std::size_t>> runs;
    std::optional<std::size_t> run_start;
    for (std::size_t i = 0; i <= track.points.size(); ++i) {
      bool inside = false;
      if (i < track.points.size()) {
        const auto& p = track.points[i].geo;
        inside = geo::haversine_distance_m(p, criteria.airport_ref) <= radius_m &&
                 p.altitude_m - criteria.airport_ref.altitude_m <= ceiling_m;
      }
      if (inside && !run_start) run_start = i;
      if (!inside && run_start) {
        if (i - *run_start >= 2) runs.emplace_back(*run_start, i - 1);
        run_start.reset();
      }
    }
    if (runs.size() == 1) {
      if (runs[0].first == 0 && runs[0].second + 1 == track.points.size()) {
        out.push_back(track);
      } else {
        out.push_back(track.slice(runs[0].first, runs[0].second, track.track_id));
      }
      continue;
    }
    for (std::size_t k = 0; k < runs.size(); ++k) {
      out.push_back(track.slice(runs[k].first, runs[k].second, fmt::format("{}_r{}", track.track_id, k + 1)));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Annotations

AnnotationIngestResult ingest_external_annotations(std::span<const AnnotationRow> rows,
                                                   const AnnotationIngestDescriptor& desc,
                                                   const SubjectExists& subject_exists) {
  AnnotationIngestResult result;
  result.annotator = AnnotatorRecord::model(desc.algorithm, desc.version);
  const double created = now_seconds();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (std::find(desc.labels.begin(), desc.labels.end(), row.label) == desc.labels.end()) {
      result.errors.push_back({i + 1, fmt::format("unknown label '{}' for subject '{}'", row.label, row.subject)});
      continue;
    }
    if (subject_exists && !subject_exists(row.subject)) {
      result.errors.push_back({i + 1, fmt::format("unknown track id '{}'", row.subject)});
      continue;
    }
    AnnotationRecord record;
    record.subject = row.subject;
    record.label = row.label;
    record.verified = false;
    record.created_at = created;
    result.records.push_back(std::move(record));
  }
  return result;
}

std::size_t AnnotationTable::column(std::string_view name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) fail(ErrorCode::validation, fmt::format("annotation table has no column '{}'", name));
  return static_cast<std::size_t>(it - header.begin());
}

std::vector<AnnotationRow> AnnotationTable::subject_labels() const {
  std::size_t c_subject;
  if (std::find(header.begin(), header.end(), "subject_id") != header.end()) {
    c_subject = column("subject_id");
  } else {
    c_subject = column("track_id");
  }
  const std::size_t c_label = column("label");
  std::vector<AnnotationRow> out;
  out.reserve(rows.size());
  for (const auto& row : rows) out.push_back({row[c_subject], row[c_label]});
  return out;
}

AnnotationTable parse_annotation_table(std::string_view bytes, char delimiter) {
  auto lines = split_lines(bytes);
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  AnnotationTable table;
  if (lines.empty()) return table;
  table.header = split_delimited(lines[0], delimiter);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto fields = split_delimited(lines[i], delimiter);
    if (fields.size() != table.header.size()) {
      fail(ErrorCode::validation, fmt::format("annotation row {} has {} fields, expected {}", i, fields.size(),
                                              table.header.size()));
    }
    table.rows.push_back(std::move(fields));
  }
  return table;
}

// ---------------------------------------------------------------------------
// Dataset split

std::vector<std::vector<std::string>> split_dataset(std::span<const std::string> ids, std::size_t n_sets,
                                                    std::uint64_t seed) {
  if (n_sets < 2) fail(ErrorCode::invalid_argument, "split needs at least 2 sets");
  if (ids.empty()) fail(ErrorCode::invalid_argument, "split needs at least one id");
  if (n_sets > ids.size()) {
    fail(ErrorCode::invalid_argument, fmt::format("cannot split {} ids into {} sets", ids.size(), n_sets));
  }
  std::vector<std::string> order(ids.begin(), ids.end());
  // Fisher-Yates with raw engine output so the partition does not depend on
  // the standard library's distribution implementation.
  std::mt19937_64 rng(seed);
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
    std::swap(order[i], order[j]);
  }
  std::vector<std::vector<std::string>> sets(n_sets);
  for (std::size_t i = 0; i < order.size(); ++i) sets[i % n_sets].push_back(std::move(order[i]));
  return sets;
}

}  // namespace tracklab::ingest
