#include "platoonflow/csvio.hpp"

#include <fmt/format.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace pf {

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::vector<std::vector<std::string>> csv_parse(const std::string& text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> rec;
  std::string field;
  bool quoted = false, any = false;
  for (size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"' && field.empty()) {
      quoted = true;
      any = true;
    } else if (c == ',') {
      rec.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n') {
      if (any || !field.empty()) {
        rec.push_back(std::move(field));
        field.clear();
        records.push_back(std::move(rec));
        rec.clear();
        any = false;
      }
    } else if (c != '\r') {
      field += c;
    }
  }
  if (quoted) throw std::runtime_error("csv: unterminated quoted field");
  if (any || !field.empty()) {
    rec.push_back(std::move(field));
    records.push_back(std::move(rec));
  }
  return records;
}

namespace {

double to_num(const std::string& s, const char* what) {
  char* end = nullptr;
  const double x = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || (end && *end != '\0'))
    throw std::runtime_error(fmt::format("csv: bad {} value '{}'", what, s));
  return x;
}

}  // namespace

const char kMetricsCsvHeader[] =
    "t,throughput_vph,travel_time_s,has_travel,density,teleports_cum,"
    "inflow_east_vpm,inflow_west_vpm,inflow_minor_vpm";

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::string s = std::string(kMetricsCsvHeader) + "\n";
  for (const MetricsRow& r : rows)
    s += fmt::format("{},{},{},{},{},{},{},{},{}\n", r.t, r.throughput_vph,
                     r.travel_time_s, r.has_travel ? 1 : 0, r.density,
                     r.teleports_cum, r.inflow_east_vpm, r.inflow_west_vpm,
                     r.inflow_minor_vpm);
  return s;
}

std::vector<MetricsRow> metrics_from_csv(const std::string& text) {
  const auto records = csv_parse(text);
  if (records.empty() || records[0].empty() ||
      records[0][0] != "t")
    throw std::runtime_error("csv: missing metrics header");
  std::vector<MetricsRow> rows;
  for (size_t i = 1; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.size() != 9)
      throw std::runtime_error(
          fmt::format("csv: metrics row {} has {} fields, want 9", i, r.size()));
    MetricsRow m;
    m.t = to_num(r[0], "t");
    m.throughput_vph = to_num(r[1], "throughput");
    m.travel_time_s = to_num(r[2], "travel");
    m.has_travel = to_num(r[3], "has_travel") != 0;
    m.density = to_num(r[4], "density");
    m.teleports_cum = (uint64_t)to_num(r[5], "teleports");
    m.inflow_east_vpm = to_num(r[6], "inflow_east");
    m.inflow_west_vpm = to_num(r[7], "inflow_west");
    m.inflow_minor_vpm = to_num(r[8], "inflow_minor");
    rows.push_back(m);
  }
  return rows;
}

const char kEventsCsvHeader[] =
    "kind,t,vehicle,line,name,teleport_kind,removed,onset,strand";

std::string events_csv(const std::vector<CrossLine>& lines,
                       const std::vector<Event>& events) {
  std::string s = std::string(kEventsCsvHeader) + "\n";
  for (const Event& e : events) {
    if (e.kind == Event::Detector) {
      const std::string& name =
          e.line >= 0 && (size_t)e.line < lines.size() ? lines[(size_t)e.line].name
                                                       : std::string();
      s += fmt::format("detector,{},{},{},{},,,,{}\n", e.t, e.vehicle, e.line,
                       csv_escape(name), e.strand);
    } else {
      s += fmt::format("teleport,{},{},,,{},{},{},{}\n", e.t, e.vehicle,
                       teleport_kind_name(e.tk), e.removed ? 1 : 0, e.onset,
                       e.strand);
    }
  }
  return s;
}

std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error(fmt::format("cannot open '{}'", path));
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error(fmt::format("cannot write '{}'", path));
  f << text;
  if (!f) throw std::runtime_error(fmt::format("write failed for '{}'", path));
}

}  // namespace pf
