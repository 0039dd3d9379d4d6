#pragma once

#include <string>
#include <vector>

#include "platoonflow/metrics.hpp"
#include "platoonflow/sim.hpp"

namespace pf {

// Quote a field when it holds a comma, quote, or newline; quotes doubled.
std::string csv_escape(const std::string& field);

// Minimal CSV reader matching csv_escape's output. Returns all records
// including the header line. Throws std::runtime_error on unbalanced quotes.
std::vector<std::vector<std::string>> csv_parse(const std::string& text);

// Doubles are written with fmt's shortest round-trip representation, so
// re-parsing a file reproduces the values bit for bit.

extern const char kMetricsCsvHeader[];
std::string metrics_csv(const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> metrics_from_csv(const std::string& text);

extern const char kEventsCsvHeader[];
std::string events_csv(const std::vector<CrossLine>& lines,
                       const std::vector<Event>& events);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace pf
