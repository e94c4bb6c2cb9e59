#pragma once

// Hardware counter dumps (values in millions of events) and the efficiency
// ratios used to tell good blocksizes from bad ones.

#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"

namespace stune::counters {

struct CounterRecord {
  std::string label;
  double clockticks = 0.0;
  double retired_instructions = 0.0;
  double l1_misses = 0.0;
  double l2_lines_in = 0.0;
  double l2_misses = 0.0;
  double stall_cycles = 0.0;
  double bus_cycles = 0.0;
  double bus_transactions = 0.0;
};

struct DerivedMetrics {
  double l2_miss_rate = 0.0;     // l2_lines_in / retired_instructions
  double bus_utilisation = 0.0;  // 2 bus_transactions / bus_cycles
  double stall_ratio = 0.0;      // stall_cycles / clockticks
};

inline constexpr std::array<std::string_view, 8> kCounterFields{
    "clockticks", "retired_instructions", "l1_misses", "l2_lines_in",
    "l2_misses",  "stall_cycles",         "bus_cycles", "bus_transactions"};

inline constexpr std::array<std::string_view, 3> kDerivedFields{"l2_miss_rate", "bus_utilisation", "stall_ratio"};

inline constexpr std::array<double CounterRecord::*, 8> kCounterMembers{
    &CounterRecord::clockticks, &CounterRecord::retired_instructions, &CounterRecord::l1_misses,
    &CounterRecord::l2_lines_in, &CounterRecord::l2_misses, &CounterRecord::stall_cycles,
    &CounterRecord::bus_cycles, &CounterRecord::bus_transactions};

inline double& field(CounterRecord& r, std::size_t n) { return r.*kCounterMembers.at(n); }
inline double field(const CounterRecord& r, std::size_t n) { return r.*kCounterMembers.at(n); }

inline double field(const DerivedMetrics& d, std::size_t n) {
  const std::array<double, 3> f{d.l2_miss_rate, d.bus_utilisation, d.stall_ratio};
  return f.at(n);
}

inline DerivedMetrics derive(const CounterRecord& r, double stall_ratio_bound = 2.0) {
  auto positive = [&](double v, std::string_view name) {
    detail::require(v > 0.0, "record '" + r.label + "': " + std::string(name) + " must be positive to derive ratios");
  };
  positive(r.retired_instructions, "retired_instructions");
  positive(r.bus_cycles, "bus_cycles");
  positive(r.clockticks, "clockticks");
  DerivedMetrics d;
  d.l2_miss_rate = r.l2_lines_in / r.retired_instructions;
  d.bus_utilisation = 2.0 * r.bus_transactions / r.bus_cycles;
  d.stall_ratio = r.stall_cycles / r.clockticks;
  detail::require(d.stall_ratio <= stall_ratio_bound,
                  "record '" + r.label + "': stall ratio " + std::to_string(d.stall_ratio) +
                      " exceeds the sanity bound " + std::to_string(stall_ratio_bound));
  return d;
}

/// Percentage deltas of one record against the baseline. A delta is empty
/// when the baseline value is zero or the ratio cannot be derived.
struct Comparison {
  std::string label;
  std::array<std::optional<double>, 8> counters;
  std::array<std::optional<double>, 3> derived;
};

inline std::optional<double> percent_delta(double value, double baseline) {
  if (baseline == 0.0) return std::nullopt;
  return 100.0 * (value - baseline) / baseline;
}

inline std::vector<Comparison> compare(const std::vector<CounterRecord>& records, const std::string& baseline_label) {
  detail::require(records.size() >= 2, "comparison needs at least two records");
  const CounterRecord* base = nullptr;
  for (const auto& r : records)
    if (r.label == baseline_label) base = &r;
  detail::require(base != nullptr, "baseline '" + baseline_label + "' not found among the records");

  auto try_derive = [](const CounterRecord& r) -> std::optional<DerivedMetrics> {
    try {
      return derive(r);
    } catch (const ContractViolation&) {
      return std::nullopt;
    }
  };
  const auto base_derived = try_derive(*base);

  std::vector<Comparison> out;
  for (const auto& r : records) {
    Comparison c{r.label, {}, {}};
    for (std::size_t n = 0; n < kCounterFields.size(); ++n) c.counters[n] = percent_delta(field(r, n), field(*base, n));
    const auto d = try_derive(r);
    if (d && base_derived)
      for (std::size_t n = 0; n < kDerivedFields.size(); ++n)
        c.derived[n] = percent_delta(field(*d, n), field(*base_derived, n));
    out.push_back(std::move(c));
  }
  return out;
}

namespace csv {

inline std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> cells;
  std::size_t pos = 0;
  while (true) {
    const auto comma = line.find(',', pos);
    std::string_view cell = line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
    while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
    while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t' || cell.back() == '\r')) cell.remove_suffix(1);
    cells.emplace_back(cell);
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return cells;
}

}  // namespace csv

/// Reads `label,<counter fields...>` CSV. The numeric columns may come in
/// any order but must all be present. Errors name the offending line.
inline std::vector<CounterRecord> read_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::size_t> column_field;  // CSV column -> counter field index
  bool have_header = false;
  std::vector<CounterRecord> records;
  auto fail = [&](const std::string& why) {
    throw ContractViolation("line " + std::to_string(line_no) + ": " + why);
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = csv::split_line(line);
    if (!have_header) {
      if (cells.empty() || cells[0] != "label") fail("header must start with 'label'");
      std::array<bool, 8> seen{};
      for (std::size_t c = 1; c < cells.size(); ++c) {
        std::size_t n = 0;
        while (n < kCounterFields.size() && kCounterFields[n] != cells[c]) ++n;
        if (n == kCounterFields.size()) fail("unknown column '" + cells[c] + "'");
        if (seen[n]) fail("duplicate column '" + cells[c] + "'");
        seen[n] = true;
        column_field.push_back(n);
      }
      for (std::size_t n = 0; n < seen.size(); ++n)
        if (!seen[n]) fail("missing column '" + std::string(kCounterFields[n]) + "'");
      have_header = true;
      continue;
    }
    if (cells.size() != column_field.size() + 1)
      fail("expected " + std::to_string(column_field.size() + 1) + " fields, got " + std::to_string(cells.size()));
    CounterRecord r;
    r.label = cells[0];
    if (r.label.empty()) fail("empty label");
    for (std::size_t c = 1; c < cells.size(); ++c) {
      const auto& text = cells[c];
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
      if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty())
        fail("column '" + std::string(kCounterFields[column_field[c - 1]]) + "' is not a number: '" + text + "'");
      if (!(v >= 0.0) || !std::isfinite(v))
        fail("column '" + std::string(kCounterFields[column_field[c - 1]]) + "' must be a non-negative count");
      field(r, column_field[c - 1]) = v;
    }
    records.push_back(std::move(r));
  }
  if (!have_header) throw ContractViolation("counter file is empty");
  if (records.empty()) throw ContractViolation("counter file has a header but no records");
  return records;
}

}  // namespace stune::counters
