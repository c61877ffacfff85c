#pragma once

#include <charconv>
#include <cmath>
#include <limits>
#include <optional>
#include <type_traits>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "rydmis/error.hpp"
#include "rydmis/graphs.hpp"
#include "rydmis/hamiltonian.hpp"
#include "rydmis/schedules.hpp"

namespace rydmis {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Files

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes through a temporary sibling and renames it into place, so readers
/// never observe a partial file.
inline void write_text_file_atomic(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open '" + tmp.string() + "' for writing");
    out << text;
    if (!out.flush()) throw FormatError("write to '" + tmp.string() + "' failed");
  }
  std::filesystem::rename(tmp, path);
}

/// Shortest decimal form that round-trips.
inline std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

/// Line and column (1-based) of a byte offset.
inline std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

inline json parse_json_text(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    // The reported byte is one past the offending character.
    const auto [line, col] = line_column(text, e.byte > 0 ? e.byte - 1 : 0);
    std::string what = e.what();
    const auto pos = what.find("syntax error");
    throw FormatError(source + ":" + std::to_string(line) + ":" + std::to_string(col) +
                      ": JSON parse error: " + (pos == std::string::npos ? what : what.substr(pos)));
  }
}

inline json load_json(const std::filesystem::path& path) {
  return parse_json_text(read_text_file(path), path.string());
}

// ---------------------------------------------------------------------------
// Schema helpers: errors name the offending JSON pointer.

namespace detail {

[[noreturn]] inline void schema_error(const std::string& ptr, const std::string& msg) {
  throw FormatError("schema error at '" + (ptr.empty() ? std::string("/") : ptr) + "': " + msg);
}

inline const json& require(const json& j, const std::string& ptr, const char* key) {
  if (!j.is_object()) schema_error(ptr, "expected an object");
  const auto it = j.find(key);
  if (it == j.end()) schema_error(ptr, std::string("missing key '") + key + "'");
  return *it;
}

inline double as_number(const json& j, const std::string& ptr) {
  if (!j.is_number()) schema_error(ptr, "expected a number");
  return j.get<double>();
}

inline std::int32_t as_int32(const json& j, const std::string& ptr) {
  if (!j.is_number_integer()) schema_error(ptr, "expected an integer");
  const auto v = j.get<std::int64_t>();
  if (v < std::numeric_limits<std::int32_t>::min() || v > std::numeric_limits<std::int32_t>::max()) {
    schema_error(ptr, "coordinate outside the signed 32-bit range");
  }
  return static_cast<std::int32_t>(v);
}

inline std::vector<double> as_number_array(const json& j, const std::string& ptr) {
  if (!j.is_array()) schema_error(ptr, "expected an array");
  std::vector<double> v;
  for (std::size_t i = 0; i < j.size(); ++i) v.push_back(as_number(j[i], ptr + "/" + std::to_string(i)));
  return v;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Graph JSON: {"name": string, "spacing_um": number, "sites": [[x, y], ...]}

inline json graph_to_json(const UnitDiskGraph& g) {
  json sites = json::array();
  for (const auto& s : g.sites()) sites.push_back({s.x, s.y});
  return {{"name", g.name()}, {"spacing_um", g.spacing_um()}, {"sites", std::move(sites)}};
}

inline UnitDiskGraph graph_from_json(const json& j, const std::string& ptr = "") {
  const auto& jn = detail::require(j, ptr, "name");
  if (!jn.is_string()) detail::schema_error(ptr + "/name", "expected a string");
  const double spacing = detail::as_number(detail::require(j, ptr, "spacing_um"), ptr + "/spacing_um");
  const auto& js = detail::require(j, ptr, "sites");
  if (!js.is_array()) detail::schema_error(ptr + "/sites", "expected an array");
  std::vector<Site> sites;
  for (std::size_t i = 0; i < js.size(); ++i) {
    const std::string p = ptr + "/sites/" + std::to_string(i);
    if (!js[i].is_array() || js[i].size() != 2) detail::schema_error(p, "expected [x, y]");
    sites.push_back({detail::as_int32(js[i][0], p + "/0"), detail::as_int32(js[i][1], p + "/1")});
  }
  try {
    return build_unit_disk_graph(std::move(sites), spacing, jn.get<std::string>());
  } catch (const DomainError& e) {
    throw DomainError((ptr.empty() ? std::string("/") : ptr) + ": " + e.what());
  }
}

/// Accepts a single graph object, an array of graph objects or
/// {"graphs": [...]}.
inline std::vector<UnitDiskGraph> graphs_from_json(const json& j) {
  std::vector<UnitDiskGraph> out;
  const json* arr = nullptr;
  std::string base;
  if (j.is_array()) {
    arr = &j;
  } else if (j.is_object() && j.contains("graphs")) {
    arr = &j.at("graphs");
    base = "/graphs";
    if (!arr->is_array()) detail::schema_error(base, "expected an array");
  } else if (j.is_object()) {
    out.push_back(graph_from_json(j));
    return out;
  } else {
    detail::schema_error("", "expected a graph object, an array of graphs or {\"graphs\": [...]}");
  }
  for (std::size_t i = 0; i < arr->size(); ++i) out.push_back(graph_from_json((*arr)[i], base + "/" + std::to_string(i)));
  return out;
}

inline std::vector<UnitDiskGraph> load_graphs(const std::filesystem::path& path) {
  const auto text = read_text_file(path);
  const auto j = parse_json_text(text, path.string());
  try {
    return graphs_from_json(j);
  } catch (const DomainError& e) {
    throw DomainError(path.string() + ": " + e.what());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

inline std::string graphs_to_text(const std::vector<UnitDiskGraph>& graphs) {
  if (graphs.size() == 1) return graph_to_json(graphs.front()).dump(2) + "\n";
  json arr = json::array();
  for (const auto& g : graphs) arr.push_back(graph_to_json(g));
  return json{{"graphs", std::move(arr)}}.dump(2) + "\n";
}

inline void save_graphs(const std::filesystem::path& path, const std::vector<UnitDiskGraph>& graphs) {
  write_text_file_atomic(path, graphs_to_text(graphs));
}

// ---------------------------------------------------------------------------
// Hardware schedule JSON

/// Checks a hardware program against the device rules. Returns violations.
inline std::vector<std::string> hardware_violations(const Schedule& hw, const PhysicalConstants& pc) {
  std::vector<std::string> errs;
  const auto* h = std::get_if<HardwareShape>(&hw.shape());
  if (h == nullptr) {
    errs.push_back("not a hardware program (discretize first)");
    return errs;
  }
  const auto& t = h->omega.times();
  if (t != h->delta.times() || t != h->phi.times()) errs.push_back("omega, delta and phi grids differ");
  for (std::size_t k = 1; k < t.size(); ++k) {
    if (t[k] - t[k - 1] < pc.hw_step_us * (1.0 - 1e-9)) {
      errs.push_back("interval " + std::to_string(k - 1) + " shorter than " + format_double(pc.hw_step_us) + " us");
      break;
    }
  }
  const auto& om = h->omega.values();
  if (om.front() != 0.0 || om.back() != 0.0) errs.push_back("Omega must be exactly 0 at both ends");
  for (std::size_t k = 0; k < om.size(); ++k) {
    if (om[k] < 0.0 || om[k] > pc.omega_max) {
      errs.push_back("Omega[" + std::to_string(k) + "] = " + format_double(om[k]) + " outside [0, Omega_max]");
      break;
    }
  }
  const auto& de = h->delta.values();
  if (!(de.front() <= -pc.delta_noise)) errs.push_back("Delta(0) must be <= -" + format_double(pc.delta_noise));
  if (!(de.back() > 0.0)) errs.push_back("Delta(t_f) must be > 0");
  if (h->phase_sign != 1 && h->phase_sign != -1) errs.push_back("phase_sign must be +1 or -1");
  return errs;
}

inline json schedule_to_json(const Schedule& hw, const PhysicalConstants& pc = {}) {
  const auto errs = hardware_violations(hw, pc);
  if (!errs.empty()) throw DomainError(detail::join_violations("schedule export refused", errs));
  const auto& h = std::get<HardwareShape>(hw.shape());
  std::vector<double> phi = h.phi.values();
  for (auto& p : phi) p *= h.phase_sign;
  const auto curve = [](const std::vector<double>& t, const std::vector<double>& v) {
    return json{{"times", t}, {"values", v}};
  };
  return {{"duration_us", hw.duration()},
          {"omega_mhz", curve(h.omega.times(), h.omega.values())},
          {"delta_mhz", curve(h.delta.times(), h.delta.values())},
          {"phi_rad", curve(h.phi.times(), phi)},
          {"phase_sign", h.phase_sign}};
}

inline Schedule schedule_from_json(const json& j, const PhysicalConstants& pc = {}) {
  using detail::require;
  const double tf = detail::as_number(require(j, "", "duration_us"), "/duration_us");
  const auto curve = [&](const char* key) {
    const std::string p = std::string("/") + key;
    const auto& c = require(j, "", key);
    return std::pair{detail::as_number_array(require(c, p, "times"), p + "/times"),
                     detail::as_number_array(require(c, p, "values"), p + "/values")};
  };
  const auto& js = require(j, "", "phase_sign");
  if (!js.is_number_integer() || (js.get<int>() != 1 && js.get<int>() != -1)) {
    detail::schema_error("/phase_sign", "expected +1 or -1");
  }
  const int sign = js.get<int>();
  auto [ot, ov] = curve("omega_mhz");
  auto [dt, dv] = curve("delta_mhz");
  auto [pt, pv] = curve("phi_rad");
  for (auto& p : pv) p *= sign;
  std::optional<Schedule> s;
  try {
    HardwareShape shape{PiecewiseLinearCurve(std::move(ot), std::move(ov)),
                        PiecewiseLinearCurve(std::move(dt), std::move(dv)),
                        PiecewiseConstantCurve(std::move(pt), std::move(pv)), sign, 0.0};
    if (std::abs(shape.omega.duration() - tf) > 1e-12 * std::max(1.0, tf)) {
      throw DomainError("duration_us does not match the last breakpoint");
    }
    s.emplace(Protocol::Hardware, std::vector<double>{}, tf, std::move(shape));
  } catch (const DomainError& e) {
    throw FormatError(std::string("invalid hardware schedule: ") + e.what());
  }
  const auto errs = hardware_violations(*s, pc);
  if (!errs.empty()) throw FormatError(detail::join_violations("invalid hardware schedule", errs));
  return std::move(*s);
}

// ---------------------------------------------------------------------------
// CSV

/// Minimal CSV writer; doubles use the shortest round-trip form.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) : columns_(header.size()) { row_strings(header); }

  template <class... Ts>
  CsvWriter& row(const Ts&... cells) {
    if (sizeof...(Ts) != columns_) throw DomainError("CSV row has the wrong number of cells");
    std::size_t k = 0;
    ((text_ += (k++ ? "," : "") + cell(cells)), ...);
    text_ += "\n";
    return *this;
  }

  CsvWriter& row_strings(const std::vector<std::string>& cells) {
    if (cells.size() != columns_) throw DomainError("CSV row has the wrong number of cells");
    for (std::size_t k = 0; k < cells.size(); ++k) text_ += (k ? "," : "") + escape(cells[k]);
    text_ += "\n";
    return *this;
  }

  const std::string& str() const { return text_; }
  void save(const std::filesystem::path& path) const { write_text_file_atomic(path, text_); }

  static std::string escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
    return out + "\"";
  }

 private:
  static std::string cell(double v) { return format_double(v); }
  static std::string cell(const std::string& s) { return escape(s); }
  static std::string cell(const char* s) { return escape(s); }
  static std::string cell(bool b) { return b ? "true" : "false"; }
  template <class T>
    requires std::is_integral_v<T>
  static std::string cell(T v) {
    return std::to_string(v);
  }

  std::size_t columns_;
  std::string text_;
};

/// Splits CSV text into rows of cells (quotes honored).
inline std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string cell;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(cell));
      cell.clear();
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (!row.empty() || !cell.empty() || any) {
        row.push_back(std::move(cell));
        rows.push_back(std::move(row));
      }
      row.clear();
      cell.clear();
      any = false;
    } else {
      cell += c;
      any = true;
    }
  }
  if (quoted) throw FormatError("CSV ends inside a quoted cell");
  if (!row.empty() || !cell.empty()) {
    row.push_back(std::move(cell));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline double parse_double_cell(const std::string& s) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw FormatError("not a number: '" + s + "'");
  return v;
}

}  // namespace rydmis
