#include "potmde/panel_io.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>

#include "potmde/error.hpp"

namespace potmde {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, pos == std::string::npos ? std::string::npos : pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

struct Where {
  const std::string& source;
  std::size_t line;
  [[noreturn]] void fail(const std::string& msg) const {
    throw DataError(source + ":" + std::to_string(line) + ": " + msg);
  }
};

double parse_real(const std::string& s, const Where& w) {
  if (s.empty()) w.fail("missing value");
  double v = 0.0;
  const char* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end) w.fail("cannot parse '" + s + "' as a decimal number");
  if (!std::isfinite(v)) w.fail("non-finite value '" + s + "'");
  if (v < 0.0) w.fail("negative value '" + s + "'");
  return v;
}

long long parse_int(const std::string& s, const Where& w, const char* what) {
  long long v = 0;
  const char* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (s.empty() || ec != std::errc() || p != end) w.fail(std::string("cannot parse ") + what + " '" + s + "' as an integer");
  return v;
}

struct RunBuilder {
  std::string id;
  std::map<long long, std::vector<double>> rows;  // t -> values (NaN = missing)
};

}  // namespace

PanelSeries read_panel(std::istream& in, const std::string& source_name) {
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    header = split_fields(t);
    break;
  }
  if (header.empty()) throw DataError(source_name + ": empty panel file");
  if (header.size() < 3 || header[0] != "run" || header[1] != "t")
    Where{source_name, lineno}.fail("header must start with 'run,t'");
  const bool long_format = header.size() == 4 && header[2] == "loc" && header[3] == "value";
  const std::size_t d_wide = header.size() - 2;

  std::vector<RunBuilder> runs;
  std::map<std::string, std::size_t> index;
  std::size_t d = long_format ? 0 : d_wide;
  constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

  auto run_for = [&](const std::string& id) -> RunBuilder& {
    auto [it, fresh] = index.emplace(id, runs.size());
    if (fresh) runs.push_back(RunBuilder{id, {}});
    return runs[it->second];
  };

  std::vector<std::tuple<std::size_t, std::string, long long, long long, double>> cells;  // long format
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const Where w{source_name, lineno};
    const auto f = split_fields(t);
    if (f.size() != header.size())
      w.fail("expected " + std::to_string(header.size()) + " fields, found " + std::to_string(f.size()));
    if (f[0].empty()) w.fail("missing run identifier");
    const long long tt = parse_int(f[1], w, "time index");
    if (long_format) {
      const long long loc = parse_int(f[2], w, "location");
      if (loc < 1) w.fail("location must be >= 1");
      cells.emplace_back(lineno, f[0], tt, loc, parse_real(f[3], w));
      d = std::max(d, static_cast<std::size_t>(loc));
    } else {
      RunBuilder& rb = run_for(f[0]);
      std::vector<double> vals(d_wide);
      for (std::size_t j = 0; j < d_wide; ++j) vals[j] = parse_real(f[j + 2], w);
      if (!rb.rows.emplace(tt, std::move(vals)).second) w.fail("duplicate time index " + std::to_string(tt));
    }
  }
  if (long_format) {
    for (const auto& [ln, id, tt, loc, v] : cells) {
      RunBuilder& rb = run_for(id);
      auto& row = rb.rows.try_emplace(tt, std::vector<double>(d, kMissing)).first->second;
      double& slot = row[static_cast<std::size_t>(loc - 1)];
      if (!std::isnan(slot)) Where{source_name, ln}.fail("duplicate cell for run " + id);
      slot = v;
    }
  }
  if (runs.empty()) throw DataError(source_name + ": panel has no data rows");

  std::vector<Run> out;
  for (RunBuilder& rb : runs) {
    Run r;
    r.id = rb.id;
    r.cols = d;
    r.rows = rb.rows.size();
    long long expected = rb.rows.begin()->first;
    for (auto& [tt, vals] : rb.rows) {
      if (tt != expected) throw DataError(source_name + ": run " + rb.id + " is missing time index " + std::to_string(expected));
      ++expected;
      for (std::size_t j = 0; j < d; ++j) {
        if (std::isnan(vals[j]))
          throw DataError(source_name + ": run " + rb.id + " t=" + std::to_string(tt) + " is missing location " +
                          std::to_string(j + 1));
        r.values.push_back(vals[j]);
      }
    }
    out.push_back(std::move(r));
  }
  return PanelSeries(std::move(out));
}

PanelSeries read_panel_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open panel file '" + path + "'");
  return read_panel(in, path);
}

void write_panel_wide(std::ostream& out, const PanelSeries& panel) {
  out << "run,t";
  for (std::size_t j = 1; j <= panel.locations(); ++j) out << ",v" << j;
  out << '\n';
  char buf[64];
  for (const Run& r : panel.runs())
    for (std::size_t t = 0; t < r.rows; ++t) {
      out << r.id << ',' << (t + 1);
      for (std::size_t j = 0; j < r.cols; ++j) {
        std::snprintf(buf, sizeof buf, "%.17g", r.at(t, j));
        out << ',' << buf;
      }
      out << '\n';
    }
}

EventSpec parse_event_spec(const std::string& json_text, std::size_t d) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("event spec: ") + e.what());
  }
  if (j.contains("event")) j = j["event"];
  EventSpec spec;
  try {
    spec.kind = event_kind_from_string(j.at("kind").get<std::string>());
    const auto& subset = j.at("subset");
    if (subset.is_string() && subset.get<std::string>() == "all") {
      for (std::size_t i = 1; i <= d; ++i) spec.subset.push_back(i);
    } else {
      spec.subset = subset.get<std::vector<std::size_t>>();
    }
    spec.order_index = j.value("order_index", std::size_t{1});
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("event spec: ") + e.what());
  }
  spec.validate(d);
  return spec;
}

}  // namespace potmde
