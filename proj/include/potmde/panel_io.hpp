#pragma once

#include <iosfwd>
#include <string>

#include "potmde/events.hpp"

namespace potmde {

/// Reads a delimited panel. The header selects the layout:
///   long : run,t,loc,value      (loc is 1-based)
///   wide : run,t,v1,...,vd
/// Runs keep their order of first appearance; rows are sorted by t. Every
/// (run, t, loc) cell must be present exactly once.
PanelSeries read_panel(std::istream& in, const std::string& source_name = "<input>");
PanelSeries read_panel_file(const std::string& path);

void write_panel_wide(std::ostream& out, const PanelSeries& panel);

/// Event spec from a JSON object: {"kind": "sum"|"order_stat"|"run_pattern",
/// "subset": [..] or "all", "order_index": i}.
EventSpec parse_event_spec(const std::string& json_text, std::size_t d);

}  // namespace potmde
