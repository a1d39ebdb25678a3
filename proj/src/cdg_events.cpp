#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dnnaif/cdg.hpp"

namespace dnnaif::cdg {

namespace {

using json = nlohmann::json;
using F = Flag;

EventDef ev(std::string name, std::string stages, int min_buffer = 0,
            int max_buffer = kBufferCapacity, std::vector<std::pair<Flag, bool>> flags = {}) {
  std::sort(flags.begin(), flags.end());
  return {std::move(name), std::move(stages), min_buffer, max_buffer, std::move(flags)};
}

EventManifest build_default() {
  const int cap = kBufferCapacity;
  return {
      ev("all_empty", "000000"),
      ev("s1_only", "100000"),
      ev("c_head_only", "xxx100"),
      ev("buffer_full", "xxxxxx", cap),
      ev("buffer_full_s_empty", "000xxx", cap),
      ev("ls_miss", "xxxxxx", 0, cap, {{F::LsBusy, true}}),
      ev("dep_stall", "xxxxxx", 0, cap, {{F::DepStall, true}}),
      ev("serialize_wait", "xxxxxx", 0, cap, {{F::SerializeWait, true}}),
      ev("serialize_wait_buffer", "xxxxxx", 3, cap, {{F::SerializeWait, true}}),
      ev("s_stall_c_idle", "xxx000", 0, cap, {{F::StallS, true}}),
      ev("s_full", "111xxx"),
      ev("c_full", "xxx111"),
      ev("both_busy", "x1xx1x"),
      ev("ls_branch_busy", "x1xx1x", 0, cap, {{F::LsBusy, true}, {F::BranchActive, true}}),
      ev("chain_s_full", "111xxx", 0, cap, {{F::ComplexChain, true}}),
      ev("tails", "xx1xx1"),
      ev("diagonal", "1xxx1x"),
      ev("s_ends", "1x1xxx"),
      ev("c_ends", "xxx1x1"),
      ev("buffer_c_busy", "xxx11x", 3),
      ev("ls_miss_c_busy", "xxxx1x", 0, cap, {{F::LsBusy, true}}),
      ev("ls_miss_s_full", "111xxx", 0, cap, {{F::LsBusy, true}}),
      ev("ls_miss_loaded", "xxxx1x", 2, cap, {{F::LsBusy, true}}),
      ev("ls_miss_branch", "xxxxxx", 0, cap, {{F::LsBusy, true}, {F::BranchActive, true}}),
      ev("branch_flush", "xxxxxx", 0, cap, {{F::Flush, true}}),
      ev("flush_c_busy", "xxxx1x", 0, cap, {{F::Flush, true}}),
      ev("branch_stall", "xxxxxx", 0, cap, {{F::BranchActive, true}, {F::StallS, true}}),
      ev("branch_c_busy", "xxxx1x", 0, cap, {{F::BranchActive, true}}),
      ev("dep_stall_buffer", "xxxxxx", 3, cap, {{F::DepStall, true}}),
      ev("dual_dispatch", "xxxxxx", 0, cap, {{F::DualDispatch, true}}),
      ev("dual_chain", "xxxxxx", 0, cap, {{F::DualDispatch, true}, {F::ComplexChain, true}}),
      ev("complex_chain", "xxxxxx", 0, cap, {{F::ComplexChain, true}}),
      ev("complex_chain_stall", "xxxxxx", 0, cap, {{F::ComplexChain, true}, {F::StallC, true}}),
      ev("stall_both", "xxxxxx", 0, cap, {{F::StallS, true}, {F::StallC, true}}),
      ev("stall_both_buffer", "xxxxxx", 2, cap, {{F::StallS, true}, {F::StallC, true}}),
  };
}

json flags_to_json(const std::vector<std::pair<Flag, bool>>& flags) {
  json out = json::object();
  for (const auto& [flag, value] : flags) out[std::string(to_string(flag))] = value;
  return out;
}

template <typename T>
T require(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) {
    throw Error(ErrorKind::ParseError, where + ": missing key '" + key + "'");
  }
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorKind::ParseError, where + ": key '" + key + "' has the wrong type");
  }
}

EventDef parse_event(const json& j, std::size_t index) {
  const std::string where = "event " + std::to_string(index);
  if (!j.is_object()) throw Error(ErrorKind::ParseError, where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (key != "name" && key != "stages" && key != "min_buffer" && key != "max_buffer" &&
        key != "flags") {
      throw Error(ErrorKind::ParseError, where + ": unknown key '" + key + "'");
    }
  }
  EventDef e;
  e.name = require<std::string>(j, "name", where);
  if (j.contains("stages")) e.stages = require<std::string>(j, "stages", where);
  if (j.contains("min_buffer")) e.min_buffer = require<int>(j, "min_buffer", where);
  if (j.contains("max_buffer")) e.max_buffer = require<int>(j, "max_buffer", where);
  if (e.stages.size() != 6 ||
      e.stages.find_first_not_of("01x") != std::string::npos) {
    throw Error(ErrorKind::ParseError, where + ": stages must be 6 characters of 0, 1 or x");
  }
  if (e.min_buffer < 0 || e.max_buffer > kBufferCapacity || e.min_buffer > e.max_buffer) {
    throw Error(ErrorKind::ParseError, where + ": buffer bounds out of range");
  }
  if (j.contains("flags")) {
    const json& flags = j.at("flags");
    if (!flags.is_object()) throw Error(ErrorKind::ParseError, where + ": flags must be an object");
    for (const auto& [key, value] : flags.items()) {
      if (!value.is_boolean()) {
        throw Error(ErrorKind::ParseError, where + ": flag '" + key + "' must be a boolean");
      }
      e.flags.emplace_back(flag_from_string(key), value.get<bool>());
    }
    std::sort(e.flags.begin(), e.flags.end());
  }
  return e;
}

}  // namespace

const EventManifest& default_events() {
  static const EventManifest events = build_default();
  return events;
}

EventManifest parse_event_manifest(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::ParseError, std::string("event manifest: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("events") || !doc.at("events").is_array()) {
    throw Error(ErrorKind::ParseError, "event manifest: expected {\"events\": [...]}");
  }
  EventManifest events;
  const json& list = doc.at("events");
  for (std::size_t i = 0; i < list.size(); ++i) events.push_back(parse_event(list[i], i));
  if (events.empty()) throw Error(ErrorKind::ParseError, "event manifest is empty");
  return events;
}

EventManifest load_event_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open event manifest " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_event_manifest(buffer.str());
}

std::string event_manifest_to_string(const EventManifest& events) {
  json list = json::array();
  for (const EventDef& e : events) {
    json j;
    j["name"] = e.name;
    j["stages"] = e.stages;
    j["min_buffer"] = e.min_buffer;
    j["max_buffer"] = e.max_buffer;
    j["flags"] = flags_to_json(e.flags);
    list.push_back(std::move(j));
  }
  return json{{"events", list}}.dump(2) + "\n";
}

}  // namespace dnnaif::cdg
