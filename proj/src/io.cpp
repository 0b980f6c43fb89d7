#include "poolprice/io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace poolprice::io {

using nlohmann::json;

namespace {

json parse_object(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("expected a JSON object");
  return j;
}

template <typename T>
T field(const json& j, const char* key) {
  if (!j.contains(key)) {
    throw std::invalid_argument(std::string("missing field '") + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw std::invalid_argument(std::string("bad type for field '") + key +
                                "'");
  }
}

std::vector<double> to_vector(std::span<const double> s) {
  return {s.begin(), s.end()};
}

}  // namespace

std::string emit_instance(const UdpmInstance& inst) {
  json j;
  j["lambda"] = inst.lambda();
  j["prices"] = to_vector(inst.ladder().prices());
  j["counts"] = to_vector(inst.counts());
  return j.dump();
}

UdpmInstance parse_instance(const std::string& text) {
  json j = parse_object(text);
  return make_udpm(field<double>(j, "lambda"),
                   field<std::vector<double>>(j, "prices"),
                   field<std::vector<double>>(j, "counts"));
}

std::string emit_schedule(const PriceSchedule& schedule) {
  json j;
  j["breakpoints"] = to_vector(schedule.breakpoints());
  j["prices"] = to_vector(schedule.prices());
  return j.dump();
}

PriceSchedule parse_schedule(const std::string& text) {
  json j = parse_object(text);
  return PriceSchedule(field<std::vector<double>>(j, "breakpoints"),
                       field<std::vector<double>>(j, "prices"));
}

std::string emit_allocation(const MarkdownAllocation& t) {
  json j;
  j["t"] = to_vector(t.fractions());
  return j.dump();
}

MarkdownAllocation parse_allocation(const std::string& text) {
  json j = parse_object(text);
  return MarkdownAllocation(field<std::vector<double>>(j, "t"));
}

std::string emit_ladder(const PriceLadder& ladder) {
  json j;
  j["prices"] = to_vector(ladder.prices());
  return j.dump();
}

PriceLadder parse_ladder(const std::string& text) {
  json j = parse_object(text);
  return PriceLadder(field<std::vector<double>>(j, "prices"));
}

std::string emit_stream(const StreamInstance& inst) {
  json j;
  j["base_rate"] = inst.base_rate();
  j["prices"] = to_vector(inst.ladder().prices());
  j["demand"] = to_vector(inst.demand());
  return j.dump();
}

StreamInstance parse_stream(const std::string& text) {
  json j = parse_object(text);
  return StreamInstance(field<double>(j, "base_rate"),
                        PriceLadder(field<std::vector<double>>(j, "prices")),
                        field<std::vector<double>>(j, "demand"));
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << contents;
  if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace poolprice::io
