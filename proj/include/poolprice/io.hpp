#pragma once

#include <string>

#include "poolprice/core.hpp"

namespace poolprice::io {

// Instance files: {"lambda": x, "prices": [...], "counts": [...]}.
std::string emit_instance(const UdpmInstance& inst);
UdpmInstance parse_instance(const std::string& text);

// Schedule files: {"breakpoints": [...], "prices": [...]}.
std::string emit_schedule(const PriceSchedule& schedule);
PriceSchedule parse_schedule(const std::string& text);

// {"t": [...]}
std::string emit_allocation(const MarkdownAllocation& t);
MarkdownAllocation parse_allocation(const std::string& text);

// {"prices": [...]}
std::string emit_ladder(const PriceLadder& ladder);
PriceLadder parse_ladder(const std::string& text);

// {"base_rate": x, "prices": [...], "demand": [...]}
std::string emit_stream(const StreamInstance& inst);
StreamInstance parse_stream(const std::string& text);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

}  // namespace poolprice::io
