#pragma once

#include <iosfwd>
#include <string>

#include "simcache/model.hpp"

namespace simcache {

// Text instance format (sections [space], [topology], [demand],
// [repositories]); see docs/instance-format.md. `base_dir` anchors @file
// payload references. parse_instance is purely syntactic; read_instance also
// runs validate_instance.
Instance parse_instance(std::istream& in, const std::string& base_dir = ".");
Instance read_instance(const std::string& path);

// Serialization always inlines payloads, so the result is self-contained.
std::string format_instance(const Instance& inst);
void write_instance(const Instance& inst, const std::string& path);

// Allocations are stored one `object,node` pair per line.
Allocation parse_allocation(std::istream& in);
Allocation read_allocation(const std::string& path);
std::string format_allocation(const Allocation& a);
void write_allocation(const Allocation& a, const std::string& path);

}  // namespace simcache
