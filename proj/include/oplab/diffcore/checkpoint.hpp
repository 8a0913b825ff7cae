#pragma once

#include "oplab/diffcore/mlp.hpp"

#include <iosfwd>
#include <string>

namespace oplab::diffcore {

// Flat binary checkpoint of one ParamStore, keyed by parameter name.
//
// Layout (little-endian):
//   u32 magic 0x4F504C31 ("OPL1") | i64 opt_t | u32 entry count |
//   per entry: u32 name length, name bytes, i64 rows, i64 cols,
//              rows*cols f64 value, then m, then v (same shape).
// Gradients are transient and not stored. Round-trips are bit-exact.
void save_store(std::ostream& out, const ParamStore& store);
ParamStore load_store(std::istream& in);

void save_store_file(const std::string& path, const ParamStore& store);
ParamStore load_store_file(const std::string& path);

}  // namespace oplab::diffcore
