#pragma once

#include <string>

#include "shapeagg/pattern.hpp"
#include "shapeagg/sequence.hpp"

namespace shapeagg {

/// CSV layout: header line `value`, then one number per line. JSON layout:
/// a flat array of numbers. read_sequence dispatches on the .json extension.
Sequence read_sequence_csv(const std::string& path);
void write_sequence_csv(const std::string& path, const Sequence& seq);
Sequence read_sequence_json(const std::string& path);
void write_sequence_json(const std::string& path, const Sequence& seq);
Sequence read_sequence(const std::string& path);

/// Deterministic shortest-round-trip formatting used by every report writer.
std::string format_double(double v);

}  // namespace shapeagg
