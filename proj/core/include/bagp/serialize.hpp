#pragma once

// JSON model documents. Variables are 1-based in the document and 0-based in
// memory; coefficients are written with 17 significant digits so that a
// round trip reproduces them bit for bit.

#include <string>

#include "bagp/constraint.hpp"

namespace bagp {

inline constexpr int kModelSchemaVersion = 1;

std::string model_to_json(const FittedModel& model, int indent = 2);

/// Throws ParseError on malformed JSON and ValidationError on documents that
/// do not describe a consistent model.
FittedModel model_from_json(const std::string& text);

}  // namespace bagp
