#pragma once

// JSON forms of offspring laws and analysis results.

#include <nlohmann/json.hpp>

#include "rdelab/analysis.hpp"
#include "rdelab/distiter.hpp"
#include "rdelab/pgf.hpp"
#include "rdelab/simulate.hpp"

namespace rdelab {

using Json = nlohmann::json;

/// Parses {"kind": "deterministic" | "geometric" | "finite" | "thinned", ...}.
/// Throws ValidationError naming the offending field.
OffspringSpec spec_from_json(const Json& j);
Json spec_to_json(const OffspringSpec& spec);

Json to_json(const FixedPointReport& r);
Json to_json(const MomentSequence& m);
Json to_json(const TwoCycle& c);
Json to_json(const CycleScan& s);
Json to_json(const McMoments& m);
Json to_json(const EndogenyDiagnostic& d);
Json to_json(const TrajectoryRecord& t);

}  // namespace rdelab
