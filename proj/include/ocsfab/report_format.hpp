#pragma once

#include <cstdint>
#include <string_view>

#include "json.hpp"

#include "ocsfab/fabric.hpp"

namespace ocsfab {

using Json = nlohmann::ordered_json;

inline constexpr int kReportDigits = 6;

// Rounds through a fixed-precision decimal rendering so printed reports are
// byte-stable.
double round_sig(double v, int digits = kReportDigits);

// Finite values are rounded; infinities and NaN become the strings "inf", "-inf", "nan".
Json number_json(double v);
double number_from_json(const Json& j);

std::uint64_t fnv1a64(std::string_view bytes);

Json striping_to_json(const StripingMatrix& s);
StripingMatrix striping_from_json(const Json& j);

inline constexpr const char* kFabricSchema = "ocsfab.fabric/1";
Json fabric_to_json(const Fabric& fabric);

}  // namespace ocsfab
