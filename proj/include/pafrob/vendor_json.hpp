#pragma once
// Single include point for nlohmann/json (vendored single header).
#include <json.hpp>
