#pragma once

#include "moenet/core_data.hpp"
#include "moenet/cv.hpp"
#include "moenet/enet.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>

namespace moenet {

using Json = nlohmann::ordered_json;

/// Coefficients are stored sparsely as {"column index": value}.
Json to_json(const EnetFit& fit);
EnetFit enet_fit_from_json(const Json& j, Index p);

Json to_json(const CvResult& cv);
Json to_json(const RepeatedSelection& rs);

/// column_name, layer, count.
std::string frequency_csv(const RepeatedSelection& rs, const LayerStack& stack);

/// NaN and infinities become null.
Json number_or_null(double v);

void write_text(const std::filesystem::path& path, const std::string& text);
void write_json(const std::filesystem::path& path, const Json& j);
std::string read_text(const std::filesystem::path& path);

}  // namespace moenet
