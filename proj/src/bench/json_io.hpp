#pragma once

#include "json.hpp"
#include "qmoe/gbdt.hpp"
#include "qmoe/hybrid.hpp"

namespace qmoe::bench {

nlohmann::json gqc_config_json(const hybrid::GqcConfig& c);
nlohmann::json gbdt_params_to_json(const gbdt::GbdtParams& p);

}  // namespace qmoe::bench
