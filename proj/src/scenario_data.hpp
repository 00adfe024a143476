#pragma once

#include <string>
#include <utility>
#include <vector>

namespace cqed::detail {

/// (name, JSON text) of every shipped scenario, generated from configs/ at configure time.
const std::vector<std::pair<std::string, std::string>>& shipped_scenarios();

}  // namespace cqed::detail
