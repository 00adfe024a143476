#pragma once

#include <string>
#include <vector>

#include "cqed/kernels.hpp"

namespace cqed {

struct SelfCheck {
    std::string name;
    bool passed = false;
    std::string detail;
};

/// Embedded invariant suite. `hooks` is forwarded to every master-equation check so
/// an injected fault shows up in the report.
std::vector<SelfCheck> run_selftest(const DebugHooks& hooks = {});

/// Fixed-width table, one line per check, plus a summary line.
std::string format_selftest(const std::vector<SelfCheck>& checks);

}  // namespace cqed
