#pragma once

#include <memory>

#include <spdlog/spdlog.h>

namespace mdfn {

/// Shared stderr logger. Level comes from MDFN_LOG (off, info, debug;
/// default off) on first use.
std::shared_ptr<spdlog::logger> logger();

}  // namespace mdfn
