#include "mdfn/log.hpp"

#include <cstdlib>
#include <string>

#include <spdlog/sinks/stdout_sinks.h>

namespace mdfn {

std::shared_ptr<spdlog::logger> logger() {
  static const std::shared_ptr<spdlog::logger> instance = [] {
    auto log = std::make_shared<spdlog::logger>("mdfn", std::make_shared<spdlog::sinks::stderr_sink_mt>());
    log->set_pattern("[%l] %v");
    const char* env = std::getenv("MDFN_LOG");
    const std::string level = env ? env : "off";
    if (level == "debug")
      log->set_level(spdlog::level::debug);
    else if (level == "info")
      log->set_level(spdlog::level::info);
    else
      log->set_level(spdlog::level::off);
    return log;
  }();
  return instance;
}

}  // namespace mdfn
