#include "fermi/logging.hpp"

#include <cstdlib>
#include <mutex>
#include <string>

#include <spdlog/sinks/stdout_sinks.h>

#include "fermi/errors.hpp"

namespace fermi {

void set_log_level(std::string_view level) {
  if (level == "error")
    spdlog::set_level(spdlog::level::err);
  else if (level == "info")
    spdlog::set_level(spdlog::level::info);
  else if (level == "debug")
    spdlog::set_level(spdlog::level::debug);
  else
    throw ConfigError("FERMI_LOG_LEVEL must be error, info or debug, got '" + std::string(level) + "'");
}

void init_logging() {
  static std::once_flag once;
  std::call_once(once, [] {
    auto logger = spdlog::stderr_logger_mt("fermi");
    logger->set_pattern("[%H:%M:%S] [%l] %v");
    spdlog::set_default_logger(logger);
  });
  const char* env = std::getenv("FERMI_LOG_LEVEL");
  set_log_level(env && *env ? env : "info");
}

}  // namespace fermi
