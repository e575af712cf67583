#pragma once

#include <string_view>

#include <spdlog/spdlog.h>

namespace fermi {

/// Routes the default logger to stderr and applies FERMI_LOG_LEVEL
/// (error | info | debug; default info). Safe to call repeatedly.
void init_logging();
void set_log_level(std::string_view level);

}  // namespace fermi
