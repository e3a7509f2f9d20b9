// Copyright 2026 The relpool authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdlib>
#include <iostream>
#include <string>

namespace relpool {

enum class LogLevel { error = 0, info = 1, debug = 2 };

// Level comes from the SPATIAL_LOG environment variable (error|info|debug),
// read once per process. Unset or unrecognized values mean "error".
inline LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("SPATIAL_LOG");
    if (env == nullptr) return LogLevel::error;
    const std::string value(env);
    if (value == "debug") return LogLevel::debug;
    if (value == "info") return LogLevel::info;
    return LogLevel::error;
  }();
  return level;
}

inline void log_error(const std::string& message) {
  std::cerr << "[error] " << message << "\n";
}

inline void log_info(const std::string& message) {
  if (log_level() >= LogLevel::info) std::cerr << "[info] " << message << "\n";
}

inline void log_debug(const std::string& message) {
  if (log_level() >= LogLevel::debug)
    std::cerr << "[debug] " << message << "\n";
}

}  // namespace relpool
