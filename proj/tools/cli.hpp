// SPDX-License-Identifier: Apache-2.0
#pragma once

// The biasaudit command line, as a library so tests can drive it with
// in-memory streams.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "biasaudit/orchestrator.hpp"

namespace biasaudit::cli {

enum class RunMode { Offline, Chat };

/// Settings read from a JSON config file. Command-line flags win over it.
/// The file may name the environment variable holding the API key but never
/// the key itself.
struct Config {
  std::optional<RunMode> mode;
  std::optional<std::string> out;
  std::optional<std::string> thresholds;
  std::optional<std::string> library;
  orchestrator::ChatConfig chat;
};

/// Recognized keys: mode ("offline" | "chat"), out, thresholds, library and
/// chat {base_url, model, api_key_env, timeout_s, max_attempts}. Unknown keys
/// and anything that looks like a stored secret raise InvalidArgument.
Config parse_config(const nlohmann::json& j);
Config load_config(const std::filesystem::path& path);

/// Exit codes.
inline constexpr int kComplete = 0;
inline constexpr int kError = 1;
inline constexpr int kIncomplete = 2;

/// `args` excludes the program name.
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace biasaudit::cli
