// SPDX-License-Identifier: Apache-2.0
//
// Flat key = value run configuration files: one assignment per line, '#'
// comments and blank lines allowed, keys validated by the caller.

#pragma once

#include <string>
#include <utility>
#include <vector>

namespace awe {

using ConfigEntries = std::vector<std::pair<std::string, std::string>>;

ConfigEntries parse_config_text(const std::string& text, const std::string& origin);
ConfigEntries parse_config_file(const std::string& path);

}  // namespace awe
