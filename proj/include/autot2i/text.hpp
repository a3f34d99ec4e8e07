// Copyright 2026 The autot2i Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace autot2i::text {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
bool iequals(std::string_view a, std::string_view b);

/// Lowercases and splits on whitespace and ASCII punctuation. Bytes >= 0x80 are kept
/// inside tokens so UTF-8 words survive intact.
std::vector<std::string> word_tokens(std::string_view s);

/// Whitespace-delimited tokens; the unit for prompt length caps.
std::vector<std::string_view> whitespace_tokens(std::string_view s);

/// Returns `s` cut after its `max_tokens`-th whitespace token, preserving the original spacing
/// inside the kept span.
std::string truncate_tokens(std::string_view s, std::size_t max_tokens);

std::vector<std::string> split_lines(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

bool starts_with_ci(std::string_view s, std::string_view prefix);

}  // namespace autot2i::text
