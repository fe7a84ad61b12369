/*
 * Copyright 2026 The masklid Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace masklid::utf8 {

constexpr auto is_continuation(char c) -> bool
{
	return (static_cast<unsigned char>(c) & 0xC0) == 0x80;
}

/* Byte offsets where characters start, plus a trailing sentinel equal to s.size().
 * Boundaries follow the lead-byte rule only, so malformed input never splits
 * a continuation run. */
inline auto char_starts(std::string_view s) -> std::vector<std::size_t>
{
	std::vector<std::size_t> starts;
	starts.reserve(s.size() + 1);
	for (std::size_t i = 0; i < s.size(); i++) {
		if (!is_continuation(s[i])) {
			starts.push_back(i);
		}
	}
	starts.push_back(s.size());
	return starts;
}

struct decoded {
	char32_t cp;
	std::size_t len;
};

/* Decodes one scalar value at the start of s; nullopt on any malformed sequence */
inline auto decode(std::string_view s) -> std::optional<decoded>
{
	if (s.empty()) return std::nullopt;
	auto b0 = static_cast<unsigned char>(s[0]);
	if (b0 < 0x80) return decoded{b0, 1};

	std::size_t len;
	char32_t cp;
	char32_t min;
	if ((b0 & 0xE0) == 0xC0) {
		len = 2, cp = b0 & 0x1F, min = 0x80;
	}
	else if ((b0 & 0xF0) == 0xE0) {
		len = 3, cp = b0 & 0x0F, min = 0x800;
	}
	else if ((b0 & 0xF8) == 0xF0) {
		len = 4, cp = b0 & 0x07, min = 0x10000;
	}
	else {
		return std::nullopt;
	}
	if (s.size() < len) return std::nullopt;
	for (std::size_t i = 1; i < len; i++) {
		if (!is_continuation(s[i])) return std::nullopt;
		cp = (cp << 6) | (static_cast<unsigned char>(s[i]) & 0x3F);
	}
	if (cp < min || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return std::nullopt;
	return decoded{cp, len};
}

inline auto is_valid(std::string_view s) -> bool
{
	while (!s.empty()) {
		auto d = decode(s);
		if (!d) return false;
		s.remove_prefix(d->len);
	}
	return true;
}

inline void append(std::string &out, char32_t cp)
{
	if (cp < 0x80) {
		out.push_back(static_cast<char>(cp));
	}
	else if (cp < 0x800) {
		out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
		out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
	}
	else if (cp < 0x10000) {
		out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
		out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
		out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
	}
	else {
		out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
		out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
		out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
		out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
	}
}

} // namespace masklid::utf8
