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

#include <stdexcept>
#include <string>
#include <string_view>

namespace masklid {

enum class errc {
	bad_magic,
	unsupported_version,
	quantized_unsupported,
	truncated_file,
	non_supervised_model,
	invalid_model,
	io_error,
	empty_input,
	empty_feature_set,
	no_labels_matched,
	invalid_config,
	malformed_record,
	length_mismatch,
	insufficient_data,
};

constexpr auto errc_name(errc code) -> std::string_view
{
	switch (code) {
	case errc::bad_magic: return "BadMagic";
	case errc::unsupported_version: return "UnsupportedVersion";
	case errc::quantized_unsupported: return "QuantizedUnsupported";
	case errc::truncated_file: return "TruncatedFile";
	case errc::non_supervised_model: return "NonSupervisedModel";
	case errc::invalid_model: return "InvalidModel";
	case errc::io_error: return "IoError";
	case errc::empty_input: return "EmptyInput";
	case errc::empty_feature_set: return "EmptyFeatureSet";
	case errc::no_labels_matched: return "NoLabelsMatched";
	case errc::invalid_config: return "InvalidConfig";
	case errc::malformed_record: return "MalformedRecord";
	case errc::length_mismatch: return "LengthMismatch";
	case errc::insufficient_data: return "InsufficientData";
	}
	return "Unknown";
}

/* Model-format and configuration failures; the CLI maps these to exit code 2 */
constexpr auto is_configuration_error(errc code) -> bool
{
	switch (code) {
	case errc::bad_magic:
	case errc::unsupported_version:
	case errc::quantized_unsupported:
	case errc::truncated_file:
	case errc::non_supervised_model:
	case errc::invalid_model:
	case errc::no_labels_matched:
	case errc::invalid_config:
		return true;
	default:
		return false;
	}
}

class error : public std::runtime_error {
public:
	error(errc code, const std::string &what)
		: std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code)
	{
	}

	auto code() const noexcept -> errc
	{
		return code_;
	}

private:
	errc code_;
};

/* Raised by record parsers; carries the 1-based line number of the bad record */
class record_error : public error {
public:
	record_error(std::size_t line, const std::string &what)
		: error(errc::malformed_record, "line " + std::to_string(line) + ": " + what), line_(line)
	{
	}

	auto line() const noexcept -> std::size_t
	{
		return line_;
	}

private:
	std::size_t line_;
};

} // namespace masklid
