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

#include "masklid/masklid.hpp"
#include "masklid/model_io.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace masklid {

struct record_language {
	std::string label;
	std::vector<std::size_t> word_indices;
	std::vector<std::string> words;
	double probability = 0.0;

	friend auto operator==(const record_language &, const record_language &) -> bool = default;
};

/* One line of `masklid` / `mine` output */
struct mine_record {
	std::size_t line = 0;
	std::string text;
	std::vector<record_language> languages;
	std::string termination;

	friend auto operator==(const mine_record &, const mine_record &) -> bool = default;
};

inline void to_json(nlohmann::json &j, const record_language &l)
{
	j = {{"label", l.label}, {"word_indices", l.word_indices}, {"words", l.words}, {"probability", l.probability}};
}

inline void from_json(const nlohmann::json &j, record_language &l)
{
	j.at("label").get_to(l.label);
	j.at("word_indices").get_to(l.word_indices);
	j.at("words").get_to(l.words);
	j.at("probability").get_to(l.probability);
}

inline void to_json(nlohmann::json &j, const mine_record &r)
{
	j = {{"line", r.line}, {"text", r.text}, {"languages", r.languages}, {"termination", r.termination}};
}

inline void from_json(const nlohmann::json &j, mine_record &r)
{
	j.at("line").get_to(r.line);
	j.at("text").get_to(r.text);
	j.at("languages").get_to(r.languages);
	j.at("termination").get_to(r.termination);
}

inline auto make_mine_record(std::size_t line, std::string text, const sentence_prediction &p,
							 const classifier_model &model) -> mine_record
{
	mine_record r;
	r.line = line;
	r.text = std::move(text);
	r.termination = std::string(termination_name(p.reason));
	for (const auto &a: p.languages) {
		record_language l;
		l.label = std::string(model.dictionary().label_name(a.label));
		l.word_indices = a.words;
		for (auto t: a.words) l.words.push_back(p.words[t]);
		l.probability = a.probability;
		r.languages.push_back(std::move(l));
	}
	return r;
}

/* Compact single-line JSON; the stable wire form of a record */
inline auto serialize(const mine_record &r) -> std::string
{
	return nlohmann::json(r).dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

inline auto parse_mine_record(std::string_view line) -> mine_record
{
	return nlohmann::json::parse(line).get<mine_record>();
}

} // namespace masklid
