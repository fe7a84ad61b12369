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

/*
 * Code-switching detection by iterative masking.
 *
 * The per-word logit matrix of the original sentence is computed once. Each
 * round predicts the dominant label of the still-unmasked residual, assigns
 * to it every unmasked word where that label ranks in the column's top beta,
 * and masks the words where it ranks in the top alpha. A label is emitted
 * only if its assigned words are long enough (tau bytes) and are themselves
 * predicted as that label with high confidence.
 */

#include "masklid/error.hpp"
#include "masklid/inference.hpp"
#include "masklid/model_io.hpp"

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace masklid {

struct masklid_config {
	std::int32_t alpha = 3;
	std::int32_t beta = 15;
	std::size_t tau = 20;
	std::int32_t lambda = 2;
	double feature_set_confidence = 0.9;
	std::int32_t beta_retry_factor = 2;
	/* no threshold on the dominant-label prediction unless set */
	std::optional<double> step1_confidence;

	void validate() const
	{
		if (alpha < 1) throw error(errc::invalid_config, "alpha must be >= 1");
		if (beta <= alpha) throw error(errc::invalid_config, "beta must be greater than alpha");
		if (lambda < 1) throw error(errc::invalid_config, "lambda must be >= 1");
		if (!(feature_set_confidence > 0.0 && feature_set_confidence <= 1.0)) {
			throw error(errc::invalid_config, "feature_set_confidence must be in (0, 1]");
		}
		if (beta_retry_factor < 1) throw error(errc::invalid_config, "beta_retry_factor must be >= 1");
		if (step1_confidence && !(*step1_confidence >= 0.0 && *step1_confidence <= 1.0)) {
			throw error(errc::invalid_config, "step1_confidence must be in [0, 1]");
		}
	}

	friend auto operator==(const masklid_config &, const masklid_config &) -> bool = default;
};

namespace detail {

template<typename T>
auto parse_number(std::string_view key, std::string_view text) -> T
{
	T value{};
	auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
	if (ec != std::errc{} || ptr != text.data() + text.size()) {
		throw error(errc::invalid_config, "bad value '" + std::string(text) + "' for " + std::string(key));
	}
	return value;
}

inline auto trim(std::string_view s) -> std::string_view
{
	while (!s.empty() && is_token_space(s.front())) s.remove_prefix(1);
	while (!s.empty() && is_token_space(s.back())) s.remove_suffix(1);
	return s;
}

} // namespace detail

/* Applies one `key = value` setting; unknown keys are an error */
inline void set_config_value(masklid_config &cfg, std::string_view key, std::string_view value)
{
	using detail::parse_number;
	if (key == "alpha") {
		cfg.alpha = parse_number<std::int32_t>(key, value);
	}
	else if (key == "beta") {
		cfg.beta = parse_number<std::int32_t>(key, value);
	}
	else if (key == "tau") {
		auto tau = parse_number<std::int64_t>(key, value);
		if (tau < 0) throw error(errc::invalid_config, "tau must be >= 0");
		cfg.tau = static_cast<std::size_t>(tau);
	}
	else if (key == "lambda") {
		cfg.lambda = parse_number<std::int32_t>(key, value);
	}
	else if (key == "feature_set_confidence") {
		cfg.feature_set_confidence = parse_number<double>(key, value);
	}
	else if (key == "beta_retry_factor") {
		cfg.beta_retry_factor = parse_number<std::int32_t>(key, value);
	}
	else if (key == "step1_confidence") {
		cfg.step1_confidence = parse_number<double>(key, value);
	}
	else {
		throw error(errc::invalid_config, "unknown setting '" + std::string(key) + "'");
	}
}

/* `key = value` lines, '#' comments; values not mentioned keep `base` */
inline auto parse_config(std::istream &in, masklid_config base = {}) -> masklid_config
{
	std::string line;
	std::size_t lineno = 0;
	while (std::getline(in, line)) {
		lineno++;
		std::string_view view = line;
		if (auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
		view = detail::trim(view);
		if (view.empty()) continue;
		auto eq = view.find('=');
		if (eq == std::string_view::npos) {
			throw error(errc::invalid_config, "config line " + std::to_string(lineno) + ": expected key = value");
		}
		set_config_value(base, detail::trim(view.substr(0, eq)), detail::trim(view.substr(eq + 1)));
	}
	return base;
}

inline auto load_config(const std::filesystem::path &path, masklid_config base = {}) -> masklid_config
{
	std::ifstream in(path);
	if (!in) throw error(errc::invalid_config, "cannot open config '" + path.string() + "'");
	return parse_config(in, base);
}

enum class termination {
	lambda_reached,
	residual_too_short,
	repeat_language,
	low_confidence_feature_set,
	empty_residual,
	low_confidence_residual,
};

constexpr auto termination_name(termination t) -> std::string_view
{
	switch (t) {
	case termination::lambda_reached: return "lambda_reached";
	case termination::residual_too_short: return "residual_too_short";
	case termination::repeat_language: return "repeat_language";
	case termination::low_confidence_feature_set: return "low_confidence_feature_set";
	case termination::empty_residual: return "empty_residual";
	case termination::low_confidence_residual: return "low_confidence_residual";
	}
	return "unknown";
}

inline auto termination_from_name(std::string_view name) -> std::optional<termination>
{
	for (auto t: {termination::lambda_reached, termination::residual_too_short, termination::repeat_language,
				  termination::low_confidence_feature_set, termination::empty_residual,
				  termination::low_confidence_residual}) {
		if (termination_name(t) == name) return t;
	}
	return std::nullopt;
}

/* Words of the original sentence and which of them are masked so far */
class mask_state {
public:
	explicit mask_state(std::vector<std::string> words)
		: words_(std::move(words)), masked_(words_.size(), false)
	{
	}

	auto words() const -> const std::vector<std::string> &
	{
		return words_;
	}
	auto is_masked(std::size_t t) const -> bool
	{
		return masked_[t];
	}
	/* masks never get lifted */
	void mask(std::size_t t)
	{
		masked_[t] = true;
	}

	auto unmasked() const -> std::vector<std::size_t>
	{
		std::vector<std::size_t> out;
		for (std::size_t t = 0; t < words_.size(); t++) {
			if (!masked_[t]) out.push_back(t);
		}
		return out;
	}

	/* Unmasked words joined by single spaces */
	auto residual() const -> std::string
	{
		return join(unmasked());
	}

	auto join(std::span<const std::size_t> indices) const -> std::string
	{
		std::string out;
		for (auto t: indices) {
			if (!out.empty()) out.push_back(' ');
			out += words_[t];
		}
		return out;
	}

	auto joined_bytes(std::span<const std::size_t> indices) const -> std::size_t
	{
		std::size_t n = 0;
		for (auto t: indices) n += words_[t].size();
		return indices.empty() ? 0 : n + indices.size() - 1;
	}

private:
	std::vector<std::string> words_;
	std::vector<bool> masked_;
};

inline auto residual_byte_len(const mask_state &state) -> std::size_t
{
	auto idx = state.unmasked();
	return state.joined_bytes(idx);
}

/*
 * True iff the entry of `label_row` ranks among the k largest of column `col`,
 * ordering by value descending and then by label index ascending.
 */
inline auto top_rank_member(const word_logit_matrix &v, std::size_t label_row, std::size_t col, std::int64_t k) -> bool
{
	auto mine = v.value(label_row, col);
	std::int64_t ahead = 0;
	for (std::size_t r = 0; r < v.rows() && ahead < k; r++) {
		auto other = v.value(r, col);
		/* rows follow ascending label index, so r < label_row breaks ties */
		if (other > mine || (other == mine && r < label_row)) ahead++;
	}
	return ahead < k;
}

struct feature_set_verdict {
	bool accepted = false;
	double probability = 0.0;
	std::size_t bytes = 0;
};

/* Accept iff the words span >= tau bytes and are predicted as `label` with enough confidence */
inline auto validate_feature_set(std::span<const std::string> words, std::int32_t label,
								 const classifier_model &model, const label_subset &subset,
								 const masklid_config &cfg) -> feature_set_verdict
{
	feature_set_verdict v;
	std::string text;
	for (const auto &w: words) {
		if (!text.empty()) text.push_back(' ');
		text += w;
	}
	v.bytes = text.size();
	if (v.bytes == 0 || v.bytes < cfg.tau) return v;

	auto features = featurize(text, model);
	if (features.total() == 0) return v;
	v.probability = predict(features, model, subset).probability_of(label);
	v.accepted = v.probability >= cfg.feature_set_confidence;
	return v;
}

struct language_assignment {
	std::int32_t label = -1;
	std::vector<std::size_t> words;
	std::size_t bytes = 0;
	double probability = 0.0;
	std::int32_t iteration = 0;
};

/* What one round did, kept for explanation and diagnostics */
struct round_trace {
	std::int32_t iteration = 0;
	std::int32_t label = -1;
	double label_probability = 0.0;
	std::vector<std::size_t> assigned;
	std::vector<std::size_t> masked;
	bool beta_retried = false;
	bool accepted = false;
	double feature_set_probability = 0.0;
	std::size_t residual_bytes = 0;
};

struct sentence_prediction {
	std::vector<std::string> words;
	std::vector<language_assignment> languages;
	termination reason = termination::lambda_reached;
	std::vector<round_trace> rounds;
};

namespace detail {

inline auto top_k_columns(const word_logit_matrix &v, std::size_t label_row, std::span<const std::size_t> cols,
						  std::int64_t k) -> std::vector<std::size_t>
{
	std::vector<std::size_t> out;
	for (auto t: cols) {
		if (top_rank_member(v, label_row, t, k)) out.push_back(t);
	}
	return out;
}

} // namespace detail

inline auto masklid(std::string_view sentence, const classifier_model &model, const label_subset &subset,
					const masklid_config &cfg) -> sentence_prediction
{
	cfg.validate();
	auto features = featurize(sentence, model);
	auto v = word_logits(features, model, subset);

	sentence_prediction out;
	out.words = features.words;
	mask_state state(features.words);

	for (std::int32_t iteration = 1;; iteration++) {
		auto residual = state.residual();
		if (residual.empty()) {
			out.reason = termination::empty_residual;
			break;
		}
		auto residual_features = featurize(residual, model);
		if (residual_features.total() == 0) {
			if (iteration == 1) throw error(errc::empty_feature_set, "sentence has no known features");
			out.reason = termination::low_confidence_residual;
			break;
		}
		auto dominant = predict(residual_features, model, subset).top();

		round_trace round;
		round.iteration = iteration;
		round.label = dominant.label;
		round.label_probability = dominant.probability;

		if (cfg.step1_confidence && dominant.probability < *cfg.step1_confidence) {
			out.rounds.push_back(std::move(round));
			out.reason = termination::low_confidence_residual;
			break;
		}
		bool repeated = false;
		for (const auto &a: out.languages) repeated = repeated || a.label == dominant.label;
		if (repeated) {
			out.rounds.push_back(std::move(round));
			out.reason = termination::repeat_language;
			break;
		}

		auto row = *subset.position(dominant.label);
		auto unmasked = state.unmasked();
		round.assigned = detail::top_k_columns(v, row, unmasked, cfg.beta);
		round.masked = detail::top_k_columns(v, row, unmasked, cfg.alpha);

		/* a wider beta only grows the candidate feature set; masking stays on alpha */
		if (state.joined_bytes(round.assigned) < cfg.tau) {
			round.beta_retried = true;
			round.assigned = detail::top_k_columns(
				v, row, unmasked, static_cast<std::int64_t>(cfg.beta) * cfg.beta_retry_factor);
		}

		std::vector<std::string> assigned_words;
		for (auto t: round.assigned) assigned_words.push_back(state.words()[t]);
		auto verdict = validate_feature_set(assigned_words, dominant.label, model, subset, cfg);
		round.accepted = verdict.accepted;
		round.feature_set_probability = verdict.probability;
		if (verdict.accepted) {
			out.languages.push_back({dominant.label, round.assigned, verdict.bytes, verdict.probability, iteration});
		}

		for (auto t: round.masked) state.mask(t);
		round.residual_bytes = residual_byte_len(state);
		bool masked_nothing = round.masked.empty();
		auto residual_bytes = round.residual_bytes;
		out.rounds.push_back(std::move(round));

		if (masked_nothing) {
			/* the next round would see the same residual and the same label */
			out.reason = verdict.accepted ? termination::repeat_language : termination::low_confidence_feature_set;
			break;
		}
		if (residual_bytes <= cfg.tau) {
			out.reason = (cfg.tau == 0) ? termination::empty_residual : termination::residual_too_short;
			break;
		}
		if (iteration >= cfg.lambda) {
			out.reason = termination::lambda_reached;
			break;
		}
	}
	return out;
}

} // namespace masklid
