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

#include "masklid/error.hpp"
#include "masklid/model_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace masklid {

constexpr auto is_token_space(char c) -> bool
{
	return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f' || c == '\0';
}

/* Splits on ASCII whitespace; no normalization */
inline auto tokenize(std::string_view text) -> std::vector<std::string_view>
{
	std::vector<std::string_view> tokens;
	std::size_t i = 0;
	while (i < text.size()) {
		while (i < text.size() && is_token_space(text[i])) i++;
		auto start = i;
		while (i < text.size() && !is_token_space(text[i])) i++;
		if (i > start) tokens.push_back(text.substr(start, i - start));
	}
	return tokens;
}

/* Sorted, duplicate-free set of label indices the posterior is computed over */
class label_subset {
public:
	label_subset(std::vector<std::int32_t> indices, std::int32_t nlabels)
		: indices_(std::move(indices))
	{
		std::sort(indices_.begin(), indices_.end());
		indices_.erase(std::unique(indices_.begin(), indices_.end()), indices_.end());
		if (indices_.empty()) {
			throw error(errc::no_labels_matched, "label subset is empty");
		}
		if (indices_.front() < 0 || indices_.back() >= nlabels) {
			throw error(errc::invalid_config, "label index out of range");
		}
	}

	static auto all(const classifier_model &model) -> label_subset
	{
		std::vector<std::int32_t> idx(static_cast<std::size_t>(model.nlabels()));
		for (std::size_t i = 0; i < idx.size(); i++) idx[i] = static_cast<std::int32_t>(i);
		return label_subset(std::move(idx), model.nlabels());
	}

	auto indices() const -> std::span<const std::int32_t>
	{
		return indices_;
	}
	auto size() const -> std::size_t
	{
		return indices_.size();
	}
	auto operator[](std::size_t pos) const -> std::int32_t
	{
		return indices_[pos];
	}

	/* Row of `label` within this subset */
	auto position(std::int32_t label) const -> std::optional<std::size_t>
	{
		auto it = std::lower_bound(indices_.begin(), indices_.end(), label);
		if (it == indices_.end() || *it != label) return std::nullopt;
		return static_cast<std::size_t>(it - indices_.begin());
	}
	auto contains(std::int32_t label) const -> bool
	{
		return position(label).has_value();
	}

	friend auto operator==(const label_subset &, const label_subset &) -> bool = default;

private:
	std::vector<std::int32_t> indices_;
};

struct label_restriction {
	label_subset subset;
	std::vector<std::string> unmatched;
};

/* Names may be given with or without the "__label__" prefix */
inline auto restrict_labels(const classifier_model &model, std::span<const std::string> names) -> label_restriction
{
	const auto &dict = model.dictionary();
	std::vector<std::int32_t> found;
	std::vector<std::string> unmatched;
	for (const auto &name: names) {
		std::int32_t hit = -1;
		for (std::int32_t i = 0; i < dict.nlabels(); i++) {
			if (dict.label(i) == name || dict.label_name(i) == name) {
				hit = i;
				break;
			}
		}
		if (hit >= 0) {
			found.push_back(hit);
		}
		else {
			unmatched.push_back(name);
		}
	}
	if (found.empty()) {
		throw error(errc::no_labels_matched, "none of the " + std::to_string(names.size()) +
												 " requested labels exist in the model");
	}
	return {label_subset(std::move(found), model.nlabels()), std::move(unmatched)};
}

/* One label per line; '#' starts a comment; blank lines ignored */
inline auto read_label_file(const std::filesystem::path &path) -> std::vector<std::string>
{
	std::ifstream in(path);
	if (!in) throw error(errc::io_error, "cannot open label file '" + path.string() + "'");
	std::vector<std::string> names;
	std::string line;
	while (std::getline(in, line)) {
		auto hash = line.find('#');
		if (hash != std::string::npos) line.erase(hash);
		auto tokens = tokenize(line);
		for (auto t: tokens) names.emplace_back(t);
	}
	return names;
}

struct sentence_features {
	std::vector<std::string> words;
	std::vector<std::vector<std::int32_t>> word_ids;
	/* end-of-sentence token and word n-grams; these feed the posterior only */
	std::vector<std::int32_t> extra_ids;

	auto total() const -> std::size_t
	{
		auto n = extra_ids.size();
		for (const auto &ids: word_ids) n += ids.size();
		return n;
	}
};

/*
 * Extracts features in the same order the reference predictor does: per-word
 * features, then the implicit end-of-sentence token, then word n-grams.
 * Tokens that are label strings contribute no features.
 */
inline auto featurize(std::string_view sentence, const classifier_model &model) -> sentence_features
{
	const auto &hp = model.hyperparams();
	const auto &dict = model.dictionary();
	auto tokens = tokenize(sentence);
	if (tokens.empty()) throw error(errc::empty_input, "sentence is empty");

	sentence_features f;
	f.words.reserve(tokens.size());
	f.word_ids.reserve(tokens.size());
	std::vector<std::uint32_t> hashes;
	hashes.reserve(tokens.size() + 1);

	for (auto token: tokens) {
		f.words.emplace_back(token);
		auto id = dict.find(token);
		bool is_label = id >= dict.nwords() || (id < 0 && token.starts_with(label_prefix));
		if (is_label) {
			f.word_ids.emplace_back();
			continue;
		}
		f.word_ids.push_back(subword_ids(token, hp, dict));
		hashes.push_back(hash_token(token));
	}

	if (auto eos = dict.word_id(eos_token); eos >= 0) f.extra_ids.push_back(eos);
	hashes.push_back(hash_token(eos_token));
	auto ngrams = word_ngram_ids(hashes, hp, dict);
	f.extra_ids.insert(f.extra_ids.end(), ngrams.begin(), ngrams.end());
	return f;
}

namespace detail {

inline void add_row(std::span<float> acc, std::span<const float> row)
{
	for (std::size_t i = 0; i < acc.size(); i++) acc[i] += row[i];
}

inline auto dot(std::span<const float> a, std::span<const float> b) -> float
{
	float d = 0.0f;
	for (std::size_t i = 0; i < a.size(); i++) d += a[i] * b[i];
	return d;
}

} // namespace detail

/* Mean of all feature embeddings of the sentence */
inline auto sentence_vector(const sentence_features &features, const classifier_model &model) -> std::vector<float>
{
	auto total = features.total();
	if (total == 0) throw error(errc::empty_feature_set, "sentence has no known features");
	std::vector<float> hidden(static_cast<std::size_t>(model.dim()), 0.0f);
	for (const auto &ids: features.word_ids) {
		for (auto id: ids) detail::add_row(hidden, model.input().row(id));
	}
	for (auto id: features.extra_ids) detail::add_row(hidden, model.input().row(id));
	auto inv = 1.0f / static_cast<float>(total);
	for (auto &v: hidden) v *= inv;
	return hidden;
}

struct label_probability {
	std::int32_t label;
	double probability;
};

struct prediction {
	/* descending probability, ties by ascending label index */
	std::vector<label_probability> ranked;

	auto top() const -> const label_probability &
	{
		return ranked.front();
	}
	auto probability_of(std::int32_t label) const -> double
	{
		for (const auto &lp: ranked) {
			if (lp.label == label) return lp.probability;
		}
		return 0.0;
	}
};

/* Raw logits b_c . h for every label of the subset, in subset order */
inline auto subset_logits(std::span<const float> hidden, const classifier_model &model, const label_subset &subset)
	-> std::vector<float>
{
	std::vector<float> logits(subset.size());
	for (std::size_t i = 0; i < subset.size(); i++) {
		logits[i] = detail::dot(model.output().row(subset[i]), hidden);
	}
	return logits;
}

/* Softmax restricted to the subset */
inline auto predict_hidden(std::span<const float> hidden, const classifier_model &model, const label_subset &subset)
	-> prediction
{
	auto logits = subset_logits(hidden, model, subset);
	double max = *std::max_element(logits.begin(), logits.end());
	std::vector<double> e(logits.size());
	double sum = 0.0;
	for (std::size_t i = 0; i < logits.size(); i++) {
		e[i] = std::exp(static_cast<double>(logits[i]) - max);
		sum += e[i];
	}
	prediction p;
	p.ranked.reserve(logits.size());
	for (std::size_t i = 0; i < logits.size(); i++) {
		p.ranked.push_back({subset[i], e[i] / sum});
	}
	std::stable_sort(p.ranked.begin(), p.ranked.end(),
					 [](const label_probability &a, const label_probability &b) {
						 return a.probability > b.probability;
					 });
	return p;
}

inline auto predict(const sentence_features &features, const classifier_model &model, const label_subset &subset)
	-> prediction
{
	return predict_hidden(sentence_vector(features, model), model, subset);
}

inline auto predict(std::string_view sentence, const classifier_model &model, const label_subset &subset)
	-> prediction
{
	return predict(featurize(sentence, model), model, subset);
}

struct word_column {
	std::string word;
	std::size_t bytes = 0;
	/* sum, not mean, of the word's own feature embeddings */
	std::vector<float> embedding;
};

/* N x W matrix of per-label, per-word logits over the active subset */
class word_logit_matrix {
public:
	word_logit_matrix(label_subset labels, std::vector<word_column> words, std::vector<float> values)
		: labels_(std::move(labels)), words_(std::move(words)), values_(std::move(values))
	{
	}

	auto labels() const -> const label_subset &
	{
		return labels_;
	}
	auto words() const -> const std::vector<word_column> &
	{
		return words_;
	}
	auto rows() const -> std::size_t
	{
		return labels_.size();
	}
	auto cols() const -> std::size_t
	{
		return words_.size();
	}
	auto value(std::size_t row, std::size_t col) const -> float
	{
		return values_[row * words_.size() + col];
	}

private:
	label_subset labels_;
	std::vector<word_column> words_;
	std::vector<float> values_;
};

inline auto word_logits(const sentence_features &features, const classifier_model &model,
								 const label_subset &subset) -> word_logit_matrix
{
	if (features.words.empty()) throw error(errc::empty_input, "sentence has no words");
	auto dim = static_cast<std::size_t>(model.dim());
	auto ncols = features.words.size();

	std::vector<word_column> cols;
	cols.reserve(ncols);
	for (std::size_t t = 0; t < ncols; t++) {
		word_column col{features.words[t], features.words[t].size(), std::vector<float>(dim, 0.0f)};
		for (auto id: features.word_ids[t]) detail::add_row(col.embedding, model.input().row(id));
		cols.push_back(std::move(col));
	}

	std::vector<float> values(subset.size() * ncols);
	for (std::size_t r = 0; r < subset.size(); r++) {
		auto b = model.output().row(subset[r]);
		for (std::size_t t = 0; t < ncols; t++) {
			values[r * ncols + t] = detail::dot(b, cols[t].embedding);
		}
	}
	return word_logit_matrix(subset, std::move(cols), std::move(values));
}

} // namespace masklid
