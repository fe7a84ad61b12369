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
#include "masklid/inference.hpp"
#include "masklid/masklid.hpp"
#include "masklid/utf8.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace masklid {

/* Sorted, duplicate-free list of label names */
using label_set = std::vector<std::string>;

inline auto make_label_set(std::vector<std::string> labels) -> label_set
{
	std::sort(labels.begin(), labels.end());
	labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
	return labels;
}

inline auto format_label_set(const label_set &labels) -> std::string
{
	std::string out;
	for (const auto &l: labels) {
		if (!out.empty()) out.push_back('+');
		out += l;
	}
	return out;
}

struct gold_sentence {
	std::string text;
	label_set gold;
	std::string id;

	auto is_cs() const -> bool
	{
		return gold.size() >= 2;
	}

	friend auto operator==(const gold_sentence &, const gold_sentence &) -> bool = default;
};

/*
 * Token tag -> language label. A tag mapped to "-" is ignored. Tags without
 * an entry pass through verbatim unless they are one of the usual
 * non-language tags (other, ne, ambiguous, mixed, fw, unk, ...).
 */
class tag_map {
public:
	tag_map() = default;

	void set(std::string tag, std::string label)
	{
		map_[std::move(tag)] = std::move(label);
	}

	static auto parse(std::istream &in) -> tag_map
	{
		tag_map m;
		std::string line;
		std::size_t lineno = 0;
		while (std::getline(in, line)) {
			lineno++;
			std::string_view view = line;
			if (auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
			view = detail::trim(view);
			if (view.empty()) continue;
			auto eq = view.find('=');
			if (eq == std::string_view::npos) throw record_error(lineno, "expected 'tag = label'");
			auto tag = detail::trim(view.substr(0, eq));
			auto label = detail::trim(view.substr(eq + 1));
			if (tag.empty() || label.empty()) throw record_error(lineno, "empty tag or label");
			m.set(std::string(tag), std::string(label));
		}
		return m;
	}

	static auto load(const std::filesystem::path &path) -> tag_map
	{
		std::ifstream in(path);
		if (!in) throw error(errc::io_error, "cannot open tag map '" + path.string() + "'");
		return parse(in);
	}

	auto label_for(std::string_view tag) const -> std::optional<std::string>
	{
		if (auto it = map_.find(std::string(tag)); it != map_.end()) {
			if (it->second == "-") return std::nullopt;
			return it->second;
		}
		if (is_non_language_tag(tag)) return std::nullopt;
		return std::string(tag);
	}

	static auto is_non_language_tag(std::string_view tag) -> bool
	{
		std::string lower;
		for (char c: tag) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
		static const std::set<std::string, std::less<>> ignored = {
			"other", "ne", "ambiguous", "mixed", "fw", "unk", "univ", "punct", "o", "und", "lang3",
		};
		return ignored.contains(lower);
	}

private:
	std::unordered_map<std::string, std::string> map_;
};

enum class dataset_format { conll, jsonl };

/* {"text": ..., "gold": [...], "id": ...} per line; blank lines skipped */
inline auto read_jsonl_dataset(std::istream &in) -> std::vector<gold_sentence>
{
	std::vector<gold_sentence> out;
	std::string line;
	std::size_t lineno = 0;
	while (std::getline(in, line)) {
		lineno++;
		if (detail::trim(line).empty()) continue;
		auto j = nlohmann::json::parse(line, nullptr, false);
		if (j.is_discarded() || !j.is_object()) throw record_error(lineno, "not a JSON object");
		if (!j.contains("text") || !j["text"].is_string()) throw record_error(lineno, "missing string field 'text'");
		if (!j.contains("gold") || !j["gold"].is_array() || j["gold"].empty()) {
			throw record_error(lineno, "missing non-empty array field 'gold'");
		}
		gold_sentence g;
		g.text = j["text"].get<std::string>();
		std::vector<std::string> labels;
		for (const auto &l: j["gold"]) {
			if (!l.is_string()) throw record_error(lineno, "gold labels must be strings");
			labels.push_back(l.get<std::string>());
		}
		g.gold = make_label_set(std::move(labels));
		if (j.contains("id")) {
			if (!j["id"].is_string()) throw record_error(lineno, "field 'id' must be a string");
			g.id = j["id"].get<std::string>();
		}
		else {
			g.id = std::to_string(lineno);
		}
		out.push_back(std::move(g));
	}
	return out;
}

/*
 * One "token<TAB>tag" per line (a single space also separates when there is
 * no tab); blank lines end a sentence; "# key = value" lines are metadata.
 * Sentences whose tokens carry no language tag are dropped.
 */
inline auto read_conll_dataset(std::istream &in, const tag_map &tags) -> std::vector<gold_sentence>
{
	std::vector<gold_sentence> out;
	std::vector<std::string> tokens;
	std::vector<std::string> labels;
	std::size_t sentence_start = 0;

	auto flush = [&]() {
		if (!tokens.empty() && !labels.empty()) {
			gold_sentence g;
			for (const auto &t: tokens) {
				if (!g.text.empty()) g.text.push_back(' ');
				g.text += t;
			}
			g.gold = make_label_set(labels);
			g.id = std::to_string(sentence_start);
			out.push_back(std::move(g));
		}
		tokens.clear();
		labels.clear();
	};

	std::string line;
	std::size_t lineno = 0;
	while (std::getline(in, line)) {
		lineno++;
		if (!line.empty() && line.back() == '\r') line.pop_back();
		auto view = detail::trim(line);
		if (view.empty()) {
			flush();
			continue;
		}
		if (view.starts_with("# ") && line.find('\t') == std::string::npos) continue;

		auto sep = line.rfind('\t');
		if (sep == std::string::npos) sep = line.rfind(' ');
		if (sep == std::string::npos) throw record_error(lineno, "expected 'token<TAB>tag'");
		auto token = detail::trim(std::string_view(line).substr(0, sep));
		auto tag = detail::trim(std::string_view(line).substr(sep + 1));
		if (token.empty() || tag.empty()) throw record_error(lineno, "empty token or tag");

		if (tokens.empty()) sentence_start = lineno;
		tokens.emplace_back(token);
		if (auto label = tags.label_for(tag)) labels.push_back(std::move(*label));
	}
	flush();
	return out;
}

inline auto ingest_token_labeled(const std::filesystem::path &path, dataset_format format,
								 const tag_map &tags = {}) -> std::vector<gold_sentence>
{
	std::ifstream in(path);
	if (!in) throw error(errc::io_error, "cannot open dataset '" + path.string() + "'");
	return format == dataset_format::jsonl ? read_jsonl_dataset(in) : read_conll_dataset(in, tags);
}

/*
 * Emoji code points removed during cleaning: the U+1F000..U+1FAFF planes
 * (pictographs, emoticons, transport, flags, skin tones), U+2600..U+27BF
 * (symbols and dingbats), U+2300..U+23FF (technical incl. watch/hourglass),
 * a few U+2B00 block stars and squares, U+3030, U+303D, U+3297, U+3299,
 * plus joiners: ZWJ U+200D, keycap U+20E3, variation selectors U+FE00..U+FE0F
 * and tag characters U+E0020..U+E007F.
 */
constexpr auto is_emoji_code_point(char32_t cp) -> bool
{
	return (cp >= 0x1F000 && cp <= 0x1FAFF) || (cp >= 0x2600 && cp <= 0x27BF) ||
		   (cp >= 0x2300 && cp <= 0x23FF) || (cp >= 0x2B05 && cp <= 0x2B07) || cp == 0x2B1B || cp == 0x2B1C ||
		   cp == 0x2B50 || cp == 0x2B55 || cp == 0x3030 || cp == 0x303D || cp == 0x3297 || cp == 0x3299 ||
		   cp == 0x200D || cp == 0x20E3 || (cp >= 0xFE00 && cp <= 0xFE0F) || (cp >= 0xE0020 && cp <= 0xE007F);
}

inline auto strip_emoji(std::string_view text) -> std::string
{
	std::string out;
	out.reserve(text.size());
	while (!text.empty()) {
		auto d = utf8::decode(text);
		if (!d) {
			out.push_back(text.front());
			text.remove_prefix(1);
			continue;
		}
		if (!is_emoji_code_point(d->cp)) out.append(text.substr(0, d->len));
		text.remove_prefix(d->len);
	}
	return out;
}

/* Drops "@user" tokens and emoji, then re-joins tokens with single spaces */
inline auto clean_text(std::string_view text) -> std::string
{
	auto stripped = strip_emoji(text);
	std::string out;
	for (auto token: tokenize(stripped)) {
		if (token.starts_with('@')) continue;
		if (!out.empty()) out.push_back(' ');
		out.append(token);
	}
	return out;
}

inline constexpr std::size_t min_single_bytes = 20;
inline constexpr std::size_t min_cs_bytes = 40;

/* Cleans every sentence and drops single-label ones of <= 20 bytes and CS ones of <= 40 */
inline auto preprocess(std::span<const gold_sentence> sentences) -> std::vector<gold_sentence>
{
	std::vector<gold_sentence> out;
	for (const auto &s: sentences) {
		gold_sentence g = s;
		g.text = clean_text(s.text);
		auto limit = g.is_cs() ? min_cs_bytes : min_single_bytes;
		if (g.text.size() <= limit) continue;
		out.push_back(std::move(g));
	}
	return out;
}

struct baseline_config {
	double threshold = 0.3;
	std::size_t max_labels = 2;

	void validate() const
	{
		if (!(threshold > 0.0 && threshold < 1.0)) throw error(errc::invalid_config, "threshold must be in (0, 1)");
		if (max_labels < 1) throw error(errc::invalid_config, "max_labels must be >= 1");
	}
};

/* Labels with probability strictly above the threshold, best first, capped at max_labels */
inline auto baseline_labels(const prediction &p, const baseline_config &cfg) -> std::vector<std::int32_t>
{
	std::vector<std::int32_t> out;
	for (const auto &lp: p.ranked) {
		if (lp.probability <= cfg.threshold || out.size() >= cfg.max_labels) break;
		out.push_back(lp.label);
	}
	return out;
}

inline auto baseline_predict(std::string_view sentence, const classifier_model &model, const label_subset &subset,
							 const baseline_config &cfg) -> label_set
{
	cfg.validate();
	auto p = predict(sentence, model, subset);
	std::vector<std::string> names;
	for (auto l: baseline_labels(p, cfg)) names.emplace_back(model.dictionary().label_name(l));
	return make_label_set(std::move(names));
}

inline auto masklid_labels(const sentence_prediction &p, const classifier_model &model) -> label_set
{
	std::vector<std::string> names;
	for (const auto &a: p.languages) names.emplace_back(model.dictionary().label_name(a.label));
	return make_label_set(std::move(names));
}

struct report_row {
	std::size_t sentences = 0;
	std::size_t exact = 0;
	std::size_t partial = 0;
	std::size_t false_positives = 0;

	friend auto operator==(const report_row &, const report_row &) -> bool = default;
};

/* One row per gold label set. CS rows (two or more labels) sort first. */
struct eval_report {
	struct row_order {
		auto operator()(const label_set &a, const label_set &b) const -> bool
		{
			bool acs = a.size() >= 2, bcs = b.size() >= 2;
			if (acs != bcs) return acs;
			return a < b;
		}
	};
	std::map<label_set, report_row, row_order> rows;

	friend auto operator==(const eval_report &, const eval_report &) -> bool = default;
};

inline auto score(std::span<const label_set> predictions, std::span<const gold_sentence> gold) -> eval_report
{
	if (predictions.size() != gold.size()) {
		throw error(errc::length_mismatch, std::to_string(predictions.size()) + " predictions for " +
											   std::to_string(gold.size()) + " sentences");
	}
	eval_report report;
	for (const auto &g: gold) report.rows[g.gold];

	for (std::size_t i = 0; i < gold.size(); i++) {
		const auto &g = gold[i].gold;
		auto pred = make_label_set(predictions[i]);
		auto &row = report.rows[g];
		row.sentences++;

		bool exact = pred == g;
		bool partial = exact;
		for (const auto &l: g) {
			partial = partial || std::binary_search(pred.begin(), pred.end(), l);
		}
		if (exact) row.exact++;
		if (partial) row.partial++;

		if (!exact && pred.size() >= 2) {
			if (auto it = report.rows.find(pred); it != report.rows.end()) it->second.false_positives++;
		}
	}
	return report;
}

inline void write_report_tsv(std::ostream &out, const eval_report &report)
{
	out << "gold\tkind\tS\tEM\tPM\tFP\n";
	for (const auto &[labels, row]: report.rows) {
		bool cs = labels.size() >= 2;
		out << format_label_set(labels) << '\t' << (cs ? "cs" : "single") << '\t' << row.sentences << '\t'
			<< row.exact << '\t' << row.partial << '\t';
		if (cs) {
			out << row.false_positives;
		}
		else {
			out << '-';
		}
		out << '\n';
	}
}

inline auto report_to_json(const eval_report &report) -> nlohmann::json
{
	auto rows = nlohmann::json::array();
	for (const auto &[labels, row]: report.rows) {
		bool cs = labels.size() >= 2;
		rows.push_back({
			{"gold", labels},
			{"kind", cs ? "cs" : "single"},
			{"S", row.sentences},
			{"EM", row.exact},
			{"PM", row.partial},
			{"FP", cs ? nlohmann::json(row.false_positives) : nlohmann::json(nullptr)},
		});
	}
	return {{"rows", rows}};
}

struct labeled_corpus {
	std::string label;
	std::vector<std::string> sentences;
};

namespace detail {

inline auto pick(std::mt19937_64 &rng, std::size_t n) -> std::size_t
{
	return static_cast<std::size_t>(rng() % n);
}

inline auto span_text(std::span<const std::string_view> words, std::size_t begin, std::size_t end) -> std::string
{
	std::string out;
	for (auto i = begin; i < end; i++) {
		if (!out.empty()) out.push_back(' ');
		out.append(words[i]);
	}
	return out;
}

} // namespace detail

/*
 * Builds `count` two-language sentences from a contiguous word span of a
 * sentence in `a` and one in `b`. Span shares are measured over the span
 * bytes (the joining space belongs to neither language): each side must be
 * at least `min_fraction` of their sum.
 */
inline auto synthesize_cs(const labeled_corpus &a, const labeled_corpus &b, double min_fraction, std::size_t count,
						  std::uint64_t seed, std::size_t max_attempts = 1000) -> std::vector<gold_sentence>
{
	if (!(min_fraction > 0.0 && min_fraction <= 0.5)) {
		throw error(errc::invalid_config, "min_fraction must be in (0, 0.5]");
	}
	if (a.sentences.empty() || b.sentences.empty()) {
		throw error(errc::insufficient_data, "both corpora must be non-empty");
	}
	std::mt19937_64 rng(seed);
	std::vector<gold_sentence> out;
	out.reserve(count);

	auto share_ok = [&](std::size_t x, std::size_t y) {
		return static_cast<double>(std::min(x, y)) >= min_fraction * static_cast<double>(x + y);
	};

	for (std::size_t n = 0; n < count; n++) {
		bool done = false;
		for (std::size_t attempt = 0; attempt < max_attempts && !done; attempt++) {
			const auto &sa = a.sentences[detail::pick(rng, a.sentences.size())];
			const auto &sb = b.sentences[detail::pick(rng, b.sentences.size())];
			auto wa = tokenize(sa);
			auto wb = tokenize(sb);
			if (wa.empty() || wb.empty()) continue;

			auto a_begin = detail::pick(rng, wa.size());
			auto a_end = a_begin + 1 + detail::pick(rng, wa.size() - a_begin);
			auto text_a = detail::span_text(wa, a_begin, a_end);

			std::vector<std::pair<std::size_t, std::size_t>> candidates;
			for (std::size_t i = 0; i < wb.size(); i++) {
				std::size_t bytes = 0;
				for (std::size_t j = i; j < wb.size(); j++) {
					bytes += wb[j].size() + (j > i ? 1 : 0);
					if (share_ok(text_a.size(), bytes)) candidates.emplace_back(i, j + 1);
				}
			}
			if (candidates.empty()) continue;
			auto [b_begin, b_end] = candidates[detail::pick(rng, candidates.size())];
			auto text_b = detail::span_text(wb, b_begin, b_end);

			gold_sentence g;
			g.text = (rng() & 1) ? text_a + " " + text_b : text_b + " " + text_a;
			g.gold = make_label_set({a.label, b.label});
			g.id = "synth-" + std::to_string(n);
			out.push_back(std::move(g));
			done = true;
		}
		if (!done) {
			throw error(errc::insufficient_data, "no span pair satisfies min_fraction after " +
													 std::to_string(max_attempts) + " attempts");
		}
	}
	return out;
}

} // namespace masklid
