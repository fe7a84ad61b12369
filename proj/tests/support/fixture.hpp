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

/* Test-only writer for the fastText binary format plus small hand-built models */

#include "masklid/model_io.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <unistd.h>
#include <vector>

namespace masklid::testing {

struct writer_options {
	std::int32_t magic = model_file_magic;
	std::int32_t version = model_file_version;
	bool quantized_input = false;
	bool quantized_output = false;
};

template<typename T>
void put(std::ostream &out, T value)
{
	out.write(reinterpret_cast<const char *>(&value), sizeof(T));
}

inline void write_matrix(std::ostream &out, const dense_matrix &m, bool quant)
{
	put<std::uint8_t>(out, quant ? 1 : 0);
	put<std::int64_t>(out, m.rows());
	put<std::int64_t>(out, m.cols());
	out.write(reinterpret_cast<const char *>(m.data().data()),
			  static_cast<std::streamsize>(m.data().size() * sizeof(float)));
}

inline void write_model(const std::filesystem::path &path, const classifier_model &model, writer_options opts = {})
{
	std::ofstream out(path, std::ios::binary | std::ios::trunc);
	const auto &hp = model.hyperparams();
	const auto &dict = model.dictionary();
	put(out, opts.magic);
	put(out, opts.version);
	for (auto v: {hp.dim, hp.ws, hp.epoch, hp.min_count, hp.neg, hp.word_ngrams, hp.loss, hp.model, hp.bucket,
				  hp.minn, hp.maxn, hp.lr_update_rate}) {
		put<std::int32_t>(out, v);
	}
	put<double>(out, hp.t);

	put<std::int32_t>(out, dict.nwords() + dict.nlabels());
	put<std::int32_t>(out, dict.nwords());
	put<std::int32_t>(out, dict.nlabels());
	put<std::int64_t>(out, dict.ntokens());
	put<std::int64_t>(out, dict.prune_size());
	for (const auto &e: dict.entries()) {
		out.write(e.word.data(), static_cast<std::streamsize>(e.word.size()));
		put<char>(out, '\0');
		put<std::int64_t>(out, e.count);
		put<std::int8_t>(out, static_cast<std::int8_t>(e.type));
	}
	for (auto [from, to]: dict.prune_pairs()) {
		put<std::int32_t>(out, from);
		put<std::int32_t>(out, to);
	}
	write_matrix(out, model.input(), opts.quantized_input);
	write_matrix(out, model.output(), opts.quantized_output);
}

inline auto make_dictionary(const std::vector<std::string> &words, const std::vector<std::string> &labels)
	-> feature_dictionary
{
	std::vector<dict_entry> entries;
	std::int64_t count = 100;
	for (const auto &w: words) entries.push_back({w, count--, entry_type::word});
	for (const auto &l: labels) entries.push_back({l, 10, entry_type::label});
	return feature_dictionary(std::move(entries), static_cast<std::int32_t>(words.size()),
							  static_cast<std::int32_t>(labels.size()), 1000);
}

/* Values uniform in [-1, 1) from a fixed seed, rounded to multiples of 1/64 so
 * hand arithmetic on them stays exact in float32 */
inline auto seeded_values(std::size_t n, std::uint64_t seed) -> std::vector<float>
{
	std::mt19937_64 rng(seed);
	std::vector<float> v(n);
	for (auto &x: v) x = static_cast<float>(static_cast<std::int64_t>(rng() % 128) - 64) / 64.0f;
	return v;
}

struct fixture_params {
	std::vector<std::string> words;
	std::vector<std::string> labels;
	std::int32_t dim = 4;
	std::int32_t bucket = 16;
	std::int32_t minn = 0;
	std::int32_t maxn = 0;
	std::int32_t word_ngrams = 1;
	std::uint64_t seed = 1;
};

inline auto make_model(const fixture_params &p) -> classifier_model
{
	model_hyperparams hp;
	hp.dim = p.dim;
	hp.bucket = p.bucket;
	hp.minn = p.minn;
	hp.maxn = p.maxn;
	hp.word_ngrams = p.word_ngrams;
	auto dict = make_dictionary(p.words, p.labels);
	auto rows = static_cast<std::int64_t>(p.words.size()) + p.bucket;
	dense_matrix input(rows, p.dim, seeded_values(static_cast<std::size_t>(rows * p.dim), p.seed));
	dense_matrix output(static_cast<std::int64_t>(p.labels.size()), p.dim,
						seeded_values(p.labels.size() * static_cast<std::size_t>(p.dim), p.seed + 1));
	return classifier_model(hp, std::move(dict), std::move(input), std::move(output));
}

/* Model with explicitly given matrices */
inline auto make_model(const fixture_params &p, std::vector<float> input, std::vector<float> output)
	-> classifier_model
{
	model_hyperparams hp;
	hp.dim = p.dim;
	hp.bucket = p.bucket;
	hp.minn = p.minn;
	hp.maxn = p.maxn;
	hp.word_ngrams = p.word_ngrams;
	auto rows = static_cast<std::int64_t>(p.words.size()) + p.bucket;
	return classifier_model(hp, make_dictionary(p.words, p.labels), dense_matrix(rows, p.dim, std::move(input)),
							dense_matrix(static_cast<std::int64_t>(p.labels.size()), p.dim, std::move(output)));
}

/* The three-label, dim=4 model the property and acceptance suites run on.
 * Character 2..3-grams, word bigrams and an in-vocabulary "</s>" exercise every
 * feature path. */
inline auto three_label_params() -> fixture_params
{
	fixture_params p;
	p.words = {"</s>", "alpha", "beta", "gamma", "delta", "kedi", "köpek", "straße", "über", "ve", "und", "the"};
	p.labels = {"__label__aaa_Latn", "__label__bbb_Latn", "__label__ccc_Latn"};
	p.dim = 4;
	p.bucket = 32;
	p.minn = 2;
	p.maxn = 3;
	p.word_ngrams = 2;
	p.seed = 42;
	return p;
}

/* Unique scratch file, removed on destruction */
class temp_file {
public:
	explicit temp_file(const std::string &stem)
	{
		static int counter = 0;
		path_ = std::filesystem::temp_directory_path() /
				(stem + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
	}
	~temp_file()
	{
		std::error_code ec;
		std::filesystem::remove(path_, ec);
	}
	temp_file(const temp_file &) = delete;
	auto operator=(const temp_file &) -> temp_file & = delete;

	auto path() const -> const std::filesystem::path &
	{
		return path_;
	}

private:
	std::filesystem::path path_;
};

inline auto data_dir() -> std::filesystem::path
{
	return MASKLID_TEST_DATA_DIR;
}

} // namespace masklid::testing
