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
 * Reader for fastText supervised models (binary format version 12).
 *
 * Only dense, unquantized models are accepted. Feature extraction mirrors
 * the reference implementation bit for bit: signed-byte FNV-1a hashing,
 * character n-grams over "<word>" that never split a UTF-8 sequence, and
 * word n-gram hashes combined with 64-bit wrapping arithmetic.
 */

#include "masklid/error.hpp"
#include "masklid/utf8.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

static_assert(std::endian::native == std::endian::little,
			  "the model reader assumes a little-endian host");

namespace masklid {

inline constexpr std::int32_t model_file_magic = 793712314;
inline constexpr std::int32_t model_file_version = 12;
inline constexpr std::string_view eos_token = "</s>";
inline constexpr std::string_view label_prefix = "__label__";

enum class loss_kind { softmax, other };
enum class model_kind { supervised, other };
enum class entry_type : std::int8_t { word = 0, label = 1 };

/* Raw enum values used by the reference writer */
inline constexpr std::int32_t raw_model_supervised = 3;
inline constexpr std::int32_t raw_loss_softmax = 3;

struct model_hyperparams {
	std::int32_t dim = 0;
	std::int32_t ws = 5;
	std::int32_t epoch = 5;
	std::int32_t min_count = 1;
	std::int32_t neg = 5;
	std::int32_t word_ngrams = 1;
	std::int32_t loss = raw_loss_softmax;
	std::int32_t model = raw_model_supervised;
	std::int32_t bucket = 0;
	std::int32_t minn = 0;
	std::int32_t maxn = 0;
	std::int32_t lr_update_rate = 100;
	double t = 1e-4;

	auto loss_type() const -> loss_kind
	{
		return loss == raw_loss_softmax ? loss_kind::softmax : loss_kind::other;
	}
	auto model_type() const -> model_kind
	{
		return model == raw_model_supervised ? model_kind::supervised : model_kind::other;
	}

	friend auto operator==(const model_hyperparams &, const model_hyperparams &) -> bool = default;
};

struct dict_entry {
	std::string word;
	std::int64_t count = 0;
	entry_type type = entry_type::word;

	friend auto operator==(const dict_entry &, const dict_entry &) -> bool = default;
};

/* Word/label vocabulary. Words occupy ids [0, nwords); hashed features occupy
 * [nwords, nwords + bucket) unless a prune map remaps them. */
class feature_dictionary {
public:
	feature_dictionary() = default;

	feature_dictionary(std::vector<dict_entry> entries, std::int32_t nwords, std::int32_t nlabels,
					   std::int64_t ntokens, std::int64_t prune_size = -1,
					   std::vector<std::pair<std::int32_t, std::int32_t>> prune_pairs = {})
		: entries_(std::move(entries)), nwords_(nwords), nlabels_(nlabels), ntokens_(ntokens),
		  prune_size_(prune_size), prune_pairs_(std::move(prune_pairs))
	{
		if (nwords_ < 0 || nlabels_ < 0 ||
			static_cast<std::size_t>(nwords_) + static_cast<std::size_t>(nlabels_) != entries_.size()) {
			throw error(errc::invalid_model, "dictionary size does not match nwords + nlabels");
		}
		if (prune_size_ >= 0 && static_cast<std::size_t>(prune_size_) != prune_pairs_.size()) {
			throw error(errc::invalid_model, "prune map size does not match its header");
		}
		ids_.reserve(entries_.size());
		for (std::size_t i = 0; i < entries_.size(); i++) {
			auto expected = i < static_cast<std::size_t>(nwords_) ? entry_type::word : entry_type::label;
			if (entries_[i].type != expected) {
				throw error(errc::invalid_model, "dictionary entries must list words before labels");
			}
			if (!ids_.emplace(entries_[i].word, static_cast<std::int32_t>(i)).second &&
				expected == entry_type::label) {
				throw error(errc::invalid_model, "duplicate label '" + entries_[i].word + "'");
			}
		}
		for (auto [from, to]: prune_pairs_) {
			prune_map_.emplace(from, to);
		}
	}

	auto nwords() const -> std::int32_t
	{
		return nwords_;
	}
	auto nlabels() const -> std::int32_t
	{
		return nlabels_;
	}
	auto ntokens() const -> std::int64_t
	{
		return ntokens_;
	}
	auto entries() const -> const std::vector<dict_entry> &
	{
		return entries_;
	}
	auto prune_size() const -> std::int64_t
	{
		return prune_size_;
	}
	auto prune_pairs() const -> const std::vector<std::pair<std::int32_t, std::int32_t>> &
	{
		return prune_pairs_;
	}

	/* Entry id of a word or label string, or -1 */
	auto find(std::string_view token) const -> std::int32_t
	{
		auto it = ids_.find(std::string(token));
		return it == ids_.end() ? -1 : it->second;
	}

	/* Word id of an in-vocabulary word (never a label), or -1 */
	auto word_id(std::string_view token) const -> std::int32_t
	{
		auto id = find(token);
		return (id >= 0 && id < nwords_) ? id : -1;
	}

	/* Raw label string, including any "__label__" prefix */
	auto label(std::int32_t index) const -> const std::string &
	{
		return entries_.at(static_cast<std::size_t>(nwords_) + static_cast<std::size_t>(index)).word;
	}

	/* Label with the conventional "__label__" prefix removed */
	auto label_name(std::int32_t index) const -> std::string_view
	{
		std::string_view raw = label(index);
		if (raw.starts_with(label_prefix)) raw.remove_prefix(label_prefix.size());
		return raw;
	}

	/* Maps a hashed bucket index to an input-matrix row, honoring pruning */
	auto bucket_feature(std::int64_t bucket_index) const -> std::optional<std::int32_t>
	{
		if (prune_size_ == 0 || bucket_index < 0) return std::nullopt;
		auto idx = static_cast<std::int32_t>(bucket_index);
		if (prune_size_ > 0) {
			auto it = prune_map_.find(idx);
			if (it == prune_map_.end()) return std::nullopt;
			idx = it->second;
		}
		return nwords_ + idx;
	}

	friend auto operator==(const feature_dictionary &a, const feature_dictionary &b) -> bool
	{
		return a.entries_ == b.entries_ && a.nwords_ == b.nwords_ && a.nlabels_ == b.nlabels_ &&
			   a.ntokens_ == b.ntokens_ && a.prune_size_ == b.prune_size_ &&
			   a.prune_pairs_ == b.prune_pairs_;
	}

private:
	std::vector<dict_entry> entries_;
	std::int32_t nwords_ = 0;
	std::int32_t nlabels_ = 0;
	std::int64_t ntokens_ = 0;
	std::int64_t prune_size_ = -1;
	std::vector<std::pair<std::int32_t, std::int32_t>> prune_pairs_;
	std::unordered_map<std::string, std::int32_t> ids_;
	std::unordered_map<std::int32_t, std::int32_t> prune_map_;
};

/* Row-major float32 matrix */
class dense_matrix {
public:
	dense_matrix() = default;

	dense_matrix(std::int64_t rows, std::int64_t cols, std::vector<float> data)
		: rows_(rows), cols_(cols), data_(std::move(data))
	{
		if (rows_ < 0 || cols_ < 0 ||
			data_.size() != static_cast<std::size_t>(rows_) * static_cast<std::size_t>(cols_)) {
			throw error(errc::invalid_model, "matrix data does not match its dimensions");
		}
		for (auto v: data_) {
			if (!std::isfinite(v)) {
				throw error(errc::invalid_model, "matrix contains non-finite values");
			}
		}
	}

	auto rows() const -> std::int64_t
	{
		return rows_;
	}
	auto cols() const -> std::int64_t
	{
		return cols_;
	}
	auto data() const -> std::span<const float>
	{
		return data_;
	}
	auto row(std::int64_t r) const -> std::span<const float>
	{
		return std::span<const float>(data_).subspan(static_cast<std::size_t>(r * cols_),
													 static_cast<std::size_t>(cols_));
	}

	friend auto operator==(const dense_matrix &, const dense_matrix &) -> bool = default;

private:
	std::int64_t rows_ = 0;
	std::int64_t cols_ = 0;
	std::vector<float> data_;
};

/* Immutable after construction; share by const reference across threads */
class classifier_model {
public:
	classifier_model(model_hyperparams hp, feature_dictionary dict, dense_matrix input, dense_matrix output)
		: hp_(hp), dict_(std::move(dict)), input_(std::move(input)), output_(std::move(output))
	{
		if (hp_.dim <= 0) throw error(errc::invalid_model, "dim must be positive");
		if (hp_.bucket < 0) throw error(errc::invalid_model, "bucket must be non-negative");
		if (hp_.minn < 0 || hp_.maxn < 0 || (hp_.maxn > 0 && hp_.minn > hp_.maxn)) {
			throw error(errc::invalid_model, "invalid character n-gram bounds");
		}
		if (hp_.word_ngrams < 1) throw error(errc::invalid_model, "wordNgrams must be >= 1");
		if (hp_.model_type() != model_kind::supervised) {
			throw error(errc::non_supervised_model, "model is not a supervised classifier");
		}
		if (input_.cols() != hp_.dim || output_.cols() != hp_.dim) {
			throw error(errc::invalid_model, "matrix width does not match dim");
		}
		if (output_.rows() != dict_.nlabels()) {
			throw error(errc::invalid_model, "output matrix rows do not match label count");
		}
		if (dict_.nlabels() < 1) throw error(errc::invalid_model, "model has no labels");
		auto expected_rows = static_cast<std::int64_t>(dict_.nwords()) +
							 (dict_.prune_size() >= 0 ? dict_.prune_size() : hp_.bucket);
		if (input_.rows() != expected_rows) {
			throw error(errc::invalid_model, "input matrix rows do not match nwords + bucket");
		}
	}

	auto hyperparams() const -> const model_hyperparams &
	{
		return hp_;
	}
	auto dictionary() const -> const feature_dictionary &
	{
		return dict_;
	}
	auto input() const -> const dense_matrix &
	{
		return input_;
	}
	auto output() const -> const dense_matrix &
	{
		return output_;
	}
	auto dim() const -> std::int32_t
	{
		return hp_.dim;
	}
	auto nlabels() const -> std::int32_t
	{
		return dict_.nlabels();
	}

	friend auto operator==(const classifier_model &, const classifier_model &) -> bool = default;

private:
	model_hyperparams hp_;
	feature_dictionary dict_;
	dense_matrix input_;
	dense_matrix output_;
};

/* FNV-1a over the token bytes. Bytes are sign-extended before the XOR,
 * which is what the reference implementation does for non-ASCII input. */
constexpr auto hash_token(std::string_view token) -> std::uint32_t
{
	std::uint32_t h = 2166136261u;
	for (char c: token) {
		h ^= static_cast<std::uint32_t>(static_cast<std::int8_t>(c));
		h *= 16777619u;
	}
	return h;
}

namespace detail {

template<typename Sink>
void for_each_char_ngram(std::string_view wrapped, std::int32_t minn, std::int32_t maxn, Sink &&sink)
{
	auto starts = utf8::char_starts(wrapped);
	auto nchars = static_cast<std::int32_t>(starts.size()) - 1;
	for (std::int32_t i = 0; i < nchars; i++) {
		for (std::int32_t n = 1; n <= maxn && i + n <= nchars; n++) {
			if (n < minn) continue;
			/* single characters at either boundary are just "<" or ">" */
			if (n == 1 && (i == 0 || i + n == nchars)) continue;
			auto begin = starts[static_cast<std::size_t>(i)];
			auto end = starts[static_cast<std::size_t>(i + n)];
			sink(wrapped.substr(begin, end - begin));
		}
	}
}

template<typename Sink>
void for_each_word_ngram(std::span<const std::uint32_t> hashes, std::int32_t order, Sink &&sink)
{
	for (std::size_t i = 0; i < hashes.size(); i++) {
		/* widened through int32 to reproduce the reference sign extension */
		auto h = static_cast<std::uint64_t>(static_cast<std::int64_t>(static_cast<std::int32_t>(hashes[i])));
		for (std::size_t j = i + 1; j < hashes.size() && j < i + static_cast<std::size_t>(order); j++) {
			auto next = static_cast<std::uint64_t>(
				static_cast<std::int64_t>(static_cast<std::int32_t>(hashes[j])));
			h = h * 116049371u + next;
			sink(h);
		}
	}
}

} // namespace detail

/*
 * Feature ids contributed by one whitespace-delimited word: its own word id
 * when in vocabulary, then the hashed character n-grams of "<word>".
 * The end-of-sentence token never gets character n-grams.
 */
inline auto subword_ids(std::string_view word, const model_hyperparams &hp, const feature_dictionary &dict)
	-> std::vector<std::int32_t>
{
	std::vector<std::int32_t> ids;
	auto wid = dict.word_id(word);
	if (wid >= 0) ids.push_back(wid);
	if (word == eos_token || hp.maxn <= 0 || hp.bucket <= 0) return ids;

	std::string wrapped;
	wrapped.reserve(word.size() + 2);
	wrapped.push_back('<');
	wrapped.append(word);
	wrapped.push_back('>');
	detail::for_each_char_ngram(wrapped, hp.minn, hp.maxn, [&](std::string_view ngram) {
		auto row = dict.bucket_feature(hash_token(ngram) % static_cast<std::uint32_t>(hp.bucket));
		if (row) ids.push_back(*row);
	});
	return ids;
}

/* Ids of word n-grams of order 2..order over consecutive word hashes */
inline auto word_ngram_ids(std::span<const std::uint32_t> hashes, std::int32_t order, std::int32_t bucket,
						   std::int32_t nwords) -> std::vector<std::int32_t>
{
	std::vector<std::int32_t> ids;
	if (bucket <= 0) return ids;
	detail::for_each_word_ngram(hashes, order, [&](std::uint64_t h) {
		ids.push_back(nwords + static_cast<std::int32_t>(h % static_cast<std::uint64_t>(bucket)));
	});
	return ids;
}

/* Same as above but honors the dictionary's prune map */
inline auto word_ngram_ids(std::span<const std::uint32_t> hashes, const model_hyperparams &hp,
						   const feature_dictionary &dict) -> std::vector<std::int32_t>
{
	std::vector<std::int32_t> ids;
	if (hp.bucket <= 0) return ids;
	detail::for_each_word_ngram(hashes, hp.word_ngrams, [&](std::uint64_t h) {
		auto row = dict.bucket_feature(static_cast<std::int64_t>(h % static_cast<std::uint64_t>(hp.bucket)));
		if (row) ids.push_back(*row);
	});
	return ids;
}

namespace detail {

class binary_reader {
public:
	explicit binary_reader(const std::filesystem::path &path)
		: in_(path, std::ios::binary)
	{
		if (!in_) {
			throw error(errc::io_error, "cannot open '" + path.string() + "'");
		}
		std::error_code ec;
		remaining_ = std::filesystem::file_size(path, ec);
		if (ec) {
			throw error(errc::io_error, "cannot stat '" + path.string() + "'");
		}
	}

	template<typename T>
	auto read() -> T
	{
		T value;
		read_bytes(reinterpret_cast<char *>(&value), sizeof(T));
		return value;
	}

	auto read_bool() -> bool
	{
		return read<std::uint8_t>() != 0;
	}

	auto read_cstring() -> std::string
	{
		std::string s;
		for (;;) {
			auto c = read<char>();
			if (c == '\0') break;
			s.push_back(c);
		}
		return s;
	}

	auto read_floats(std::size_t count) -> std::vector<float>
	{
		if (count > remaining_ / sizeof(float)) {
			throw error(errc::truncated_file, "matrix data extends past end of file");
		}
		std::vector<float> v(count);
		read_bytes(reinterpret_cast<char *>(v.data()), count * sizeof(float));
		return v;
	}

	auto remaining() const -> std::uint64_t
	{
		return remaining_;
	}

private:
	void read_bytes(char *dst, std::size_t n)
	{
		if (n > remaining_ || !in_.read(dst, static_cast<std::streamsize>(n))) {
			throw error(errc::truncated_file, "unexpected end of model file");
		}
		remaining_ -= n;
	}

	std::ifstream in_;
	std::uint64_t remaining_ = 0;
};

inline auto read_matrix(binary_reader &reader) -> dense_matrix
{
	if (reader.read_bool()) {
		throw error(errc::quantized_unsupported, "quantized matrices are not supported");
	}
	auto rows = reader.read<std::int64_t>();
	auto cols = reader.read<std::int64_t>();
	if (rows < 0 || cols < 0) {
		throw error(errc::invalid_model, "negative matrix dimensions");
	}
	if (cols > 0 && static_cast<std::uint64_t>(rows) > reader.remaining() / static_cast<std::uint64_t>(cols)) {
		throw error(errc::truncated_file, "matrix data extends past end of file");
	}
	auto count = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
	return dense_matrix(rows, cols, reader.read_floats(count));
}

} // namespace detail

inline auto load_model(const std::filesystem::path &path) -> classifier_model
{
	detail::binary_reader reader(path);

	if (reader.read<std::int32_t>() != model_file_magic) {
		throw error(errc::bad_magic, "'" + path.string() + "' is not a fastText model");
	}
	auto version = reader.read<std::int32_t>();
	if (version != model_file_version) {
		throw error(errc::unsupported_version, "format version " + std::to_string(version) +
												   " (only " + std::to_string(model_file_version) +
												   " is supported)");
	}

	model_hyperparams hp;
	hp.dim = reader.read<std::int32_t>();
	hp.ws = reader.read<std::int32_t>();
	hp.epoch = reader.read<std::int32_t>();
	hp.min_count = reader.read<std::int32_t>();
	hp.neg = reader.read<std::int32_t>();
	hp.word_ngrams = reader.read<std::int32_t>();
	hp.loss = reader.read<std::int32_t>();
	hp.model = reader.read<std::int32_t>();
	hp.bucket = reader.read<std::int32_t>();
	hp.minn = reader.read<std::int32_t>();
	hp.maxn = reader.read<std::int32_t>();
	hp.lr_update_rate = reader.read<std::int32_t>();
	hp.t = reader.read<double>();

	if (hp.model_type() != model_kind::supervised) {
		throw error(errc::non_supervised_model, "model kind " + std::to_string(hp.model) + " is not supervised");
	}

	auto size = reader.read<std::int32_t>();
	auto nwords = reader.read<std::int32_t>();
	auto nlabels = reader.read<std::int32_t>();
	auto ntokens = reader.read<std::int64_t>();
	auto prune_size = reader.read<std::int64_t>();
	if (size < 0 || nwords < 0 || nlabels < 0 || static_cast<std::int64_t>(nwords) + nlabels != size) {
		throw error(errc::invalid_model, "inconsistent dictionary header");
	}

	std::vector<dict_entry> entries;
	entries.reserve(static_cast<std::size_t>(size));
	for (std::int32_t i = 0; i < size; i++) {
		dict_entry e;
		e.word = reader.read_cstring();
		e.count = reader.read<std::int64_t>();
		auto type = reader.read<std::int8_t>();
		if (type != 0 && type != 1) {
			throw error(errc::invalid_model, "unknown dictionary entry type");
		}
		e.type = static_cast<entry_type>(type);
		entries.push_back(std::move(e));
	}

	std::vector<std::pair<std::int32_t, std::int32_t>> prune_pairs;
	for (std::int64_t i = 0; i < prune_size; i++) {
		auto from = reader.read<std::int32_t>();
		auto to = reader.read<std::int32_t>();
		prune_pairs.emplace_back(from, to);
	}

	feature_dictionary dict(std::move(entries), nwords, nlabels, ntokens, prune_size, std::move(prune_pairs));
	auto input = detail::read_matrix(reader);
	auto output = detail::read_matrix(reader);
	return classifier_model(hp, std::move(dict), std::move(input), std::move(output));
}

} // namespace masklid
