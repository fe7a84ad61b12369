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

/*
 * masklid command-line tool.
 *
 *   masklid predict  --model M [--labels L] [--top-k K] [TEXT]
 *   masklid masklid  --model M [--labels L] [--alpha A --beta B ...] [TEXT]
 *   masklid mine     --model M [--labels L] [--jobs N] < corpus.txt
 *   masklid evaluate --model M --dataset D [--mode masklid|baseline]
 *
 * Exit codes: 0 success, 1 input error, 2 configuration or model error.
 */

#include "masklid/evaluation.hpp"
#include "masklid/inference.hpp"
#include "masklid/masklid.hpp"
#include "masklid/model_io.hpp"
#include "masklid/parallel.hpp"
#include "masklid/records.hpp"
#include "masklid/utf8.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

namespace {

using namespace masklid;

constexpr int exit_ok = 0;
constexpr int exit_input = 1;
constexpr int exit_config = 2;
constexpr std::size_t batch_lines = 4096;

/* Thrown for failures while loading the model, label list or config */
struct setup_failure : std::runtime_error {
	using std::runtime_error::runtime_error;
};

struct common_options {
	std::string model;
	std::string labels;
	std::size_t jobs = 1;
	std::string format = "jsonl";
};

struct masklid_options {
	std::string config;
	std::optional<std::int32_t> alpha, beta, lambda;
	std::optional<std::size_t> tau;
	std::optional<double> conf;
	std::optional<double> step1_conf;
};

struct loaded {
	classifier_model model;
	label_subset subset;
};

void add_common(CLI::App *cmd, common_options &o, bool with_format)
{
	cmd->add_option("--model,-m", o.model, "fastText classifier (.bin)")->required()->envname("MASKLID_MODEL");
	cmd->add_option("--labels,-l", o.labels, "restrict prediction to the labels listed in this file")
		->envname("MASKLID_LABELS");
	cmd->add_option("--jobs,-j", o.jobs, "worker threads")->envname("MASKLID_JOBS")->check(CLI::PositiveNumber);
	if (with_format) {
		cmd->add_option("--format,-f", o.format, "output format")->check(CLI::IsMember({"jsonl", "tsv"}));
	}
}

void add_masklid_options(CLI::App *cmd, masklid_options &o)
{
	cmd->add_option("--config,-c", o.config, "key = value settings file")->envname("MASKLID_CONFIG");
	cmd->add_option("--alpha", o.alpha, "strong-association rank cutoff (default 3)")->envname("MASKLID_ALPHA");
	cmd->add_option("--beta", o.beta, "weak-association rank cutoff (default 15)")->envname("MASKLID_BETA");
	cmd->add_option("--tau", o.tau, "minimum byte length (default 20)")->envname("MASKLID_TAU");
	cmd->add_option("--lambda", o.lambda, "maximum rounds (default 2)")->envname("MASKLID_LAMBDA");
	cmd->add_option("--conf", o.conf, "feature-set confidence (default 0.9)")->envname("MASKLID_CONF");
	cmd->add_option("--step1-conf", o.step1_conf, "minimum confidence of each round's dominant label");
}

auto build_config(const masklid_options &o) -> masklid_config
{
	masklid_config cfg;
	if (!o.config.empty()) cfg = load_config(o.config);
	if (o.alpha) cfg.alpha = *o.alpha;
	if (o.beta) cfg.beta = *o.beta;
	if (o.tau) cfg.tau = *o.tau;
	if (o.lambda) cfg.lambda = *o.lambda;
	if (o.conf) cfg.feature_set_confidence = *o.conf;
	if (o.step1_conf) cfg.step1_confidence = *o.step1_conf;
	cfg.validate();
	return cfg;
}

auto load(const common_options &o) -> loaded
{
	try {
		auto model = load_model(o.model);
		auto subset = label_subset::all(model);
		if (!o.labels.empty()) {
			auto names = read_label_file(o.labels);
			auto r = restrict_labels(model, names);
			for (const auto &u: r.unmatched) std::cerr << "masklid: label not in model: " << u << "\n";
			subset = std::move(r.subset);
		}
		return {std::move(model), std::move(subset)};
	}
	catch (const std::exception &e) {
		throw setup_failure(e.what());
	}
}

/* One input line and what became of it */
struct line_result {
	std::string output;
	std::string diagnostic;
};

/*
 * Reads lines from `text` (if given) or stdin, runs `fn` over them in ordered
 * parallel batches and prints outputs in input order. Returns the number of
 * lines that produced a diagnostic.
 */
template<typename Fn>
auto run_lines(const std::optional<std::string> &text, std::size_t jobs, Fn &&fn) -> std::size_t
{
	struct input_line {
		std::size_t number;
		std::string text;
	};
	std::size_t failures = 0;
	auto flush = [&](std::vector<input_line> &batch) {
		auto results = ordered_parallel_map(std::span<const input_line>(batch), jobs,
											[&](const input_line &l) -> line_result {
												if (!utf8::is_valid(l.text)) return {"", "invalid UTF-8"};
												try {
													return fn(l.number, l.text);
												}
												catch (const error &e) {
													return {"", e.what()};
												}
											});
		for (std::size_t i = 0; i < results.size(); i++) {
			if (!results[i].diagnostic.empty()) {
				failures++;
				std::cerr << "masklid: line " << batch[i].number << ": " << results[i].diagnostic << "\n";
			}
			if (!results[i].output.empty()) std::cout << results[i].output << "\n";
		}
		std::cout.flush();
		batch.clear();
	};

	std::vector<input_line> batch;
	if (text) {
		batch.push_back({1, *text});
		flush(batch);
		return failures;
	}
	std::string line;
	std::size_t number = 0;
	while (std::getline(std::cin, line)) {
		number++;
		if (!line.empty() && line.back() == '\r') line.pop_back();
		if (detail::trim(line).empty()) continue;
		batch.push_back({number, std::move(line)});
		if (batch.size() >= batch_lines) flush(batch);
	}
	flush(batch);
	return failures;
}

auto format_prediction(std::size_t number, const prediction &p, std::size_t top_k, const classifier_model &model,
					   const std::string &format) -> std::string
{
	auto n = std::min(top_k, p.ranked.size());
	if (format == "tsv") {
		std::string out = std::to_string(number);
		for (std::size_t i = 0; i < n; i++) {
			char prob[32];
			std::snprintf(prob, sizeof(prob), "%.6f", p.ranked[i].probability);
			out += "\t" + std::string(model.dictionary().label_name(p.ranked[i].label)) + "\t" + prob;
		}
		return out;
	}
	auto labels = nlohmann::json::array();
	for (std::size_t i = 0; i < n; i++) {
		labels.push_back({{"label", model.dictionary().label_name(p.ranked[i].label)},
						  {"probability", p.ranked[i].probability}});
	}
	return nlohmann::json{{"line", number}, {"labels", labels}}.dump(-1, ' ', false,
																		nlohmann::json::error_handler_t::replace);
}

auto format_record(const mine_record &r, const std::string &format) -> std::string
{
	if (format == "tsv") {
		std::string labels;
		for (const auto &l: r.languages) labels += (labels.empty() ? "" : "+") + l.label;
		return std::to_string(r.line) + "\t" + labels + "\t" + r.termination + "\t" + r.text;
	}
	return serialize(r);
}

} // namespace

auto main(int argc, char **argv) -> int
{
	CLI::App app{"Code-switching language identification with fastText classifiers"};
	app.require_subcommand(1);
	app.set_version_flag("--version", "masklid 0.1.0");

	common_options common;
	masklid_options mopts;
	std::optional<std::string> text;
	std::size_t top_k = 5;

	auto *predict_cmd = app.add_subcommand("predict", "rank labels for each input line");
	add_common(predict_cmd, common, true);
	predict_cmd->add_option("--top-k,-k", top_k, "labels to print per line")->check(CLI::PositiveNumber);
	predict_cmd->add_option("text", text, "sentence to classify (default: read lines from stdin)");

	auto *masklid_cmd = app.add_subcommand("masklid", "detect the languages of each input line");
	add_common(masklid_cmd, common, true);
	add_masklid_options(masklid_cmd, mopts);
	masklid_cmd->add_option("text", text, "sentence to analyse (default: read lines from stdin)");

	auto *mine_cmd = app.add_subcommand("mine", "emit only lines with two or more languages");
	add_common(mine_cmd, common, true);
	add_masklid_options(mine_cmd, mopts);

	std::string dataset;
	std::string input_format = "jsonl";
	std::string tag_map_path;
	std::string mode = "masklid";
	bool no_preprocess = false;
	baseline_config bcfg;
	auto *eval_cmd = app.add_subcommand("evaluate", "score predictions against a labeled dataset");
	add_common(eval_cmd, common, false);
	add_masklid_options(eval_cmd, mopts);
	eval_cmd->add_option("--dataset,-d", dataset, "labeled dataset")->required();
	eval_cmd->add_option("--input-format", input_format, "dataset format")
		->check(CLI::IsMember({"jsonl", "conll"}));
	eval_cmd->add_option("--tag-map", tag_map_path, "token tag to label mapping (conll input)");
	eval_cmd->add_option("--mode", mode, "predictor")->check(CLI::IsMember({"masklid", "baseline"}));
	eval_cmd->add_option("--threshold", bcfg.threshold, "baseline probability threshold");
	eval_cmd->add_option("--max-labels", bcfg.max_labels, "baseline label cap");
	eval_cmd->add_flag("--no-preprocess", no_preprocess, "skip cleaning and length filtering");
	std::string report_format = "tsv";
	eval_cmd->add_option("--format,-f", report_format, "report format")->check(CLI::IsMember({"tsv", "json"}));

	try {
		app.parse(argc, argv);
	}
	catch (const CLI::Success &e) {
		return app.exit(e);
	}
	catch (const CLI::ParseError &e) {
		app.exit(e);
		return exit_config;
	}

	try {
		masklid_config cfg;
		if (!predict_cmd->parsed()) {
			try {
				cfg = build_config(mopts);
				if (eval_cmd->parsed()) bcfg.validate();
			}
			catch (const std::exception &e) {
				throw setup_failure(e.what());
			}
		}
		auto [model, subset] = load(common);

		if (predict_cmd->parsed()) {
			auto failures = run_lines(text, common.jobs, [&](std::size_t n, const std::string &s) -> line_result {
				return {format_prediction(n, predict(s, model, subset), top_k, model, common.format), ""};
			});
			return failures ? exit_input : exit_ok;
		}

		if (masklid_cmd->parsed() || mine_cmd->parsed()) {
			bool mining = mine_cmd->parsed();
			auto failures = run_lines(mining ? std::nullopt : text, common.jobs,
									  [&](std::size_t n, const std::string &s) -> line_result {
										  auto p = masklid::masklid(s, model, subset, cfg);
										  if (mining && p.languages.size() < 2) return {};
										  return {format_record(make_mine_record(n, s, p, model), common.format), ""};
									  });
			/* mining skips undecodable lines and carries on */
			return (failures && !mining) ? exit_input : exit_ok;
		}

		tag_map tags;
		if (!tag_map_path.empty()) {
			try {
				tags = tag_map::load(tag_map_path);
			}
			catch (const std::exception &e) {
				throw setup_failure(e.what());
			}
		}
		auto sentences = ingest_token_labeled(
			dataset, input_format == "conll" ? dataset_format::conll : dataset_format::jsonl, tags);
		if (!no_preprocess) sentences = preprocess(sentences);

		auto predictions = ordered_parallel_map(
			std::span<const gold_sentence>(sentences), common.jobs, [&](const gold_sentence &g) -> label_set {
				try {
					if (mode == "baseline") return baseline_predict(g.text, model, subset, bcfg);
					return masklid_labels(masklid::masklid(g.text, model, subset, cfg), model);
				}
				catch (const error &e) {
					/* nothing to predict from: counts as no match */
					if (e.code() == errc::empty_input || e.code() == errc::empty_feature_set) return {};
					throw;
				}
			});
		auto report = score(predictions, sentences);
		if (report_format == "json") {
			std::cout << report_to_json(report).dump(2) << "\n";
		}
		else {
			write_report_tsv(std::cout, report);
		}
		return exit_ok;
	}
	catch (const setup_failure &e) {
		std::cerr << "masklid: " << e.what() << "\n";
		return exit_config;
	}
	catch (const error &e) {
		std::cerr << "masklid: " << e.what() << "\n";
		return is_configuration_error(e.code()) ? exit_config : exit_input;
	}
	catch (const std::exception &e) {
		std::cerr << "masklid: " << e.what() << "\n";
		return exit_input;
	}
}
