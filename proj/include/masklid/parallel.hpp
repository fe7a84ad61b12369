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

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <span>
#include <thread>
#include <type_traits>
#include <vector>

namespace masklid {

/*
 * Applies fn to every item on up to `jobs` threads and returns the results in
 * input order. The first exception (in input order) is rethrown after all
 * workers finish.
 */
template<typename T, typename Fn>
auto ordered_parallel_map(std::span<const T> items, std::size_t jobs, Fn &&fn)
	-> std::vector<std::invoke_result_t<Fn &, const T &>>
{
	using result_t = std::invoke_result_t<Fn &, const T &>;
	std::vector<result_t> results(items.size());
	std::vector<std::exception_ptr> errors(items.size());
	jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(items.size(), 1));

	std::atomic<std::size_t> next{0};
	auto work = [&]() {
		for (std::size_t i = next.fetch_add(1); i < items.size(); i = next.fetch_add(1)) {
			try {
				results[i] = fn(items[i]);
			}
			catch (...) {
				errors[i] = std::current_exception();
			}
		}
	};

	if (jobs == 1) {
		work();
	}
	else {
		std::vector<std::jthread> pool;
		pool.reserve(jobs);
		for (std::size_t j = 0; j < jobs; j++) pool.emplace_back(work);
	}

	for (auto &e: errors) {
		if (e) std::rethrow_exception(e);
	}
	return results;
}

} // namespace masklid
