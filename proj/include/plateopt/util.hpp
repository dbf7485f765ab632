#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <exception>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace plateopt {

// 64-bit FNV-1a; stable across platforms, used for config and model digests.
constexpr std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string to_hex(std::uint64_t v);
inline std::string digest(std::string_view data) { return to_hex(fnv1a64(data)); }

// Shortest decimal text that parses back to the identical double.
std::string format_double(double v);
// Strict parse of a full token; throws ConfigError on junk.
double parse_double(std::string_view token);
long parse_long(std::string_view token);

// Runs body(begin, end) over [0, n) split into at most `workers` contiguous
// chunks. Each index is visited exactly once, so results written by index are
// independent of the worker count. The exception of the lowest failing chunk
// is rethrown.
template <class Body>
void parallel_chunks(std::size_t n, int workers, Body&& body) {
    const std::size_t w = std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(std::max(1, workers)), n));
    if (w <= 1) {
        if (n > 0) body(std::size_t{0}, n);
        return;
    }
    std::vector<std::exception_ptr> errors(w);
    std::vector<std::thread> threads;
    threads.reserve(w);
    for (std::size_t c = 0; c < w; ++c) {
        const std::size_t begin = n * c / w, end = n * (c + 1) / w;
        threads.emplace_back([&, c, begin, end] {
            try {
                body(begin, end);
            } catch (...) {
                errors[c] = std::current_exception();
            }
        });
    }
    for (auto& t : threads) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

template <class Body>
void parallel_for(std::size_t n, int workers, Body&& body) {
    parallel_chunks(n, workers, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) body(i);
    });
}

} // namespace plateopt
