#include "predsub/error.hpp"
#include "predsub/graph.hpp"

#include <charconv>
#include <fstream>
#include <limits>
#include <string_view>

namespace predsub {

namespace {

constexpr std::string_view kWhitespace = " \t\r";

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(kWhitespace);
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(kWhitespace);
    return s.substr(first, last - first + 1);
}

// Next whitespace-delimited token parsed as a signed integer.
bool next_integer(std::string_view& rest, long long& value) {
    rest = rest.substr(std::min(rest.size(), rest.find_first_not_of(kWhitespace)));
    if (rest.empty()) {
        return false;
    }
    const auto end = std::min(rest.size(), rest.find_first_of(kWhitespace));
    const auto token = rest.substr(0, end);
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc() || ptr != token.data() + token.size()) {
        return false;
    }
    rest = rest.substr(end);
    return true;
}

}  // namespace

SparseGraph load_edge_list(const std::string& path, const EdgeListOptions& options) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError(path, 0, "cannot open file");
    }
    std::vector<Edge> edges;
    std::optional<Index> header_n;
    long long max_index = -1;
    std::string line;
    std::size_t line_no = 0;
    bool seen_data = false;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view body = trim(line);
        if (body.empty() || body.front() == '#') {
            continue;
        }
        if (body.starts_with("n=")) {
            if (seen_data || header_n) {
                throw ParseError(path, line_no, "node-count header must precede all edges");
            }
            std::string_view rest = body.substr(2);
            long long n = 0;
            if (!next_integer(rest, n) || !trim(rest).empty() || n < 0 ||
                n > std::numeric_limits<Index>::max()) {
                throw ParseError(path, line_no, "malformed node-count header");
            }
            header_n = static_cast<Index>(n);
            continue;
        }
        seen_data = true;
        long long i = 0;
        long long j = 0;
        std::string_view rest = body;
        if (!next_integer(rest, i) || !next_integer(rest, j) || !trim(rest).empty()) {
            throw ParseError(path, line_no, "expected two integer node indices");
        }
        if (options.one_based) {
            if (i < 1 || j < 1) {
                throw ParseError(path, line_no, "index below 1 in a one-based file");
            }
            --i;
            --j;
        }
        if (i < 0 || j < 0) {
            throw ParseError(path, line_no, "negative node index");
        }
        if (i >= std::numeric_limits<Index>::max() || j >= std::numeric_limits<Index>::max()) {
            throw ParseError(path, line_no, "node index too large");
        }
        const auto n_limit = options.n ? options.n : header_n;
        if (n_limit && (i >= *n_limit || j >= *n_limit)) {
            throw ParseError(path, line_no, "node index exceeds declared node count");
        }
        max_index = std::max({max_index, i, j});
        edges.emplace_back(static_cast<Index>(i), static_cast<Index>(j));
    }
    const Index n = options.n ? *options.n : header_n ? *header_n : static_cast<Index>(max_index + 1);
    return SparseGraph::from_edges(n, edges);
}

void save_edge_list(const SparseGraph& graph, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw ParseError(path, 0, "cannot open file for writing");
    }
    out << "n=" << graph.n() << '\n';
    for (const auto& [i, j] : graph.edges()) {
        out << i << ' ' << j << '\n';
    }
    if (!out) {
        throw ParseError(path, 0, "write failed");
    }
}

}  // namespace predsub
