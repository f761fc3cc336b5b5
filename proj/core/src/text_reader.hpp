#pragma once

// Line/token reader shared by the text file parsers.

#include <filesystem>
#include <fstream>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include "ccr/common.hpp"

namespace ccr::detail {

class LineReader {
public:
    LineReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

    /// Advances to the next line and splits it on whitespace. Returns false at EOF.
    bool next() {
        if (!std::getline(in_, line_)) {
            return false;
        }
        ++line_no_;
        if (!line_.empty() && line_.back() == '\r') {
            line_.pop_back();
        }
        tokens_.clear();
        std::size_t i = 0;
        while (i < line_.size()) {
            while (i < line_.size() && is_space(line_[i])) {
                ++i;
            }
            const std::size_t start = i;
            while (i < line_.size() && !is_space(line_[i])) {
                ++i;
            }
            if (i > start) {
                tokens_.emplace_back(line_.data() + start, i - start);
            }
        }
        return true;
    }

    /// Reads the next line, failing with `what` at EOF.
    void expect_line(std::string_view what) {
        if (!next()) {
            ++line_no_;
            fail("unexpected end of file, expected " + std::string(what));
        }
    }

    /// Reads a line of the form `<keyword> <args...>` with exactly `args` arguments.
    void expect_record(std::string_view keyword, std::size_t args) {
        expect_line(keyword);
        if (tokens_.empty() || tokens_[0] != keyword) {
            fail("expected '" + std::string(keyword) + "'");
        }
        if (tokens_.size() != args + 1) {
            fail("'" + std::string(keyword) + "' expects " + std::to_string(args) +
                 " value(s), got " + std::to_string(tokens_.size() - 1));
        }
    }

    const std::vector<std::string_view>& tokens() const { return tokens_; }
    const std::string& line() const { return line_; }
    std::size_t line_no() const { return line_no_; }

    double number(std::size_t i) const {
        try {
            return parse_double(tokens_.at(i));
        } catch (const Error& e) {
            fail(e.what());
        }
    }

    double finite_number(std::size_t i) const {
        const double v = number(i);
        if (!std::isfinite(v)) {
            fail("non-finite value '" + std::string(tokens_[i]) + "'");
        }
        return v;
    }

    std::uint64_t count(std::size_t i) const {
        try {
            return parse_uint(tokens_.at(i));
        } catch (const Error& e) {
            fail(e.what());
        }
    }

    [[noreturn]] void fail(const std::string& msg) const {
        throw Error(source_ + ":" + std::to_string(line_no_) + ": " + msg);
    }

    /// Skips blank lines; returns false at EOF.
    bool next_nonblank() {
        while (next()) {
            if (!tokens_.empty()) {
                return true;
            }
        }
        return false;
    }

private:
    static bool is_space(char c) { return c == ' ' || c == '\t'; }

    std::istream& in_;
    std::string source_;
    std::string line_;
    std::vector<std::string_view> tokens_;
    std::size_t line_no_ = 0;
};

/// Writes `values` space-separated in shortest round-trip form.
template <typename Out, typename Range>
void write_numbers(Out& out, const Range& values) {
    for (double v : values) {
        out << ' ' << format_double(v);
    }
}

inline std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open '" + path.string() + "' for reading");
    }
    return in;
}

template <typename Fn>
void write_file(const std::filesystem::path& path, Fn&& fn) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("cannot open '" + path.string() + "' for writing");
    }
    fn(out);
    out.flush();
    if (!out) {
        throw Error("write to '" + path.string() + "' failed");
    }
}

inline void expect_magic(detail::LineReader& r, std::string_view magic, int version) {
    if (!r.next()) {
        r.fail("empty file, expected '" + std::string(magic) + " " + std::to_string(version) + "'");
    }
    const auto& t = r.tokens();
    if (t.size() != 2 || t[0] != magic) {
        r.fail("malformed header, expected '" + std::string(magic) + " " +
               std::to_string(version) + "'");
    }
    if (t[1] != std::to_string(version)) {
        r.fail("unsupported " + std::string(magic) + " version '" + std::string(t[1]) + "'");
    }
}

}  // namespace ccr::detail
