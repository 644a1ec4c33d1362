#pragma once

// Minimal rate query language:
//
//   sum( rate( NAME { KEY="VALUE" (, KEY="VALUE")* }? [ INTEGER s ] ) )
//
// Whitespace-insensitive. The outer sum() may be omitted when the selector
// matches at most one series.

#include <cctype>
#include <string>
#include <string_view>

#include "gridcalib/error.hpp"
#include "gridcalib/timeseries.hpp"

namespace gridcalib::timeseries {

struct QueryExpr {
  bool summed = true;
  std::string metric;
  Labels filters;
  DurationMs window = kDefaultRateWindowMs;

  friend bool operator==(const QueryExpr&, const QueryExpr&) = default;
};

namespace detail {

class QueryParser {
 public:
  explicit QueryParser(std::string_view text) : text_(text) {}

  QueryExpr parse() {
    QueryExpr expr;
    skip_ws();
    std::size_t mark = pos_;
    std::string head = identifier();
    if (head == "sum") {
      expect('(');
      expr = parse_rate();
      expect(')');
      expr.summed = true;
    } else {
      pos_ = mark;
      expr = parse_rate();
      expr.summed = false;
    }
    skip_ws();
    if (pos_ != text_.size()) fail("trailing input");
    return expr;
  }

 private:
  QueryExpr parse_rate() {
    QueryExpr expr;
    if (identifier() != "rate") fail("expected 'rate'");
    expect('(');
    expr.metric = identifier();
    if (expr.metric.empty()) fail("expected metric name");
    skip_ws();
    if (peek() == '{') {
      ++pos_;
      do {
        std::string key = identifier();
        if (key.empty()) fail("expected label name");
        expect('=');
        std::string value = quoted();
        if (!expr.filters.emplace(std::move(key), std::move(value)).second) {
          fail("duplicate label");
        }
        skip_ws();
      } while (consume(','));
      expect('}');
    }
    expect('[');
    skip_ws();
    std::size_t start = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (start == pos_) fail("expected integer window");
    std::int64_t secs = 0;
    try {
      secs = parse_int(text_.substr(start, pos_ - start));
    } catch (const Error&) {
      fail("window out of range");
    }
    if (secs <= 0) fail("window must be positive");
    expr.window = secs * 1000;
    expect('s');
    expect(']');
    expect(')');
    return expr;
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

  bool consume(char c) {
    skip_ws();
    if (peek() != c) return false;
    ++pos_;
    return true;
  }

  void expect(char c) {
    if (!consume(c)) fail(std::string("expected '") + c + "'");
  }

  std::string identifier() {
    skip_ws();
    std::size_t start = pos_;
    auto is_head = [](char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; };
    auto is_tail = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; };
    if (pos_ < text_.size() && is_head(text_[pos_])) {
      ++pos_;
      while (pos_ < text_.size() && is_tail(text_[pos_])) ++pos_;
    }
    return std::string(text_.substr(start, pos_ - start));
  }

  std::string quoted() {
    skip_ws();
    if (peek() != '"') fail("expected '\"'");
    ++pos_;
    std::string out;
    while (pos_ < text_.size() && text_[pos_] != '"') {
      if (text_[pos_] == '\\' && pos_ + 1 < text_.size()) ++pos_;
      out += text_[pos_++];
    }
    if (pos_ >= text_.size()) fail("unterminated string");
    ++pos_;
    return out;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorKind::ParseError,
                what + " at offset " + std::to_string(pos_) + " in '" + std::string(text_) + "'");
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline QueryExpr parse_query(std::string_view text) { return detail::QueryParser(text).parse(); }

inline std::string to_string(const QueryExpr& expr) {
  std::string inner = "rate(" + expr.metric;
  if (!expr.filters.empty()) {
    inner += '{';
    bool first = true;
    for (const auto& [k, v] : expr.filters) {
      if (!first) inner += ',';
      first = false;
      inner += k + "=\"";
      for (char c : v) {
        if (c == '"' || c == '\\') inner += '\\';
        inner += c;
      }
      inner += '"';
    }
    inner += '}';
  }
  inner += "[" + std::to_string(expr.window / 1000) + "s])";
  return expr.summed ? "sum(" + inner + ")" : inner;
}

struct QueryOptions {
  /// Raise UnknownMetric when no series carries the metric name.
  bool strict = false;
};

/// Evaluates the query with the window ending at `at`. A series contributes
/// its rate over the part of the window its samples cover, or nothing when
/// they do not overlap it.
inline Watts evaluate(const MetricStore& store, const QueryExpr& expr, TimestampMs at,
                      QueryOptions options = {}) {
  if (options.strict && !store.has_metric(expr.metric)) {
    throw Error(ErrorKind::UnknownMetric, expr.metric);
  }
  Watts total = 0.0;
  std::size_t matched = 0;
  store.for_each_matching(expr.metric, expr.filters, [&](const Series& series) {
    ++matched;
    if (series.empty()) return;
    TimestampMs t1 = std::max(at - expr.window, series.front().timestamp);
    TimestampMs t2 = std::min(at, series.back().timestamp);
    if (t2 <= t1) return;
    total += rate(series, t1, t2);
  });
  if (!expr.summed && matched > 1) {
    throw Error(ErrorKind::AmbiguousSelector,
                to_string(expr) + " matches " + std::to_string(matched) + " series; wrap in sum()");
  }
  return total;
}

/// Evaluates at the store's current (latest) time.
inline Watts query(const MetricStore& store, const QueryExpr& expr, QueryOptions options = {}) {
  return evaluate(store, expr, store.latest_timestamp(), options);
}

inline Watts query(const MetricStore& store, std::string_view expr, QueryOptions options = {}) {
  return query(store, parse_query(expr), options);
}

}  // namespace gridcalib::timeseries
