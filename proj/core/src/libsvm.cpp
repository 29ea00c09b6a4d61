#include "dfsdca/libsvm.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <string>
#include <string_view>

#include "dfsdca/error.hpp"

namespace dfsdca {
namespace {

bool parse_double(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool parse_index(std::string_view s, std::uint64_t& out) {
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::string_view next_token(std::string_view& rest) {
  const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r'; };
  while (!rest.empty() && is_space(rest.front())) rest.remove_prefix(1);
  std::size_t k = 0;
  while (k < rest.size() && !is_space(rest[k])) ++k;
  auto tok = rest.substr(0, k);
  rest.remove_prefix(k);
  return tok;
}

void normalize_labels(std::vector<double>& y) {
  const std::set<double> seen(y.begin(), y.end());
  const bool zero_one = seen == std::set<double>{0.0, 1.0};
  const bool one_two = seen == std::set<double>{1.0, 2.0};
  if (!zero_one && !one_two) return;
  const double negative = zero_one ? 0.0 : 1.0;
  for (auto& v : y) v = (v == negative) ? -1.0 : 1.0;
}

}  // namespace

Dataset parse_libsvm(std::istream& in) {
  struct Entry {
    std::uint32_t row;
    double value;
  };
  std::vector<std::vector<Entry>> columns;
  std::vector<double> labels;
  std::uint64_t max_index = 0;

  std::string line;
  std::size_t line_no = 0;
  std::vector<std::uint64_t> seen;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view rest(line);
    if (const auto hash = rest.find('#'); hash != std::string_view::npos)
      rest = rest.substr(0, hash);
    auto tok = next_token(rest);
    if (tok.empty()) continue;

    double label = 0.0;
    if (!parse_double(tok, label)) throw ParseError("malformed label '" + std::string(tok) + "'", line_no);

    std::vector<Entry> col;
    seen.clear();
    for (tok = next_token(rest); !tok.empty(); tok = next_token(rest)) {
      const auto colon = tok.find(':');
      if (colon == std::string_view::npos)
        throw ParseError("malformed token '" + std::string(tok) + "'", line_no);
      const auto key = tok.substr(0, colon);
      if (key == "qid") continue;
      std::uint64_t idx = 0;
      double value = 0.0;
      if (!parse_index(key, idx) || !parse_double(tok.substr(colon + 1), value))
        throw ParseError("malformed token '" + std::string(tok) + "'", line_no);
      if (idx == 0) throw ParseError("feature index 0 (indices are 1-based)", line_no);
      if (idx > std::numeric_limits<std::uint32_t>::max())
        throw ParseError("feature index too large", line_no);
      if (std::find(seen.begin(), seen.end(), idx) != seen.end())
        throw ParseError("duplicate feature index " + std::to_string(idx), line_no);
      if (!seen.empty() && idx < seen.back())
        throw ParseError("feature indices not increasing", line_no);
      seen.push_back(idx);
      max_index = std::max(max_index, idx);
      if (value != 0.0) col.push_back({static_cast<std::uint32_t>(idx - 1), value});
    }
    if (col.empty()) throw ParseError("example has no nonzero feature", line_no);
    columns.push_back(std::move(col));
    labels.push_back(label);
  }
  if (columns.empty()) throw ParseError("empty input", 0);

  SparseColumnMatrix::Builder builder(max_index);
  for (const auto& col : columns) {
    for (const auto& e : col) builder.push(e.row, e.value);
    builder.finish_column();
  }
  normalize_labels(labels);
  return Dataset(std::move(builder).build(), std::move(labels));
}

Dataset load_libsvm(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return parse_libsvm(in);
}

void write_libsvm(std::ostream& out, const Dataset& data) {
  char buf[64];
  const auto put = [&](double v) {
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    out.write(buf, res.ptr - buf);
  };
  for (std::size_t i = 0; i < data.n(); ++i) {
    put(data.labels()[i]);
    const auto col = data.matrix().column(i);
    for (std::size_t k = 0; k < col.size(); ++k) {
      out << ' ' << (col.rows[k] + 1) << ':';
      put(col.values[k]);
    }
    out << '\n';
  }
}

}  // namespace dfsdca
