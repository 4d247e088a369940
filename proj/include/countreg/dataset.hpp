#pragma once

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <variant>
#include <vector>

#include "countreg/distributions.hpp"
#include "countreg/errors.hpp"

namespace countreg {

enum class ColumnKind { Count, Categorical, Numeric };

inline std::string_view to_string(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::Count: return "count";
    case ColumnKind::Categorical: return "categorical";
    case ColumnKind::Numeric: return "numeric";
  }
  return "?";
}

struct ColumnDecl {
  std::string name;
  ColumnKind kind = ColumnKind::Numeric;
  /// Declared vocabulary for categoricals, in reference order. Empty means
  /// "use the sorted set of observed labels".
  std::vector<std::string> levels;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.emplace_back(trim(s.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace detail

/// Column-type declarations, written as
///   y:count,wealth:categorical[poor|middle|rich],births:numeric
class Schema {
 public:
  Schema() = default;
  explicit Schema(std::vector<ColumnDecl> decls) : decls_(std::move(decls)) {
    std::set<std::string> seen;
    for (const auto& d : decls_) {
      if (d.name.empty()) throw SchemaError("schema column with empty name");
      if (!seen.insert(d.name).second) throw SchemaError("duplicate schema column '" + d.name + "'");
      if (d.kind != ColumnKind::Categorical && !d.levels.empty())
        throw SchemaError("levels declared for non-categorical column '" + d.name + "'");
      std::set<std::string> lv(d.levels.begin(), d.levels.end());
      if (lv.size() != d.levels.size())
        throw SchemaError("duplicate level in column '" + d.name + "'");
    }
  }

  static Schema parse(std::string_view text) {
    std::vector<ColumnDecl> decls;
    std::size_t i = 0;
    while (i < text.size()) {
      // An entry ends at the first comma outside brackets.
      std::size_t j = i;
      int depth = 0;
      for (; j < text.size(); ++j) {
        if (text[j] == '[') ++depth;
        else if (text[j] == ']') --depth;
        else if (text[j] == ',' && depth == 0) break;
      }
      const auto entry = detail::trim(text.substr(i, j - i));
      i = j + 1;
      if (entry.empty()) continue;

      const auto colon = entry.find(':');
      if (colon == std::string_view::npos)
        throw SchemaError("schema entry '" + std::string(entry) + "' lacks ':<type>'");
      ColumnDecl d;
      d.name = std::string(detail::trim(entry.substr(0, colon)));
      auto type = detail::trim(entry.substr(colon + 1));
      if (const auto lb = type.find('['); lb != std::string_view::npos) {
        if (type.back() != ']') throw SchemaError("unterminated level list in '" + d.name + "'");
        d.levels = detail::split(type.substr(lb + 1, type.size() - lb - 2), '|');
        type = detail::trim(type.substr(0, lb));
      }
      if (type == "count") d.kind = ColumnKind::Count;
      else if (type == "categorical" || type == "cat") d.kind = ColumnKind::Categorical;
      else if (type == "numeric" || type == "num") d.kind = ColumnKind::Numeric;
      else throw SchemaError("unknown column type '" + std::string(type) + "' for '" + d.name + "'");
      decls.push_back(std::move(d));
    }
    if (decls.empty()) throw SchemaError("empty schema");
    return Schema(std::move(decls));
  }

  std::string to_string() const {
    std::string out;
    for (const auto& d : decls_) {
      if (!out.empty()) out += ',';
      out += d.name;
      out += ':';
      out += countreg::to_string(d.kind);
      if (!d.levels.empty()) {
        out += '[';
        for (std::size_t k = 0; k < d.levels.size(); ++k) {
          if (k) out += '|';
          out += d.levels[k];
        }
        out += ']';
      }
    }
    return out;
  }

  const std::vector<ColumnDecl>& columns() const noexcept { return decls_; }

 private:
  std::vector<ColumnDecl> decls_;
};

struct CountColumn {
  std::vector<Count> values;
};

struct NumericColumn {
  std::vector<double> values;
};

struct CategoricalColumn {
  std::vector<std::string> levels;  // full vocabulary, reference order
  std::vector<std::size_t> codes;   // index into levels per row
};

struct Column {
  std::string name;
  std::variant<CountColumn, CategoricalColumn, NumericColumn> data;

  ColumnKind kind() const {
    switch (data.index()) {
      case 0: return ColumnKind::Count;
      case 1: return ColumnKind::Categorical;
      default: return ColumnKind::Numeric;
    }
  }

  std::size_t size() const {
    return std::visit(
        [](const auto& c) {
          if constexpr (std::is_same_v<std::decay_t<decltype(c)>, CategoricalColumn>)
            return c.codes.size();
          else
            return c.values.size();
        },
        data);
  }
};

/// Immutable table of typed columns of equal length.
class Dataset {
 public:
  Dataset() = default;

  explicit Dataset(std::vector<Column> columns) : columns_(std::move(columns)) {
    std::set<std::string> seen;
    for (const auto& c : columns_) {
      if (!seen.insert(c.name).second) throw SchemaError("duplicate column '" + c.name + "'");
      if (c.size() != columns_.front().size())
        throw SchemaError("column '" + c.name + "' has a different length");
      if (const auto* cat = std::get_if<CategoricalColumn>(&c.data)) {
        for (auto code : cat->codes)
          if (code >= cat->levels.size())
            throw SchemaError("column '" + c.name + "' has a code outside its vocabulary");
      }
      if (const auto* cnt = std::get_if<CountColumn>(&c.data)) {
        for (auto v : cnt->values)
          if (v < 0) throw SchemaError("count column '" + c.name + "' holds a negative value");
      }
    }
    n_rows_ = columns_.empty() ? 0 : columns_.front().size();
  }

  std::size_t n_rows() const noexcept { return n_rows_; }
  const std::vector<Column>& columns() const noexcept { return columns_; }

  bool has_column(std::string_view name) const {
    return std::any_of(columns_.begin(), columns_.end(),
                       [&](const Column& c) { return c.name == name; });
  }

  const Column& column(std::string_view name) const {
    for (const auto& c : columns_)
      if (c.name == name) return c;
    throw SchemaError("no column named '" + std::string(name) + "'");
  }

  std::span<const Count> counts(std::string_view name) const {
    const auto& c = column(name);
    if (const auto* cnt = std::get_if<CountColumn>(&c.data)) return cnt->values;
    throw SchemaError("column '" + c.name + "' is not a count column");
  }

  /// Schema that reproduces this dataset's column types and vocabularies.
  Schema schema() const {
    std::vector<ColumnDecl> decls;
    for (const auto& c : columns_) {
      ColumnDecl d{c.name, c.kind(), {}};
      if (const auto* cat = std::get_if<CategoricalColumn>(&c.data)) d.levels = cat->levels;
      decls.push_back(std::move(d));
    }
    return Schema(std::move(decls));
  }

 private:
  std::vector<Column> columns_;
  std::size_t n_rows_ = 0;
};

struct LoadedData {
  Dataset dataset;
  std::size_t dropped_rows = 0;
};

namespace detail {

/// Splits one CSV record. Handles double-quoted fields with "" escapes.
inline std::vector<std::string> parse_csv_record(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::string(trim(cur)));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  fields.push_back(std::string(trim(cur)));
  return fields;
}

inline bool is_missing(std::string_view cell) {
  return cell.empty() || cell == "NA" || cell == "na" || cell == "NaN" || cell == ".";
}

inline std::optional<Count> parse_count(std::string_view s) {
  Count v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || v < 0) return std::nullopt;
  return v;
}

inline std::optional<double> parse_real(std::string_view s) {
  double v = 0;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::string format_real(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace detail

/// Reads a header-first CSV, keeping only the declared columns. Rows with a
/// missing value in any declared column are dropped and counted.
inline LoadedData read_csv(std::istream& in, const Schema& schema) {
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("CSV input is empty (no header row)");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = detail::parse_csv_record(line);

  const auto& decls = schema.columns();
  std::vector<std::size_t> position(decls.size());
  for (std::size_t k = 0; k < decls.size(); ++k) {
    const auto it = std::find(header.begin(), header.end(), decls[k].name);
    if (it == header.end())
      throw SchemaError("declared column '" + decls[k].name + "' is missing from the CSV header");
    position[k] = static_cast<std::size_t>(it - header.begin());
  }

  // Raw cells per declared column; std::nullopt marks a missing value.
  std::vector<std::vector<std::optional<std::string>>> raw(decls.size());
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    ++row;
    const auto fields = detail::parse_csv_record(line);
    if (fields.size() != header.size())
      throw ParseError(row, "expected " + std::to_string(header.size()) + " fields, found " +
                                std::to_string(fields.size()));
    for (std::size_t k = 0; k < decls.size(); ++k) {
      const auto& cell = fields[position[k]];
      if (detail::is_missing(cell)) {
        raw[k].emplace_back(std::nullopt);
        continue;
      }
      switch (decls[k].kind) {
        case ColumnKind::Count:
          if (!detail::parse_count(cell))
            throw ParseError(row, "column '" + decls[k].name + "': '" + cell +
                                      "' is not a nonnegative integer count");
          break;
        case ColumnKind::Numeric:
          if (!detail::parse_real(cell))
            throw ParseError(row, "column '" + decls[k].name + "': '" + cell + "' is not numeric");
          break;
        case ColumnKind::Categorical:
          if (!decls[k].levels.empty() &&
              std::find(decls[k].levels.begin(), decls[k].levels.end(), cell) ==
                  decls[k].levels.end())
            throw ParseError(row, "column '" + decls[k].name + "': level '" + cell +
                                      "' is not in the declared vocabulary");
          break;
      }
      raw[k].emplace_back(cell);
    }
  }

  std::vector<bool> keep(row, true);
  std::size_t dropped = 0;
  for (std::size_t r = 0; r < row; ++r) {
    for (const auto& col : raw)
      if (!col[r]) {
        keep[r] = false;
        break;
      }
    if (!keep[r]) ++dropped;
  }

  std::vector<Column> columns;
  for (std::size_t k = 0; k < decls.size(); ++k) {
    const auto& d = decls[k];
    Column c{d.name, CountColumn{}};
    switch (d.kind) {
      case ColumnKind::Count: {
        CountColumn cc;
        for (std::size_t r = 0; r < row; ++r)
          if (keep[r]) cc.values.push_back(*detail::parse_count(*raw[k][r]));
        c.data = std::move(cc);
        break;
      }
      case ColumnKind::Numeric: {
        NumericColumn nc;
        for (std::size_t r = 0; r < row; ++r)
          if (keep[r]) nc.values.push_back(*detail::parse_real(*raw[k][r]));
        c.data = std::move(nc);
        break;
      }
      case ColumnKind::Categorical: {
        CategoricalColumn cat;
        cat.levels = d.levels;
        if (cat.levels.empty()) {
          // Vocabulary comes from every non-missing cell, including rows that
          // are dropped for missingness elsewhere.
          std::set<std::string> observed;
          for (const auto& cell : raw[k])
            if (cell) observed.insert(*cell);
          cat.levels.assign(observed.begin(), observed.end());
        }
        std::map<std::string, std::size_t> index;
        for (std::size_t l = 0; l < cat.levels.size(); ++l) index[cat.levels[l]] = l;
        for (std::size_t r = 0; r < row; ++r)
          if (keep[r]) cat.codes.push_back(index.at(*raw[k][r]));
        c.data = std::move(cat);
        break;
      }
    }
    columns.push_back(std::move(c));
  }
  return {Dataset(std::move(columns)), dropped};
}

inline LoadedData load_csv(const std::string& path, const Schema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("cannot open '" + path + "'");
  return read_csv(in, schema);
}

inline void write_csv(const Dataset& ds, std::ostream& out) {
  const auto& cols = ds.columns();
  for (std::size_t k = 0; k < cols.size(); ++k)
    out << (k ? "," : "") << detail::csv_escape(cols[k].name);
  out << '\n';
  for (std::size_t r = 0; r < ds.n_rows(); ++r) {
    for (std::size_t k = 0; k < cols.size(); ++k) {
      if (k) out << ',';
      std::visit(
          [&](const auto& c) {
            using T = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<T, CountColumn>)
              out << c.values[r];
            else if constexpr (std::is_same_v<T, NumericColumn>)
              out << detail::format_real(c.values[r]);
            else
              out << detail::csv_escape(c.levels[c.codes[r]]);
          },
          cols[k].data);
    }
    out << '\n';
  }
}

inline void save_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  write_csv(ds, out);
}

}  // namespace countreg
