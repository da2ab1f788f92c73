#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "levelcg/duality.hpp"
#include "levelcg/errors.hpp"
#include "levelcg/graphdyn.hpp"
#include "levelcg/hamiltonian.hpp"
#include "levelcg/levelset.hpp"
#include "levelcg/sde.hpp"

namespace levelcg {

// ---------------------------------------------------------------------------
// Document
// ---------------------------------------------------------------------------

/// One `key = value` entry. Numbers keep their source token so integers are
/// converted without passing through double.
struct ConfigValue {
  enum class Kind { number, string, boolean, array };
  Kind kind = Kind::number;
  int line = 0;
  std::string token;
  std::vector<std::string> items;
};

/// Parsed key-value document: `[section]` headers, `key = value` lines, `#`
/// comments. Values are numbers, "strings", true/false, or flat arrays of
/// numbers.
class ConfigDocument {
 public:
  static ConfigDocument parse(std::string text, std::string source = "config") {
    ConfigDocument doc;
    doc.text_ = std::move(text);
    doc.source_ = std::move(source);
    std::istringstream in(doc.text_);
    std::string raw;
    std::string section;
    int line = 0;
    while (std::getline(in, raw)) {
      ++line;
      const std::string s = trim(strip_comment(raw));
      if (s.empty()) continue;
      if (s.front() == '[') {
        if (s.back() != ']') doc.fail(line, "unterminated section header");
        section = trim(s.substr(1, s.size() - 2));
        if (!is_identifier(section)) doc.fail(line, "invalid section name '" + section + "'");
        if (doc.sections_.count(section)) doc.fail(line, "duplicate section [" + section + "]");
        doc.sections_[section];
        continue;
      }
      const auto eq = s.find('=');
      if (eq == std::string::npos) doc.fail(line, "expected key = value");
      const std::string key = trim(s.substr(0, eq));
      const std::string value = trim(s.substr(eq + 1));
      if (!is_identifier(key)) doc.fail(line, "invalid key '" + key + "'");
      if (section.empty()) doc.fail(line, "key '" + key + "' outside any section");
      if (value.empty()) doc.fail(line, "missing value for '" + key + "'");
      auto& entries = doc.sections_[section];
      if (entries.count(key)) doc.fail(line, "duplicate key " + section + "." + key);
      entries[key] = doc.parse_value(value, line);
    }
    return doc;
  }

  static ConfigDocument load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error(ErrorCode::Io, "cannot open config file " + path);
    std::ostringstream os;
    os << f.rdbuf();
    return parse(os.str(), path);
  }

  const std::string& text() const noexcept { return text_; }
  const std::string& source() const noexcept { return source_; }

  bool has(const std::string& section, const std::string& key) const {
    const auto it = sections_.find(section);
    return it != sections_.end() && it->second.count(key) > 0;
  }

  const ConfigValue* find(const std::string& section, const std::string& key) const {
    const auto it = sections_.find(section);
    if (it == sections_.end()) return nullptr;
    const auto jt = it->second.find(key);
    return jt == it->second.end() ? nullptr : &jt->second;
  }

  const std::map<std::string, std::map<std::string, ConfigValue>>& sections() const noexcept { return sections_; }

  [[noreturn]] void fail(int line, const std::string& message) const {
    throw Error(ErrorCode::Config, source_ + ":" + std::to_string(line) + ": " + message);
  }

 private:
  static std::string strip_comment(const std::string& s) {
    bool quoted = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] == '"') quoted = !quoted;
      if (s[i] == '#' && !quoted) return s.substr(0, i);
    }
    return s;
  }

  static std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  }

  static bool is_identifier(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s) {
      if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
    }
    return true;
  }

  ConfigValue parse_value(const std::string& v, int line) const {
    ConfigValue out;
    out.line = line;
    out.token = v;
    if (v.front() == '"') {
      if (v.size() < 2 || v.back() != '"') fail(line, "unterminated string");
      out.kind = ConfigValue::Kind::string;
      out.token = v.substr(1, v.size() - 2);
      return out;
    }
    if (v == "true" || v == "false") {
      out.kind = ConfigValue::Kind::boolean;
      return out;
    }
    if (v.front() == '[') {
      if (v.back() != ']') fail(line, "unterminated array");
      out.kind = ConfigValue::Kind::array;
      std::istringstream in(v.substr(1, v.size() - 2));
      std::string item;
      while (std::getline(in, item, ',')) {
        item = trim(item);
        if (item.empty()) fail(line, "empty array element");
        if (!is_number(item)) fail(line, "array element '" + item + "' is not a number");
        out.items.push_back(item);
      }
      return out;
    }
    if (!is_number(v)) fail(line, "cannot parse value '" + v + "'");
    return out;
  }

  static bool is_number(const std::string& s) {
    double x = 0.0;
    const auto* first = s.data() + (s.front() == '+' ? 1 : 0);
    const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), x);
    return ec == std::errc() && ptr == s.data() + s.size();
  }

  std::string text_;
  std::string source_;
  std::map<std::string, std::map<std::string, ConfigValue>> sections_;
};

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

struct RunConfig {
  std::vector<double> potential{0.25, 0.0, -0.5, 0.0, 0.25};

  // [sde]
  double dt = 1e-3;
  std::size_t inner_substeps = 0;
  double t_final = 1.0;
  double snapshot_spacing = 0.01;
  PhasePoint x0{1.2, 0.0};
  std::uint64_t seed = 20240611;
  double escape_bound = 1e3;

  // [simulate]
  double simulate_epsilon = 0.05;

  // [converge]
  std::vector<double> converge_epsilons{0.5, 0.2, 0.1, 0.05};
  std::size_t converge_n = 10000;

  // [duality]
  std::vector<double> duality_epsilons{0.5, 0.2, 0.1, 0.05};
  std::size_t duality_n = 2000;
  FamilySpec family{};
  double limit_snapshot_spacing = 1e-3;
  double shift = 0.1;

  // [levelset]
  CoefficientSpec tables{};

  // [fp]
  std::size_t fp_cells = 512;
  double fp_safety = 0.9;

  // [bins]
  std::size_t well_bins = 128;
  std::size_t upper_bins = 256;
  double finest_bin = 1e-3;

  // [run]
  unsigned threads = 0;
  std::string out = "out";

  /// Verbatim source text, embedded in output headers.
  std::string text;

  Potential make_potential() const { return Potential(potential); }

  SdeConfig sde(double epsilon, std::size_t n) const {
    SdeConfig c;
    c.epsilon = epsilon;
    c.dt = dt;
    c.inner_substeps = inner_substeps;
    c.t_final = t_final;
    c.x0 = x0;
    c.base_seed = seed;
    c.n = n;
    c.escape_bound = escape_bound;
    c.threads = threads;
    return c;
  }

  std::vector<double> snapshots() const { return snapshot_grid(t_final, snapshot_spacing); }

  /// Checks everything that does not need the coefficient tables. With a
  /// source document, messages carry the line of the offending key.
  void validate(const ConfigDocument* doc = nullptr) const {
    auto fail = [&](const std::string& section, const std::string& key, const std::string& why) {
      const ConfigValue* v = doc ? doc->find(section, key) : nullptr;
      const std::string where = v ? doc->source() + ":" + std::to_string(v->line) + ": " : std::string();
      throw Error(ErrorCode::Config, where + section + "." + key + ": " + why);
    };
    try {
      Potential check(potential);
      (void)check;
    } catch (const Error& e) {
      fail("potential", "coefficients", e.what());
    }
    auto positive = [&](const std::string& s, const std::string& k, double x) {
      if (!(x > 0.0) || !std::isfinite(x)) fail(s, k, "must be > 0");
    };
    positive("sde", "dt", dt);
    positive("sde", "t_final", t_final);
    positive("sde", "snapshot_spacing", snapshot_spacing);
    positive("sde", "escape_bound", escape_bound);
    if (!std::isfinite(x0.q) || !std::isfinite(x0.p)) fail("sde", "x0", "must be finite");
    {
      const double k = t_final / dt;
      if (std::abs(k - std::round(k)) > 1e-9 * std::max(1.0, k)) fail("sde", "t_final", "must be a multiple of dt");
      const double m = snapshot_spacing / dt;
      if (std::abs(m - std::round(m)) > 1e-9 * std::max(1.0, m)) fail("sde", "snapshot_spacing", "must be a multiple of dt");
      const double r = t_final / snapshot_spacing;
      if (std::abs(r - std::round(r)) > 1e-9 * std::max(1.0, r)) {
        fail("sde", "snapshot_spacing", "must divide t_final");
      }
    }
    positive("simulate", "epsilon", simulate_epsilon);
    for (double e : converge_epsilons) positive("converge", "epsilons", e);
    for (double e : duality_epsilons) positive("duality", "epsilons", e);
    if (converge_epsilons.empty()) fail("converge", "epsilons", "must not be empty");
    if (converge_n < 1) fail("converge", "n", "must be >= 1");
    if (duality_n < 2) fail("duality", "n", "must be >= 2");
    if (family.knots < 4) fail("duality", "knots", "must be >= 4");
    if (!(family.cap > 0.0) || family.cap > tables.h_max) fail("duality", "cap", "must lie in (0, levelset.h_max]");
    positive("duality", "limit_snapshot_spacing", limit_snapshot_spacing);
    {
      const double r = snapshot_spacing / limit_snapshot_spacing;
      if (std::abs(r - std::round(r)) > 1e-9 * std::max(1.0, r)) {
        fail("duality", "limit_snapshot_spacing", "must divide sde.snapshot_spacing");
      }
    }
    if (!std::isfinite(shift)) fail("duality", "shift", "must be finite");
    positive("levelset", "delta_sing", tables.delta_sing);
    if (tables.points < 8) fail("levelset", "points", "must be >= 8");
    positive("levelset", "h_max", tables.h_max);
    if (fp_cells < 8) fail("fp", "cells", "must be >= 8");
    if (!(fp_safety > 0.0 && fp_safety <= 1.0)) fail("fp", "safety", "must lie in (0, 1]");
    if (well_bins < 2) fail("bins", "well_bins", "must be >= 2");
    if (upper_bins < 2) fail("bins", "upper_bins", "must be >= 2");
    positive("bins", "finest", finest_bin);
    if (out.empty()) fail("run", "out", "must not be empty");
    try {
      sde(simulate_epsilon, 1).validate();
    } catch (const Error& e) {
      fail("simulate", "epsilon", e.what());
    }
    for (double e : converge_epsilons) {
      try {
        sde(e, converge_n).validate();
      } catch (const Error& err) {
        fail("converge", "epsilons", err.what());
      }
    }
  }
};

namespace detail {

class ConfigReader {
 public:
  explicit ConfigReader(const ConfigDocument& doc) : doc_(doc) {}

  void number(const std::string& s, const std::string& k, double& out) {
    if (const auto* v = take(s, k)) out = to_double(*v, v->token, s, k);
  }

  void count(const std::string& s, const std::string& k, std::size_t& out) {
    if (const auto* v = take(s, k)) out = static_cast<std::size_t>(to_unsigned(*v, v->token, s, k));
  }

  void count(const std::string& s, const std::string& k, unsigned& out) {
    if (const auto* v = take(s, k)) out = static_cast<unsigned>(to_unsigned(*v, v->token, s, k));
  }

  void seed(const std::string& s, const std::string& k, std::uint64_t& out) {
    if (const auto* v = take(s, k)) out = to_unsigned(*v, v->token, s, k);
  }

  void text(const std::string& s, const std::string& k, std::string& out) {
    if (const auto* v = take(s, k)) {
      if (v->kind != ConfigValue::Kind::string) doc_.fail(v->line, s + "." + k + ": expected a string");
      out = v->token;
    }
  }

  void list(const std::string& s, const std::string& k, std::vector<double>& out) {
    if (const auto* v = take(s, k)) {
      if (v->kind != ConfigValue::Kind::array) doc_.fail(v->line, s + "." + k + ": expected an array");
      out.clear();
      for (const auto& item : v->items) out.push_back(to_double(*v, item, s, k));
    }
  }

  void point(const std::string& s, const std::string& k, PhasePoint& out) {
    if (const auto* v = doc_.find(s, k)) {
      std::vector<double> xs;
      list(s, k, xs);
      if (xs.size() != 2) doc_.fail(v->line, s + "." + k + ": expected [q, p]");
      out = {xs[0], xs[1]};
    }
  }

  /// Rejects every key that was not consumed.
  void finish() const {
    for (const auto& [section, entries] : doc_.sections()) {
      for (const auto& [key, v] : entries) {
        if (!used_.count(section + "." + key)) doc_.fail(v.line, "unknown key " + section + "." + key);
      }
    }
  }

 private:
  const ConfigValue* take(const std::string& s, const std::string& k) {
    used_.insert(s + "." + k);
    return doc_.find(s, k);
  }

  double to_double(const ConfigValue& v, const std::string& tok, const std::string& s, const std::string& k) const {
    if (v.kind != ConfigValue::Kind::number && v.kind != ConfigValue::Kind::array) {
      doc_.fail(v.line, s + "." + k + ": expected a number");
    }
    double x = 0.0;
    const char* first = tok.data() + (tok.front() == '+' ? 1 : 0);
    std::from_chars(first, tok.data() + tok.size(), x);
    if (!std::isfinite(x)) doc_.fail(v.line, s + "." + k + ": must be finite");
    return x;
  }

  std::uint64_t to_unsigned(const ConfigValue& v, const std::string& tok, const std::string& s,
                            const std::string& k) const {
    if (v.kind != ConfigValue::Kind::number) doc_.fail(v.line, s + "." + k + ": expected a non-negative integer");
    std::uint64_t x = 0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), x);
    if (ec == std::errc() && ptr == tok.data() + tok.size()) return x;
    // Accept integral values written in floating notation, e.g. 1e4.
    const double d = to_double(v, tok, s, k);
    if (d < 0.0 || d != std::floor(d) || d > 9.0e15) doc_.fail(v.line, s + "." + k + ": expected a non-negative integer");
    return static_cast<std::uint64_t>(d);
  }

  const ConfigDocument& doc_;
  std::set<std::string> used_;
};

}  // namespace detail

/// Builds and validates a RunConfig. Absent keys keep their defaults;
/// unknown sections or keys are errors.
inline RunConfig load_run_config(const ConfigDocument& doc) {
  RunConfig c;
  c.text = doc.text();
  detail::ConfigReader r(doc);
  r.list("potential", "coefficients", c.potential);
  r.number("sde", "dt", c.dt);
  r.count("sde", "inner_substeps", c.inner_substeps);
  r.number("sde", "t_final", c.t_final);
  r.number("sde", "snapshot_spacing", c.snapshot_spacing);
  r.point("sde", "x0", c.x0);
  r.seed("sde", "seed", c.seed);
  r.number("sde", "escape_bound", c.escape_bound);
  r.number("simulate", "epsilon", c.simulate_epsilon);
  r.list("converge", "epsilons", c.converge_epsilons);
  r.count("converge", "n", c.converge_n);
  r.list("duality", "epsilons", c.duality_epsilons);
  r.count("duality", "n", c.duality_n);
  r.count("duality", "family_size", c.family.size);
  r.number("duality", "cap", c.family.cap);
  r.count("duality", "knots", c.family.knots);
  r.number("duality", "limit_snapshot_spacing", c.limit_snapshot_spacing);
  r.number("duality", "shift", c.shift);
  r.number("levelset", "delta_sing", c.tables.delta_sing);
  r.count("levelset", "points", c.tables.points);
  r.number("levelset", "h_max", c.tables.h_max);
  r.count("fp", "cells", c.fp_cells);
  r.number("fp", "safety", c.fp_safety);
  r.count("bins", "well_bins", c.well_bins);
  r.count("bins", "upper_bins", c.upper_bins);
  r.number("bins", "finest", c.finest_bin);
  r.count("run", "threads", c.threads);
  r.text("run", "out", c.out);
  r.finish();
  c.family.h_max = c.tables.h_max;
  c.validate(&doc);
  return c;
}

inline RunConfig load_run_config(const std::string& path) { return load_run_config(ConfigDocument::load(path)); }

}  // namespace levelcg
