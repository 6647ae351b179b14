#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "flexknn/errors.hpp"
#include "flexknn/matrix.hpp"

namespace flexknn {

// Coordinate functions f applied as rho(x) = sum_i f(|x_i|). All are
// nondecreasing on [0, inf) with f(0) = 0.
enum class CoordinateFn {
  exp_minus,   // e^x - 1
  sin_linear,  // sin x for x <= 1, x for x > 1
  tan_capped,  // tan x for x < pi/2, +inf beyond
  arctan,
  sinh_fn,
  tanh_fn,
  polynomial,  // a_1 x + a_2 x^2 + ... + a_m x^m
};

enum class TransformKind { square, root, affine };

// A distance expression. Five node kinds:
//   lp                  |v|_p, p in (0, inf]; p < 1 is a quasinorm and is
//                       flagged as such but evaluates fine
//   matrix_then_inner   inner(M v), M square and numerically invertible
//   coordinate_fn       sum_i f(|v_i|)
//   linear_combination  sum_i (w_i / W) part_i(v)
//   increasing_transform square / sqrt / positive-affine of an inner value
//
// Specs are immutable values; evaluation is a pure function of (spec, v), so
// instances can be shared freely across threads.
class DistanceSpec {
 public:
  enum class Kind { lp, matrix_then_inner, coordinate_fn, linear_combination, increasing_transform };

  static DistanceSpec lp(double p) {
    if (std::isinf(p) && p > 0) return lp_inf();
    if (!(p > 0.0) || !std::isfinite(p)) throw InvalidParameter("lp exponent must be positive (or inf)");
    DistanceSpec s(Kind::lp);
    s.p_ = p;
    return s;
  }

  static DistanceSpec lp_inf() {
    DistanceSpec s(Kind::lp);
    s.p_ = std::numeric_limits<double>::infinity();
    return s;
  }

  static DistanceSpec euclidean() { return lp(2.0); }

  static DistanceSpec with_matrix(Matrix m, DistanceSpec inner) {
    if (!m.square()) throw DimensionMismatch("distance matrix must be square");
    if (!is_invertible(m)) throw SingularMatrix("distance matrix is numerically singular");
    DistanceSpec s(Kind::matrix_then_inner);
    s.matrix_ = std::move(m);
    s.children_.push_back(std::move(inner));
    return s;
  }

  static DistanceSpec coordinate(CoordinateFn fn) {
    if (fn == CoordinateFn::polynomial) throw InvalidParameter("polynomial coordinate function needs coefficients");
    DistanceSpec s(Kind::coordinate_fn);
    s.fn_ = fn;
    return s;
  }

  static DistanceSpec polynomial(std::vector<double> coeffs) {
    if (coeffs.empty()) throw InvalidParameter("polynomial needs at least one coefficient");
    for (double c : coeffs)
      if (!std::isfinite(c)) throw InvalidParameter("polynomial coefficients must be finite");
    DistanceSpec s(Kind::coordinate_fn);
    s.fn_ = CoordinateFn::polynomial;
    s.coeffs_ = std::move(coeffs);
    return s;
  }

  static DistanceSpec combination(std::vector<double> weights, std::vector<DistanceSpec> parts) {
    if (weights.empty() || weights.size() != parts.size())
      throw InvalidParameter("combination needs matching, nonempty weights and parts");
    double total = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0) || !(w <= 1.0)) throw InvalidParameter("combination weights must lie in [0, 1]");
      total += w;
    }
    if (!(total > 0.0)) throw InvalidParameter("combination needs at least one positive weight");
    DistanceSpec s(Kind::linear_combination);
    s.weights_ = std::move(weights);
    s.children_ = std::move(parts);
    return s;
  }

  static DistanceSpec squared(DistanceSpec inner) { return transform(TransformKind::square, 1.0, 0.0, std::move(inner)); }
  static DistanceSpec root(DistanceSpec inner) { return transform(TransformKind::root, 1.0, 0.0, std::move(inner)); }
  static DistanceSpec affine(double a, double b, DistanceSpec inner) {
    if (!(a > 0.0) || !std::isfinite(a) || !std::isfinite(b))
      throw InvalidParameter("affine transform needs finite a > 0");
    return transform(TransformKind::affine, a, b, std::move(inner));
  }

  Kind kind() const { return kind_; }
  double p() const { return p_; }
  bool is_inf() const { return kind_ == Kind::lp && std::isinf(p_); }
  const Matrix& matrix() const { return matrix_; }
  CoordinateFn fn() const { return fn_; }
  const std::vector<double>& coeffs() const { return coeffs_; }
  const std::vector<double>& weights() const { return weights_; }
  TransformKind transform_kind() const { return transform_; }
  double affine_a() const { return affine_a_; }
  double affine_b() const { return affine_b_; }
  std::size_t part_count() const { return children_.size(); }
  const DistanceSpec& part(std::size_t i) const { return children_[i]; }

  // True if any lp node in the expression has p < 1. Such expressions are
  // still usable for ranking but are not norms (the triangle inequality and
  // the cone property both fail).
  bool quasinorm() const {
    if (kind_ == Kind::lp) return p_ < 1.0;
    for (const DistanceSpec& c : children_)
      if (c.quasinorm()) return true;
    return false;
  }

  double evaluate(std::span<const double> v) const { return eval_node(v, 0); }

  std::string format() const;
  static DistanceSpec parse(std::string_view text);

 private:
  explicit DistanceSpec(Kind k) : kind_(k) {}

  static DistanceSpec transform(TransformKind t, double a, double b, DistanceSpec inner) {
    DistanceSpec s(Kind::increasing_transform);
    s.transform_ = t;
    s.affine_a_ = a;
    s.affine_b_ = b;
    s.children_.push_back(std::move(inner));
    return s;
  }

  double eval_lp(std::span<const double> v) const {
    if (std::isinf(p_)) {
      double m = 0.0;
      for (double x : v) m = std::max(m, std::fabs(x));
      return m;
    }
    if (p_ == 1.0) {
      double s = 0.0;
      for (double x : v) s += std::fabs(x);
      return s;
    }
    if (p_ == 2.0) {
      double s = 0.0;
      for (double x : v) s += x * x;
      return std::sqrt(s);
    }
    // Generic p: factor out the max so quasinorms (p < 1) and large p cannot
    // overflow. rho(v) = m * (sum (|v_i|/m)^p)^(1/p).
    double m = 0.0;
    for (double x : v) m = std::max(m, std::fabs(x));
    if (m == 0.0) return 0.0;
    if (std::isinf(m)) return m;
    double s = 0.0;
    for (double x : v) {
      const double t = std::fabs(x) / m;
      if (t > 0.0) s += std::pow(t, p_);
    }
    return m * std::pow(s, 1.0 / p_);
  }

  double eval_coordinate(std::span<const double> v) const {
    double acc = 0.0;
    for (double raw : v) {
      const double x = std::fabs(raw);
      double fx;
      switch (fn_) {
        case CoordinateFn::exp_minus:
          fx = std::expm1(x);
          break;
        case CoordinateFn::sin_linear:
          fx = x <= 1.0 ? std::sin(x) : x;
          break;
        case CoordinateFn::tan_capped:
          fx = x < std::numbers::pi / 2.0 ? std::tan(x) : std::numeric_limits<double>::infinity();
          break;
        case CoordinateFn::arctan:
          fx = std::atan(x);
          break;
        case CoordinateFn::sinh_fn:
          fx = std::sinh(x);
          break;
        case CoordinateFn::tanh_fn:
          fx = std::tanh(x);
          break;
        case CoordinateFn::polynomial: {
          // Horner on x * (a1 + x * (a2 + ...)).
          double h = 0.0;
          for (std::size_t i = coeffs_.size(); i-- > 0;) h = coeffs_[i] + x * h;
          fx = x * h;
          break;
        }
      }
      acc += fx;
    }
    return acc;
  }

  double eval_node(std::span<const double> v, int depth) const {
    switch (kind_) {
      case Kind::lp:
        return eval_lp(v);
      case Kind::coordinate_fn:
        return eval_coordinate(v);
      case Kind::matrix_then_inner: {
        // Per-depth scratch keeps evaluation allocation-free in hot loops and
        // safe for nested matrix nodes. Inner vectors keep their buffers when
        // the outer vector grows, so spans into them stay valid.
        thread_local std::vector<std::vector<double>> scratch;
        if (scratch.size() <= static_cast<std::size_t>(depth)) scratch.resize(depth + 8);
        std::vector<double>& w = scratch[depth];
        matrix_.apply_to(v, w);
        return children_[0].eval_node(w, depth + 1);
      }
      case Kind::linear_combination: {
        double total = 0.0;
        for (double wt : weights_) total += wt;
        double acc = 0.0;
        for (std::size_t i = 0; i < children_.size(); ++i) {
          if (weights_[i] == 0.0) continue;
          acc += (weights_[i] / total) * children_[i].eval_node(v, depth);
        }
        return acc;
      }
      case Kind::increasing_transform: {
        const double t = children_[0].eval_node(v, depth);
        switch (transform_) {
          case TransformKind::square:
            return t * t;
          case TransformKind::root:
            return std::sqrt(t);
          case TransformKind::affine:
            return affine_a_ * t + affine_b_;
        }
        return t;  // unreachable
      }
    }
    return 0.0;  // unreachable
  }

  Kind kind_;
  double p_ = 0.0;
  Matrix matrix_;
  CoordinateFn fn_ = CoordinateFn::polynomial;
  std::vector<double> coeffs_;
  std::vector<double> weights_;
  TransformKind transform_ = TransformKind::square;
  double affine_a_ = 1.0;
  double affine_b_ = 0.0;
  std::vector<DistanceSpec> children_;
};

// rho(x - y). The only allocation is a thread-local scratch that is reused.
inline double distance(const DistanceSpec& spec, std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DimensionMismatch("distance arguments differ in dimension");
  thread_local std::vector<double> diff;
  diff.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) diff[i] = x[i] - y[i];
  return spec.evaluate(diff);
}

// ---------------------------------------------------------------------------
// Text form. Canonical grammar, round-trips exactly:
//   lp:<p>            lp:2, lp:0.5, lp:inf
//   mat(<entries>);<inner>   row-major square matrix, e.g. mat(1,0,0,2);lp:2
//   fn:<name>         fn:arctan, fn:exp_minus, ...
//   poly:<a1>,<a2>,...
//   comb:<w1>*<part1>+<w2>*<part2>+...
//   square(<inner>)   sqrt(<inner>)   affine(<a>,<b>)(<inner>)
// ---------------------------------------------------------------------------

namespace detail {

inline std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view tok) {
  if (tok == "inf") return std::numeric_limits<double>::infinity();
  if (tok == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
    throw ParseError("bad number '" + std::string(tok) + "' in distance spec");
  return v;
}

inline std::vector<double> parse_csv_numbers(std::string_view body) {
  std::vector<double> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= body.size(); ++i) {
    if (i == body.size() || body[i] == ',') {
      if (i == start) throw ParseError("empty number in list '" + std::string(body) + "'");
      out.push_back(parse_double(body.substr(start, i - start)));
      start = i + 1;
    }
  }
  return out;
}

inline const char* fn_name(CoordinateFn fn) {
  switch (fn) {
    case CoordinateFn::exp_minus:
      return "exp_minus";
    case CoordinateFn::sin_linear:
      return "sin_linear";
    case CoordinateFn::tan_capped:
      return "tan_capped";
    case CoordinateFn::arctan:
      return "arctan";
    case CoordinateFn::sinh_fn:
      return "sinh";
    case CoordinateFn::tanh_fn:
      return "tanh";
    case CoordinateFn::polynomial:
      return "poly";
  }
  return "?";
}

inline CoordinateFn fn_from_name(std::string_view name) {
  if (name == "exp_minus") return CoordinateFn::exp_minus;
  if (name == "sin_linear") return CoordinateFn::sin_linear;
  if (name == "tan_capped") return CoordinateFn::tan_capped;
  if (name == "arctan") return CoordinateFn::arctan;
  if (name == "sinh") return CoordinateFn::sinh_fn;
  if (name == "tanh") return CoordinateFn::tanh_fn;
  throw ParseError("unknown coordinate function '" + std::string(name) + "'");
}

// Splits `text` at top-level occurrences of `sep` (depth tracked over
// parentheses). A '+' or '-' immediately after an exponent marker stays glued
// to its number.
inline std::vector<std::string_view> split_top_level(std::string_view text, char sep) {
  std::vector<std::string_view> out;
  int depth = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '(') ++depth;
    else if (c == ')') --depth;
    else if (c == sep && depth == 0) {
      if ((sep == '+' || sep == '-') && i > 0 && (text[i - 1] == 'e' || text[i - 1] == 'E')) continue;
      out.push_back(text.substr(start, i - start));
      start = i + 1;
    }
    if (depth < 0) throw ParseError("unbalanced ')' in distance spec");
  }
  if (depth != 0) throw ParseError("unbalanced '(' in distance spec");
  out.push_back(text.substr(start));
  return out;
}

// Returns the index just past the parenthesized group starting at `open`.
inline std::size_t match_paren(std::string_view text, std::size_t open) {
  int depth = 0;
  for (std::size_t i = open; i < text.size(); ++i) {
    if (text[i] == '(') ++depth;
    if (text[i] == ')' && --depth == 0) return i + 1;
  }
  throw ParseError("unbalanced '(' in distance spec");
}

}  // namespace detail

inline std::string DistanceSpec::format() const {
  using detail::format_double;
  switch (kind_) {
    case Kind::lp:
      return std::isinf(p_) ? "lp:inf" : "lp:" + format_double(p_);
    case Kind::matrix_then_inner: {
      std::string out = "mat(";
      for (std::size_t i = 0; i < matrix_.data().size(); ++i) {
        if (i) out += ',';
        out += format_double(matrix_.data()[i]);
      }
      out += ");";
      out += children_[0].format();
      return out;
    }
    case Kind::coordinate_fn: {
      if (fn_ != CoordinateFn::polynomial) return std::string("fn:") + detail::fn_name(fn_);
      std::string out = "poly:";
      for (std::size_t i = 0; i < coeffs_.size(); ++i) {
        if (i) out += ',';
        out += format_double(coeffs_[i]);
      }
      return out;
    }
    case Kind::linear_combination: {
      std::string out = "comb:";
      for (std::size_t i = 0; i < children_.size(); ++i) {
        if (i) out += '+';
        out += format_double(weights_[i]);
        out += '*';
        // A nested combination would be ambiguous inside the +-separated term
        // list, and a matrix node's ';<inner>' tail may end in one, so both
        // get explicit parentheses.
        if (children_[i].kind_ == Kind::linear_combination || children_[i].kind_ == Kind::matrix_then_inner)
          out += "(" + children_[i].format() + ")";
        else
          out += children_[i].format();
      }
      return out;
    }
    case Kind::increasing_transform: {
      switch (transform_) {
        case TransformKind::square:
          return "square(" + children_[0].format() + ")";
        case TransformKind::root:
          return "sqrt(" + children_[0].format() + ")";
        case TransformKind::affine:
          return "affine(" + format_double(affine_a_) + "," + format_double(affine_b_) + ")(" +
                 children_[0].format() + ")";
      }
    }
  }
  throw ParseError("unformattable distance spec");
}

inline DistanceSpec DistanceSpec::parse(std::string_view text) {
  using namespace detail;
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t')) text.remove_suffix(1);
  if (text.empty()) throw ParseError("empty distance spec");

  // Optional grouping parentheses around a whole spec.
  if (text.front() == '(' && match_paren(text, 0) == text.size())
    return parse(text.substr(1, text.size() - 2));

  if (text.starts_with("lp:")) {
    std::string_view rest = text.substr(3);
    if (rest == "inf") return lp_inf();
    return lp(parse_double(rest));
  }
  if (text.starts_with("mat(")) {
    const std::size_t close = match_paren(text, 3);
    std::vector<double> entries = parse_csv_numbers(text.substr(4, close - 5));
    std::size_t d = 0;
    while (d * d < entries.size()) ++d;
    if (d * d != entries.size()) throw ParseError("mat(...) entry count is not a perfect square");
    if (close >= text.size() || text[close] != ';') throw ParseError("mat(...) must be followed by ';<inner>'");
    Matrix m = Matrix::from_rows(d, d, entries);
    return with_matrix(std::move(m), parse(text.substr(close + 1)));
  }
  if (text.starts_with("fn:")) return coordinate(fn_from_name(text.substr(3)));
  if (text.starts_with("poly:")) return polynomial(parse_csv_numbers(text.substr(5)));
  if (text.starts_with("comb:")) {
    std::vector<double> weights;
    std::vector<DistanceSpec> parts;
    for (std::string_view term : split_top_level(text.substr(5), '+')) {
      const std::vector<std::string_view> halves = split_top_level(term, '*');
      if (halves.size() < 2) throw ParseError("combination term '" + std::string(term) + "' lacks 'weight*spec'");
      weights.push_back(parse_double(halves[0]));
      std::string_view body = term.substr(halves[0].size() + 1);
      parts.push_back(parse(body));
    }
    return combination(std::move(weights), std::move(parts));
  }
  if (text.starts_with("square(") || text.starts_with("sqrt(")) {
    const bool is_square = text.starts_with("square(");
    const std::size_t open = is_square ? 6 : 4;
    const std::size_t close = match_paren(text, open);
    if (close != text.size()) throw ParseError("trailing characters after transform spec");
    DistanceSpec inner = parse(text.substr(open + 1, close - open - 2));
    return is_square ? squared(std::move(inner)) : root(std::move(inner));
  }
  if (text.starts_with("affine(")) {
    const std::size_t close_args = match_paren(text, 6);
    std::vector<double> ab = parse_csv_numbers(text.substr(7, close_args - 8));
    if (ab.size() != 2) throw ParseError("affine(a,b) needs exactly two parameters");
    if (close_args >= text.size() || text[close_args] != '(')
      throw ParseError("affine(a,b) must be followed by '(<inner>)'");
    const std::size_t close_inner = match_paren(text, close_args);
    if (close_inner != text.size()) throw ParseError("trailing characters after affine spec");
    return affine(ab[0], ab[1], parse(text.substr(close_args + 1, close_inner - close_args - 2)));
  }
  throw ParseError("unrecognized distance spec '" + std::string(text) + "'");
}

// Splits a user-facing list like "lp:0.5,lp:1,mat(1,0,0,2);lp:2" into one
// string per spec. A comma separates specs only when what follows looks like
// the start of a new spec; commas inside poly/mat/affine argument lists stay put.
inline std::vector<std::string> split_spec_list(std::string_view text) {
  auto looks_like_spec_head = [](std::string_view s) {
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    return s.starts_with("lp:") || s.starts_with("mat(") || s.starts_with("fn:") || s.starts_with("poly:") ||
           s.starts_with("comb:") || s.starts_with("square(") || s.starts_with("sqrt(") || s.starts_with("affine(");
  };
  std::vector<std::string> out;
  int depth = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '(') ++depth;
    if (text[i] == ')') --depth;
    if (text[i] == ',' && depth == 0 && looks_like_spec_head(text.substr(i + 1))) {
      out.emplace_back(text.substr(start, i - start));
      start = i + 1;
    }
  }
  out.emplace_back(text.substr(start));
  for (std::string& s : out) {
    while (!s.empty() && s.front() == ' ') s.erase(s.begin());
    while (!s.empty() && s.back() == ' ') s.pop_back();
  }
  return out;
}

}  // namespace flexknn
