#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <variant>
#include <vector>

#include "fiberdiv/interval.hpp"

namespace fiberdiv {

class SyntaxError : public std::runtime_error {
public:
    SyntaxError(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " at offset " + std::to_string(offset)), offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

class ArityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Pointwise evaluation hit a domain violation or produced NaN.
class EvalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Immutable expression tree over variables x1..xn.
///
/// Nodes are shared, so copying an Expr is cheap. `pi` is its own node kind so that
/// interval evaluation can use a rigorous enclosure instead of the rounded double.
class Expr {
public:
    struct Constant { double value; };
    struct Pi {};
    struct Variable { int index; }; // 1-based
    struct Unary;
    struct Binary;
    struct Node;

    static Expr constant(double v);
    static Expr pi();
    static Expr variable(int index);
    static Expr unary(UnaryOp op, Expr child);
    static Expr binary(BinaryOp op, Expr l, Expr r);

    /// One of Constant, Pi, Variable, Unary, Binary.
    const auto& node() const;

    /// Largest referenced variable index (0 for closed expressions).
    int arity() const { return arity_; }

private:
    Expr(std::shared_ptr<const Node> n, int arity) : node_(std::move(n)), arity_(arity) {}
    template <class T>
    static Expr make(T alt, int arity);

    std::shared_ptr<const Node> node_;
    int arity_;
};

struct Expr::Unary {
    UnaryOp op;
    Expr child;
};

struct Expr::Binary {
    BinaryOp op;
    Expr left;
    Expr right;
};

struct Expr::Node {
    std::variant<Constant, Pi, Variable, Unary, Binary> alt;
};

inline const auto& Expr::node() const { return node_->alt; }

template <class T>
Expr Expr::make(T alt, int arity) {
    return Expr(std::make_shared<const Node>(Node{std::move(alt)}), arity);
}

inline Expr Expr::constant(double v) { return make(Constant{v}, 0); }
inline Expr Expr::pi() { return make(Pi{}, 0); }

inline Expr Expr::variable(int index) {
    if (index < 1) throw std::invalid_argument("variable index must be >= 1");
    return make(Variable{index}, index);
}

inline Expr Expr::unary(UnaryOp op, Expr child) {
    const int a = child.arity();
    return make(Unary{op, std::move(child)}, a);
}

inline Expr Expr::binary(BinaryOp op, Expr l, Expr r) {
    if (op == BinaryOp::pow_int) {
        const auto* c = std::get_if<Constant>(&r.node());
        if (!c || std::trunc(c->value) != c->value) throw std::invalid_argument("pow exponent must be an integer constant");
    }
    const int a = std::max(l.arity(), r.arity());
    return make(Binary{op, std::move(l), std::move(r)}, a);
}

/// Structural identity (constants compared bitwise by value).
inline bool structurally_equal(const Expr& a, const Expr& b) {
    const auto& na = a.node();
    const auto& nb = b.node();
    if (na.index() != nb.index()) return false;
    if (auto* c = std::get_if<Expr::Constant>(&na)) return c->value == std::get<Expr::Constant>(nb).value;
    if (std::holds_alternative<Expr::Pi>(na)) return true;
    if (auto* v = std::get_if<Expr::Variable>(&na)) return v->index == std::get<Expr::Variable>(nb).index;
    if (auto* u = std::get_if<Expr::Unary>(&na)) {
        const auto& ub = std::get<Expr::Unary>(nb);
        return u->op == ub.op && structurally_equal(u->child, ub.child);
    }
    const auto& ba = std::get<Expr::Binary>(na);
    const auto& bb = std::get<Expr::Binary>(nb);
    return ba.op == bb.op && structurally_equal(ba.left, bb.left) && structurally_equal(ba.right, bb.right);
}

// ---------------------------------------------------------------------------
// Parsing
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' ['-'] integer)?
//   primary := number | 'pi' | variable | func '(' expr ')' | '(' expr ')'
//
// Unary minus binds looser than '^' (-x^2 == -(x^2)) and tighter than '*'.

namespace detail {

class Parser {
public:
    Parser(std::string_view text, int n) : text_(text), n_(n) {}

    Expr parse() {
        Expr e = parse_expr();
        skip_ws();
        if (pos_ != text_.size()) throw SyntaxError("unexpected '" + std::string(1, text_[pos_]) + "'", pos_);
        return e;
    }

private:
    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!accept(c)) {
            if (pos_ >= text_.size()) throw SyntaxError(std::string("expected '") + c + "', got end of input", pos_);
            throw SyntaxError(std::string("expected '") + c + "'", pos_);
        }
    }

    Expr parse_expr() {
        Expr lhs = parse_term();
        for (;;) {
            if (accept('+')) lhs = Expr::binary(BinaryOp::add, lhs, parse_term());
            else if (accept('-')) lhs = Expr::binary(BinaryOp::sub, lhs, parse_term());
            else return lhs;
        }
    }

    Expr parse_term() {
        Expr lhs = parse_unary();
        for (;;) {
            if (accept('*')) lhs = Expr::binary(BinaryOp::mul, lhs, parse_unary());
            else if (accept('/')) lhs = Expr::binary(BinaryOp::div, lhs, parse_unary());
            else return lhs;
        }
    }

    Expr parse_unary() {
        if (accept('-')) return Expr::unary(UnaryOp::neg, parse_unary());
        return parse_power();
    }

    Expr parse_power() {
        Expr base = parse_primary();
        if (!accept('^')) return base;
        skip_ws();
        const std::size_t at = pos_;
        const bool negative = accept('-');
        skip_ws();
        const std::size_t digits = pos_;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        if (pos_ == digits) throw SyntaxError("exponent must be an integer literal", at);
        if (pos_ < text_.size() && (text_[pos_] == '.' || text_[pos_] == 'e' || text_[pos_] == 'E'))
            throw SyntaxError("exponent must be an integer literal", at);
        int k = 0;
        auto [ptr, ec] = std::from_chars(text_.data() + digits, text_.data() + pos_, k);
        if (ec != std::errc() || k > 1000000) throw SyntaxError("exponent out of range", digits);
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == '^')
            throw SyntaxError("exponent must be an integer literal", pos_);
        return Expr::binary(BinaryOp::pow_int, base, Expr::constant(negative ? -k : k));
    }

    Expr parse_number() {
        const std::size_t start = pos_;
        while (pos_ < text_.size() && (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.'))
            ++pos_;
        if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
            std::size_t p = pos_ + 1;
            if (p < text_.size() && (text_[p] == '+' || text_[p] == '-')) ++p;
            if (p < text_.size() && std::isdigit(static_cast<unsigned char>(text_[p]))) {
                pos_ = p;
                while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
            }
        }
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(text_.data() + start, text_.data() + pos_, v);
        if (ec != std::errc() || ptr != text_.data() + pos_ || !std::isfinite(v))
            throw SyntaxError("malformed number", start);
        return Expr::constant(v);
    }

    Expr parse_primary() {
        skip_ws();
        if (pos_ >= text_.size()) throw SyntaxError("unexpected end of input", pos_);
        const char c = text_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (c == '(') {
            ++pos_;
            Expr e = parse_expr();
            expect(')');
            return e;
        }
        if (!std::isalpha(static_cast<unsigned char>(c))) throw SyntaxError(std::string("unexpected '") + c + "'", pos_);

        const std::size_t start = pos_;
        while (pos_ < text_.size() && std::isalnum(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        const std::string_view word = text_.substr(start, pos_ - start);

        if (word == "pi") return Expr::pi();
        if (word == "sin") return parse_call(UnaryOp::sin);
        if (word == "cos") return parse_call(UnaryOp::cos);
        if (word == "exp") return parse_call(UnaryOp::exp);
        if (word == "sqrt") return parse_call(UnaryOp::sqrt);
        if (word == "abs") return parse_call(UnaryOp::abs);
        return make_variable(word, start);
    }

    Expr parse_call(UnaryOp op) {
        expect('(');
        Expr arg = parse_expr();
        expect(')');
        return Expr::unary(op, std::move(arg));
    }

    Expr make_variable(std::string_view word, std::size_t at) {
        int index = 0;
        if (word.size() == 1 && n_ <= 3 && (word[0] == 'x' || word[0] == 'y' || word[0] == 'z')) {
            index = word[0] == 'x' ? 1 : (word[0] == 'y' ? 2 : 3);
        } else if (word.size() >= 2 && word[0] == 'x') {
            auto [ptr, ec] = std::from_chars(word.data() + 1, word.data() + word.size(), index);
            if (ec != std::errc() || ptr != word.data() + word.size() || index < 1)
                throw SyntaxError("unknown identifier '" + std::string(word) + "'", at);
        } else {
            throw SyntaxError("unknown identifier '" + std::string(word) + "'", at);
        }
        if (index > n_)
            throw ArityError("variable '" + std::string(word) + "' exceeds dimension " + std::to_string(n_));
        return Expr::variable(index);
    }

    std::string_view text_;
    int n_;
    std::size_t pos_ = 0;
};

} // namespace detail

/// Parse `text` as a scalar function of x1..xn (x, y, z are aliases when n <= 3).
inline Expr parse(std::string_view text, int n) {
    if (n < 1) throw std::invalid_argument("dimension must be >= 1");
    return detail::Parser(text, n).parse();
}

// ---------------------------------------------------------------------------
// Evaluation

inline double eval_point(const Expr& e, std::span<const double> p) {
    if (static_cast<int>(p.size()) < e.arity()) throw std::invalid_argument("eval_point: point dimension < arity");
    const auto& n = e.node();
    double r = 0.0;
    if (auto* c = std::get_if<Expr::Constant>(&n)) {
        r = c->value;
    } else if (std::holds_alternative<Expr::Pi>(n)) {
        r = 3.141592653589793;
    } else if (auto* v = std::get_if<Expr::Variable>(&n)) {
        r = p[static_cast<std::size_t>(v->index - 1)];
    } else if (auto* u = std::get_if<Expr::Unary>(&n)) {
        const double a = eval_point(u->child, p);
        switch (u->op) {
        case UnaryOp::neg: r = -a; break;
        case UnaryOp::sin: r = std::sin(a); break;
        case UnaryOp::cos: r = std::cos(a); break;
        case UnaryOp::exp: r = std::exp(a); break;
        case UnaryOp::sqrt:
            if (a < 0.0) throw EvalError("sqrt of negative value");
            r = std::sqrt(a);
            break;
        case UnaryOp::abs: r = std::fabs(a); break;
        case UnaryOp::sqr: r = a * a; break;
        }
    } else {
        const auto& b = std::get<Expr::Binary>(n);
        const double a = eval_point(b.left, p);
        const double c = eval_point(b.right, p);
        switch (b.op) {
        case BinaryOp::add: r = a + c; break;
        case BinaryOp::sub: r = a - c; break;
        case BinaryOp::mul: r = a * c; break;
        case BinaryOp::div:
            if (c == 0.0) throw EvalError("division by zero");
            r = a / c;
            break;
        case BinaryOp::pow_int:
            if (c < 0.0 && a == 0.0) throw EvalError("division by zero");
            r = std::pow(a, c);
            break;
        case BinaryOp::min: r = std::fmin(a, c); break;
        case BinaryOp::max: r = std::fmax(a, c); break;
        }
    }
    if (std::isnan(r)) throw EvalError("evaluation produced NaN");
    return r;
}

/// Natural interval extension over the box given as one interval per variable.
/// Domain violations surface as DomainError; a sqrt whose argument straddles 0 is
/// clamped and reported through `clamped`.
inline Interval eval_interval(const Expr& e, std::span<const Interval> box, bool* clamped = nullptr) {
    if (static_cast<int>(box.size()) < e.arity()) throw std::invalid_argument("eval_interval: box dimension < arity");
    const auto& n = e.node();
    if (auto* c = std::get_if<Expr::Constant>(&n)) return Interval(c->value);
    if (std::holds_alternative<Expr::Pi>(n)) return detail::pi_enclosure();
    if (auto* v = std::get_if<Expr::Variable>(&n)) return box[static_cast<std::size_t>(v->index - 1)];
    if (auto* u = std::get_if<Expr::Unary>(&n)) return interval_unary(u->op, eval_interval(u->child, box, clamped), clamped);
    const auto& b = std::get<Expr::Binary>(n);
    if (b.op == BinaryOp::pow_int)
        return pow_int(eval_interval(b.left, box, clamped), static_cast<int>(std::get<Expr::Constant>(b.right.node()).value));
    return interval_binary(b.op, eval_interval(b.left, box, clamped), eval_interval(b.right, box, clamped));
}

// ---------------------------------------------------------------------------
// Formatting

namespace detail {

inline std::string format_number(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

inline const char* unary_name(UnaryOp op) {
    switch (op) {
    case UnaryOp::neg: return "-";
    case UnaryOp::sin: return "sin";
    case UnaryOp::cos: return "cos";
    case UnaryOp::exp: return "exp";
    case UnaryOp::sqrt: return "sqrt";
    case UnaryOp::abs: return "abs";
    case UnaryOp::sqr: return "sqr";
    }
    return "?";
}

inline const char* binary_symbol(BinaryOp op) {
    switch (op) {
    case BinaryOp::add: return " + ";
    case BinaryOp::sub: return " - ";
    case BinaryOp::mul: return " * ";
    case BinaryOp::div: return " / ";
    case BinaryOp::pow_int: return " ^ ";
    case BinaryOp::min: return "min";
    case BinaryOp::max: return "max";
    }
    return "?";
}

} // namespace detail

/// Canonical fully parenthesized text. Parsing the result reproduces the tree for any
/// tree the parser can produce (non-negative constants, no sqr/min/max nodes).
inline std::string format(const Expr& e) {
    const auto& n = e.node();
    if (auto* c = std::get_if<Expr::Constant>(&n)) {
        if (c->value < 0.0 || std::signbit(c->value)) return "(" + detail::format_number(c->value) + ")";
        return detail::format_number(c->value);
    }
    if (std::holds_alternative<Expr::Pi>(n)) return "pi";
    if (auto* v = std::get_if<Expr::Variable>(&n)) return "x" + std::to_string(v->index);
    if (auto* u = std::get_if<Expr::Unary>(&n)) {
        if (u->op == UnaryOp::neg) return "(-" + format(u->child) + ")";
        if (u->op == UnaryOp::sqr) return "(" + format(u->child) + " ^ 2)";
        return std::string(detail::unary_name(u->op)) + "(" + format(u->child) + ")";
    }
    const auto& b = std::get<Expr::Binary>(n);
    if (b.op == BinaryOp::pow_int) {
        const double k = std::get<Expr::Constant>(b.right.node()).value;
        return "(" + format(b.left) + " ^ " + detail::format_number(k) + ")";
    }
    if (b.op == BinaryOp::min || b.op == BinaryOp::max)
        return std::string(detail::binary_symbol(b.op)) + "(" + format(b.left) + ", " + format(b.right) + ")";
    return "(" + format(b.left) + detail::binary_symbol(b.op) + format(b.right) + ")";
}

} // namespace fiberdiv
