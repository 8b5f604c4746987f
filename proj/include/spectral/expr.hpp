#pragma once

// Potential expression language: a small arithmetic grammar for real-valued
// potentials V : R^n -> R, with exact sign decomposition V = V+ - V- and a
// set of named built-in families used by the criteria pipelines.
//
// Grammar:  numbers, variables x0..x9, + - * / ^ (right assoc), parentheses,
//           functions abs,min,max,exp,log,sqrt,step,sin,cos.
// step(t) = 1 if t > 0 else 0, so indicator-type potentials are exact.
// Evaluation never propagates NaN/Inf: any non-finite intermediate aborts
// with an error locating the offending sub-expression.

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace spectral {

struct ParseError : std::runtime_error {
    std::size_t offset;  // byte offset into the source text
    ParseError(const std::string& msg, std::size_t off)
        : std::runtime_error(msg + " (at byte " + std::to_string(off) + ")"), offset(off) {}
};

struct EvalError : std::runtime_error {
    std::string subexpr;  // printed form of the failing node
    EvalError(const std::string& msg, std::string sub)
        : std::runtime_error(msg + " in '" + sub + "'"), subexpr(std::move(sub)) {}
};

enum class NodeKind { number, variable, neg, add, sub, mul, div, pow, call };
enum class FuncId { abs, min, max, exp, log, sqrt, step, sin, cos };

inline const char* func_name(FuncId f) {
    switch (f) {
        case FuncId::abs: return "abs";
        case FuncId::min: return "min";
        case FuncId::max: return "max";
        case FuncId::exp: return "exp";
        case FuncId::log: return "log";
        case FuncId::sqrt: return "sqrt";
        case FuncId::step: return "step";
        case FuncId::sin: return "sin";
        case FuncId::cos: return "cos";
    }
    return "?";
}

struct ExprNode {
    NodeKind kind{};
    double value = 0.0;  // number
    int var = -1;        // variable index
    FuncId func{};       // call
    int a = -1, b = -1;  // child node ids
};

// Immutable after parsing; safe for concurrent read-only evaluation.
class PotentialExpr {
public:
    PotentialExpr() = default;

    static PotentialExpr parse(const std::string& text, int dim);

    // Builds max(v, 0) / max(-v, 0) on top of the existing tree.
    PotentialExpr positive_part() const;
    PotentialExpr negative_part() const;

    double eval(std::span<const double> point) const;
    double eval(double x) const { return eval(std::span<const double>(&x, 1)); }

    std::string str() const { return print_node(root_, 0); }
    int dim() const { return dim_; }
    bool structurally_equal(const PotentialExpr& other) const {
        return dim_ == other.dim_ && node_equal(root_, other, other.root_);
    }

private:
    std::vector<ExprNode> nodes_;
    int root_ = -1;
    int dim_ = 0;

    friend class ExprParser;

    int add_node(ExprNode n) {
        nodes_.push_back(n);
        return static_cast<int>(nodes_.size()) - 1;
    }

    double eval_node(int id, std::span<const double> pt) const;
    std::string print_node(int id, int parent_prec) const;
    bool node_equal(int id, const PotentialExpr& other, int oid) const;
    [[noreturn]] void fail(int id, const std::string& msg) const {
        throw EvalError(msg, print_node(id, 0));
    }
    double checked(int id, double v) const {
        if (!std::isfinite(v)) fail(id, "non-finite value");
        return v;
    }
};

namespace detail {
inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    std::string s(buf);
    // shortest representation that round-trips
    for (int prec = 1; prec < 17; ++prec) {
        char b2[40];
        std::snprintf(b2, sizeof(b2), "%.*g", prec, v);
        if (std::strtod(b2, nullptr) == v) return std::string(b2);
    }
    return s;
}
}  // namespace detail

class ExprParser {
public:
    ExprParser(const std::string& text, int dim) : text_(text), dim_(dim) {}

    PotentialExpr run() {
        if (dim_ < 1 || dim_ > 10) throw ParseError("dim must be in 1..10", 0);
        out_.dim_ = dim_;
        skip_ws();
        out_.root_ = parse_expr();
        skip_ws();
        if (pos_ != text_.size()) throw ParseError("unexpected trailing input", pos_);
        if (out_.root_ < 0) throw ParseError("empty expression", 0);
        return std::move(out_);
    }

private:
    const std::string& text_;
    int dim_;
    std::size_t pos_ = 0;
    PotentialExpr out_;

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }
    bool eat(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }
    char peek() {
        skip_ws();
        return pos_ < text_.size() ? text_[pos_] : '\0';
    }

    int parse_expr() {
        int lhs = parse_term();
        for (;;) {
            if (eat('+')) {
                int rhs = parse_term();
                lhs = out_.add_node({.kind = NodeKind::add, .a = lhs, .b = rhs});
            } else if (eat('-')) {
                int rhs = parse_term();
                lhs = out_.add_node({.kind = NodeKind::sub, .a = lhs, .b = rhs});
            } else {
                return lhs;
            }
        }
    }

    int parse_term() {
        int lhs = parse_factor();
        for (;;) {
            if (eat('*')) {
                int rhs = parse_factor();
                lhs = out_.add_node({.kind = NodeKind::mul, .a = lhs, .b = rhs});
            } else if (eat('/')) {
                int rhs = parse_factor();
                lhs = out_.add_node({.kind = NodeKind::div, .a = lhs, .b = rhs});
            } else {
                return lhs;
            }
        }
    }

    int parse_factor() {
        if (eat('-')) {
            int c = parse_factor();
            return out_.add_node({.kind = NodeKind::neg, .a = c});
        }
        if (eat('+')) return parse_factor();
        return parse_power();
    }

    // '^' is right-associative; the exponent is a factor so that e.g. 2^-3
    // and a^b^c parse without parentheses.
    int parse_power() {
        int base = parse_atom();
        if (eat('^')) {
            int ex = parse_factor();
            return out_.add_node({.kind = NodeKind::pow, .a = base, .b = ex});
        }
        return base;
    }

    int parse_atom() {
        skip_ws();
        if (pos_ >= text_.size()) throw ParseError("unexpected end of input", pos_);
        char c = text_[pos_];
        if (c == '(') {
            ++pos_;
            int e = parse_expr();
            if (!eat(')')) throw ParseError("expected ')'", pos_);
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_ident();
        throw ParseError(std::string("unexpected character '") + c + "'", pos_);
    }

    int parse_number() {
        const char* begin = text_.c_str() + pos_;
        char* end = nullptr;
        double v = std::strtod(begin, &end);
        if (end == begin) throw ParseError("malformed number", pos_);
        pos_ += static_cast<std::size_t>(end - begin);
        if (!std::isfinite(v)) throw ParseError("number literal overflows", pos_);
        return out_.add_node({.kind = NodeKind::number, .value = v});
    }

    int parse_ident() {
        std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
            ++pos_;
        std::string name = text_.substr(start, pos_ - start);
        if (name.size() == 2 && name[0] == 'x' && std::isdigit(static_cast<unsigned char>(name[1]))) {
            int idx = name[1] - '0';
            if (idx >= dim_)
                throw ParseError("variable " + name + " out of range for dim " + std::to_string(dim_), start);
            return out_.add_node({.kind = NodeKind::variable, .var = idx});
        }
        static const std::pair<const char*, FuncId> funcs[] = {
            {"abs", FuncId::abs}, {"min", FuncId::min},   {"max", FuncId::max},
            {"exp", FuncId::exp}, {"log", FuncId::log},   {"sqrt", FuncId::sqrt},
            {"step", FuncId::step}, {"sin", FuncId::sin}, {"cos", FuncId::cos},
        };
        for (auto& [fname, fid] : funcs) {
            if (name == fname) {
                if (!eat('(')) throw ParseError("expected '(' after " + name, pos_);
                int a = parse_expr();
                int b = -1;
                bool binary = (fid == FuncId::min || fid == FuncId::max);
                if (binary) {
                    if (!eat(',')) throw ParseError(name + " takes two arguments", pos_);
                    b = parse_expr();
                } else if (peek() == ',') {
                    throw ParseError(name + " takes one argument", pos_);
                }
                if (!eat(')')) throw ParseError("expected ')'", pos_);
                return out_.add_node({.kind = NodeKind::call, .func = fid, .a = a, .b = b});
            }
        }
        throw ParseError("unknown identifier '" + name + "'", start);
    }
};

inline PotentialExpr PotentialExpr::parse(const std::string& text, int dim) {
    return ExprParser(text, dim).run();
}

inline double PotentialExpr::eval_node(int id, std::span<const double> pt) const {
    const ExprNode& n = nodes_[static_cast<std::size_t>(id)];
    switch (n.kind) {
        case NodeKind::number: return n.value;
        case NodeKind::variable: return pt[static_cast<std::size_t>(n.var)];
        case NodeKind::neg: return -eval_node(n.a, pt);
        case NodeKind::add: return checked(id, eval_node(n.a, pt) + eval_node(n.b, pt));
        case NodeKind::sub: return checked(id, eval_node(n.a, pt) - eval_node(n.b, pt));
        case NodeKind::mul: return checked(id, eval_node(n.a, pt) * eval_node(n.b, pt));
        case NodeKind::div: {
            double den = eval_node(n.b, pt);
            if (den == 0.0) fail(id, "division by zero");
            return checked(id, eval_node(n.a, pt) / den);
        }
        case NodeKind::pow: {
            double base = eval_node(n.a, pt);
            double ex = eval_node(n.b, pt);
            if (base == 0.0 && ex < 0.0) fail(id, "zero raised to negative power");
            if (base < 0.0 && ex != std::floor(ex)) fail(id, "non-integer power of negative base");
            return checked(id, std::pow(base, ex));
        }
        case NodeKind::call: {
            double a = eval_node(n.a, pt);
            switch (n.func) {
                case FuncId::abs: return std::fabs(a);
                case FuncId::min: return std::fmin(a, eval_node(n.b, pt));
                case FuncId::max: return std::fmax(a, eval_node(n.b, pt));
                case FuncId::exp: return checked(id, std::exp(a));
                case FuncId::log:
                    if (a <= 0.0) fail(id, "log of non-positive value");
                    return checked(id, std::log(a));
                case FuncId::sqrt:
                    if (a < 0.0) fail(id, "sqrt of negative value");
                    return std::sqrt(a);
                case FuncId::step: return a > 0.0 ? 1.0 : 0.0;
                case FuncId::sin: return std::sin(a);
                case FuncId::cos: return std::cos(a);
            }
            fail(id, "bad function id");
        }
    }
    fail(id, "bad node kind");
}

inline double PotentialExpr::eval(std::span<const double> point) const {
    if (static_cast<int>(point.size()) != dim_)
        throw EvalError("point has dimension " + std::to_string(point.size()) + ", expected " +
                            std::to_string(dim_),
                        "<root>");
    return eval_node(root_, point);
}

// Precedence: add/sub 1, mul/div 2, neg 3, pow 4, atoms 5.
inline std::string PotentialExpr::print_node(int id, int parent_prec) const {
    const ExprNode& n = nodes_[static_cast<std::size_t>(id)];
    std::string s;
    int prec = 5;
    switch (n.kind) {
        case NodeKind::number: s = detail::fmt_double(n.value); break;
        case NodeKind::variable: s = "x" + std::to_string(n.var); break;
        case NodeKind::neg:
            prec = 3;
            s = "-" + print_node(n.a, prec);
            break;
        case NodeKind::add:
            prec = 1;
            s = print_node(n.a, prec) + " + " + print_node(n.b, prec + 1);
            break;
        case NodeKind::sub:
            prec = 1;
            s = print_node(n.a, prec) + " - " + print_node(n.b, prec + 1);
            break;
        case NodeKind::mul:
            prec = 2;
            s = print_node(n.a, prec) + "*" + print_node(n.b, prec + 1);
            break;
        case NodeKind::div:
            prec = 2;
            s = print_node(n.a, prec) + "/" + print_node(n.b, prec + 1);
            break;
        case NodeKind::pow:
            prec = 4;
            // left operand needs parens even at equal precedence (right assoc)
            s = print_node(n.a, prec + 1) + "^" + print_node(n.b, prec);
            break;
        case NodeKind::call:
            s = std::string(func_name(n.func)) + "(" + print_node(n.a, 0);
            if (n.b >= 0) s += ", " + print_node(n.b, 0);
            s += ")";
            break;
    }
    if (prec < parent_prec) return "(" + s + ")";
    return s;
}

inline bool PotentialExpr::node_equal(int id, const PotentialExpr& other, int oid) const {
    const ExprNode& a = nodes_[static_cast<std::size_t>(id)];
    const ExprNode& b = other.nodes_[static_cast<std::size_t>(oid)];
    if (a.kind != b.kind) return false;
    switch (a.kind) {
        case NodeKind::number: return a.value == b.value;
        case NodeKind::variable: return a.var == b.var;
        case NodeKind::neg: return node_equal(a.a, other, b.a);
        case NodeKind::call:
            if (a.func != b.func) return false;
            if (!node_equal(a.a, other, b.a)) return false;
            if ((a.b >= 0) != (b.b >= 0)) return false;
            return a.b < 0 || node_equal(a.b, other, b.b);
        default: return node_equal(a.a, other, b.a) && node_equal(a.b, other, b.b);
    }
}

inline PotentialExpr PotentialExpr::positive_part() const {
    PotentialExpr r = *this;
    int zero = r.add_node({.kind = NodeKind::number, .value = 0.0});
    r.root_ = r.add_node({.kind = NodeKind::call, .func = FuncId::max, .a = root_, .b = zero});
    return r;
}

inline PotentialExpr PotentialExpr::negative_part() const {
    PotentialExpr r = *this;
    int neg = r.add_node({.kind = NodeKind::neg, .a = root_});
    int zero = r.add_node({.kind = NodeKind::number, .value = 0.0});
    r.root_ = r.add_node({.kind = NodeKind::call, .func = FuncId::max, .a = neg, .b = zero});
    return r;
}

// A named potential with an optional evaluation cap. The cap applies to the
// positive part only: sampled value is min(V, clamp_max), which leaves the
// sign and the negative part untouched (clamp_max > 0).
struct PotentialSpec {
    PotentialExpr expr;
    std::optional<double> clamp_max;
    std::string name;

    int dim() const { return expr.dim(); }
    double eval(std::span<const double> p) const { return expr.eval(p); }
    double eval(double x) const { return expr.eval(x); }
    double eval_clamped(std::span<const double> p) const {
        double v = expr.eval(p);
        if (clamp_max && v > *clamp_max) return *clamp_max;
        return v;
    }
    double eval_clamped(double x) const { return eval_clamped(std::span<const double>(&x, 1)); }

    nlohmann::json to_json() const {
        nlohmann::json j{{"name", name}, {"dim", expr.dim()}, {"expr", expr.str()}};
        if (clamp_max) j["clamp_max"] = *clamp_max;
        return j;
    }
    static PotentialSpec from_json(const nlohmann::json& j) {
        PotentialSpec s;
        s.name = j.value("name", "");
        s.expr = PotentialExpr::parse(j.at("expr").get<std::string>(), j.at("dim").get<int>());
        if (j.contains("clamp_max")) {
            s.clamp_max = j["clamp_max"].get<double>();
            if (*s.clamp_max <= 0) throw std::runtime_error("clamp_max must be > 0");
        }
        return s;
    }
};

namespace detail {
// V = K*(1 - sum_k 1[|x - 4^k| < 2^-k]), K = 100; holes shrink while their
// centers escape, so sum_k |hole_k|^2 < infinity and the p=1 omega integral
// converges. k runs 1..6, enough to cover probe radii up to ~4000.
inline std::string bump_holes_text() {
    std::string s = "100*(1";
    for (int k = 1; k <= 6; ++k) {
        double c = std::pow(4.0, k), r = std::pow(2.0, -k);
        s += " - step(" + fmt_double(r) + " - abs(x0 - " + fmt_double(c) + "))";
    }
    s += ")";
    return s;
}
}  // namespace detail

inline std::vector<std::string> builtin_names() {
    return {"zero", "harmonic", "cross_xy", "bump_holes", "half_space_flat"};
}

// Built-in potential families. `dim` selects the dimension where the family
// allows it (zero, harmonic); 0 means the family default. Names of the form
// harmonic_3 / zero_2 fix the dimension in the name itself.
inline PotentialSpec builtin(const std::string& name_in, int dim = 0) {
    std::string name = name_in;
    if (auto us = name.rfind('_'); us != std::string::npos && us + 2 == name.size() &&
                                   std::isdigit(static_cast<unsigned char>(name[us + 1]))) {
        std::string head = name.substr(0, us);
        if (head == "zero" || head == "harmonic") {
            dim = name[us + 1] - '0';
            name = head;
        }
    }
    PotentialSpec s;
    s.name = name;
    if (name == "zero") {
        int n = dim > 0 ? dim : 1;
        s.expr = PotentialExpr::parse("0", n);
    } else if (name == "harmonic") {
        int n = dim > 0 ? dim : 1;
        std::string t = "x0^2";
        for (int i = 1; i < n; ++i) t += " + x" + std::to_string(i) + "^2";
        s.expr = PotentialExpr::parse(t, n);
    } else if (name == "cross_xy") {
        s.expr = PotentialExpr::parse("x0^2*x1^2", 2);
    } else if (name == "bump_holes") {
        s.expr = PotentialExpr::parse(detail::bump_holes_text(), 1);
    } else if (name == "half_space_flat") {
        int n = dim > 0 ? dim : 1;
        s.expr = PotentialExpr::parse("100*step(x0)", n);
    } else {
        throw std::runtime_error("unknown builtin potential '" + name_in + "'");
    }
    return s;
}

}  // namespace spectral
