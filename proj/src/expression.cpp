#include "bsre/expression.hpp"

#include "bsre/errors.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <numbers>
#include <vector>

namespace bsre {

struct Expression::Node {
    enum class Op { Const, VarT, VarW, VarX, Neg, Add, Sub, Mul, Div, Pow, Sin, Cos, Exp, Log, Sqrt, Abs };
    Op op = Op::Const;
    double value = 0.0;
    std::vector<std::shared_ptr<const Node>> args;

    double eval(double t, double w, double x) const {
        switch (op) {
            case Op::Const: return value;
            case Op::VarT: return t;
            case Op::VarW: return w;
            case Op::VarX: return x;
            case Op::Neg: return -args[0]->eval(t, w, x);
            case Op::Add: return args[0]->eval(t, w, x) + args[1]->eval(t, w, x);
            case Op::Sub: return args[0]->eval(t, w, x) - args[1]->eval(t, w, x);
            case Op::Mul: return args[0]->eval(t, w, x) * args[1]->eval(t, w, x);
            case Op::Div: return args[0]->eval(t, w, x) / args[1]->eval(t, w, x);
            case Op::Pow: return std::pow(args[0]->eval(t, w, x), args[1]->eval(t, w, x));
            case Op::Sin: return std::sin(args[0]->eval(t, w, x));
            case Op::Cos: return std::cos(args[0]->eval(t, w, x));
            case Op::Exp: return std::exp(args[0]->eval(t, w, x));
            case Op::Log: return std::log(args[0]->eval(t, w, x));
            case Op::Sqrt: return std::sqrt(args[0]->eval(t, w, x));
            case Op::Abs: return std::fabs(args[0]->eval(t, w, x));
        }
        return 0.0;
    }
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;
using Op = Expression::Node::Op;

NodePtr make(Op op, double value = 0.0, std::vector<NodePtr> args = {}) {
    auto n = std::make_shared<Expression::Node>();
    n->op = op;
    n->value = value;
    n->args = std::move(args);
    return n;
}

class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    NodePtr parse() {
        NodePtr e = expr();
        skip();
        if (pos_ != text_.size()) fail("unexpected trailing input");
        return e;
    }

    bool uses_t = false, uses_w = false, uses_x = false;

private:
    [[noreturn]] void fail(const std::string& what) const {
        throw InvalidConfiguration("expression '" + std::string(text_) + "': " + what + " at offset "
                                   + std::to_string(pos_));
    }

    void skip() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    NodePtr expr() {
        NodePtr lhs = term();
        for (;;) {
            if (accept('+')) lhs = make(Op::Add, 0.0, {lhs, term()});
            else if (accept('-')) lhs = make(Op::Sub, 0.0, {lhs, term()});
            else return lhs;
        }
    }

    NodePtr term() {
        NodePtr lhs = unary();
        for (;;) {
            if (accept('*')) lhs = make(Op::Mul, 0.0, {lhs, unary()});
            else if (accept('/')) lhs = make(Op::Div, 0.0, {lhs, unary()});
            else return lhs;
        }
    }

    NodePtr unary() {
        if (accept('-')) return make(Op::Neg, 0.0, {unary()});
        if (accept('+')) return unary();
        return power();
    }

    NodePtr power() {
        NodePtr base = atom();
        if (accept('^')) return make(Op::Pow, 0.0, {base, unary()});
        return base;
    }

    NodePtr atom() {
        skip();
        if (pos_ >= text_.size()) fail("unexpected end of input");
        const char c = text_[pos_];
        if (c == '(') {
            ++pos_;
            NodePtr e = expr();
            if (!accept(')')) fail("expected ')'");
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            double v = 0.0;
            const char* begin = text_.data() + pos_;
            const char* end = text_.data() + text_.size();
            auto [ptr, ec] = std::from_chars(begin, end, v);
            if (ec != std::errc()) fail("malformed number");
            pos_ += static_cast<std::size_t>(ptr - begin);
            return make(Op::Const, v);
        }
        if (std::isalpha(static_cast<unsigned char>(c))) {
            const std::size_t start = pos_;
            while (pos_ < text_.size() && std::isalpha(static_cast<unsigned char>(text_[pos_]))) ++pos_;
            const std::string_view name = text_.substr(start, pos_ - start);
            if (name == "t") { uses_t = true; return make(Op::VarT); }
            if (name == "w") { uses_w = true; return make(Op::VarW); }
            if (name == "x") { uses_x = true; return make(Op::VarX); }
            if (name == "pi") return make(Op::Const, std::numbers::pi);
            Op op;
            if (name == "sin") op = Op::Sin;
            else if (name == "cos") op = Op::Cos;
            else if (name == "exp") op = Op::Exp;
            else if (name == "log") op = Op::Log;
            else if (name == "sqrt") op = Op::Sqrt;
            else if (name == "abs") op = Op::Abs;
            else fail("unknown identifier '" + std::string(name) + "'");
            if (!accept('(')) fail("expected '(' after function name");
            NodePtr arg = expr();
            if (!accept(')')) fail("expected ')'");
            return make(op, 0.0, {arg});
        }
        fail(std::string("unexpected character '") + c + "'");
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

}  // namespace

Expression Expression::parse(std::string_view text) {
    Parser p(text);
    Expression e;
    e.root_ = p.parse();
    e.source_ = std::string(text);
    e.uses_t_ = p.uses_t;
    e.uses_w_ = p.uses_w;
    e.uses_x_ = p.uses_x;
    return e;
}

Expression Expression::constant(double value) {
    Expression e;
    e.root_ = make(Op::Const, value);
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    e.source_ = ec == std::errc() ? std::string(buf, ptr) : std::to_string(value);
    return e;
}

double Expression::operator()(double t, double w, double x) const {
    return root_->eval(t, w, x);
}

}  // namespace bsre
