#include "mtlab/expr.hpp"

#include "mtlab/error.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <vector>

namespace mtlab {

struct Expr::Node {
    enum Kind { Number, X, Y, Neg, Add, Sub, Mul, Div, Pow, Call } kind;
    double value = 0.0;
    double (*fn)(double) = nullptr;
    std::vector<std::shared_ptr<const Node>> args;

    double eval(double x, double y) const {
        switch (kind) {
            case Number: return value;
            case X: return x;
            case Y: return y;
            case Neg: return -args[0]->eval(x, y);
            case Add: return args[0]->eval(x, y) + args[1]->eval(x, y);
            case Sub: return args[0]->eval(x, y) - args[1]->eval(x, y);
            case Mul: return args[0]->eval(x, y) * args[1]->eval(x, y);
            case Div: return args[0]->eval(x, y) / args[1]->eval(x, y);
            case Pow: return std::pow(args[0]->eval(x, y), args[1]->eval(x, y));
            case Call: return fn(args[0]->eval(x, y));
        }
        return 0.0;
    }
};

namespace {

using NodePtr = std::shared_ptr<const Expr::Node>;

// expr   := term (('+' | '-') term)*
// term   := unary (('*' | '/') unary)*
// unary  := '-' unary | power
// power  := atom ('^' unary)?
// atom   := number | name | name '(' expr ')' | '(' expr ')'
class Parser {
public:
    explicit Parser(const std::string& s) : s_(s) {}

    NodePtr run() {
        NodePtr n = expr();
        skip();
        if (pos_ != s_.size()) fail("unexpected character");
        return n;
    }

private:
    [[noreturn]] void fail(const std::string& what) const {
        throw ValidationError("expression '" + s_ + "': " + what + " at column " + std::to_string(pos_ + 1));
    }
    void skip() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    bool eat(char c) {
        skip();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }
    static NodePtr make(Expr::Node::Kind k, std::vector<NodePtr> args = {}, double v = 0.0) {
        auto n = std::make_shared<Expr::Node>();
        n->kind = k;
        n->args = std::move(args);
        n->value = v;
        return n;
    }

    NodePtr expr() {
        NodePtr l = term();
        for (;;) {
            if (eat('+')) l = make(Expr::Node::Add, {l, term()});
            else if (eat('-')) l = make(Expr::Node::Sub, {l, term()});
            else return l;
        }
    }
    NodePtr term() {
        NodePtr l = unary();
        for (;;) {
            if (eat('*')) l = make(Expr::Node::Mul, {l, unary()});
            else if (eat('/')) l = make(Expr::Node::Div, {l, unary()});
            else return l;
        }
    }
    NodePtr unary() {
        if (eat('-')) return make(Expr::Node::Neg, {unary()});
        if (eat('+')) return unary();
        return power();
    }
    NodePtr power() {
        NodePtr base = atom();
        if (eat('^')) return make(Expr::Node::Pow, {base, unary()});
        return base;
    }
    NodePtr atom() {
        skip();
        if (pos_ >= s_.size()) fail("unexpected end");
        if (eat('(')) {
            NodePtr n = expr();
            if (!eat(')')) fail("missing ')'");
            return n;
        }
        const char* begin = s_.c_str() + pos_;
        if (std::isdigit(static_cast<unsigned char>(*begin)) || *begin == '.') {
            char* end = nullptr;
            double v = std::strtod(begin, &end);
            if (end == begin) fail("bad number");
            pos_ += static_cast<std::size_t>(end - begin);
            return make(Expr::Node::Number, {}, v);
        }
        std::size_t start = pos_;
        while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
        std::string name = s_.substr(start, pos_ - start);
        if (name.empty()) fail("expected a number, name or '('");
        if (name == "x") return make(Expr::Node::X);
        if (name == "y") return make(Expr::Node::Y);
        if (name == "pi") return make(Expr::Node::Number, {}, std::numbers::pi);
        double (*fn)(double) = nullptr;
        if (name == "exp") fn = [](double v) { return std::exp(v); };
        else if (name == "log") fn = [](double v) { return std::log(v); };
        else if (name == "sqrt") fn = [](double v) { return std::sqrt(v); };
        else if (name == "sin") fn = [](double v) { return std::sin(v); };
        else if (name == "cos") fn = [](double v) { return std::cos(v); };
        else if (name == "tan") fn = [](double v) { return std::tan(v); };
        else if (name == "tanh") fn = [](double v) { return std::tanh(v); };
        else if (name == "abs") fn = [](double v) { return std::abs(v); };
        else {
            pos_ = start;
            fail("unknown name '" + name + "'");
        }
        if (!eat('(')) fail("expected '(' after " + name);
        NodePtr arg = expr();
        if (!eat(')')) fail("missing ')'");
        auto n = std::make_shared<Expr::Node>();
        n->kind = Expr::Node::Call;
        n->fn = fn;
        n->args = {arg};
        return n;
    }

    const std::string& s_;
    std::size_t pos_ = 0;
};

}  // namespace

Expr Expr::parse(const std::string& text) {
    Expr e;
    e.root_ = Parser(text).run();
    e.text_ = text;
    return e;
}

double Expr::operator()(double x, double y) const { return root_->eval(x, y); }

}  // namespace mtlab
