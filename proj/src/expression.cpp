#include "terrace/expression.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>

#include "terrace/errors.hpp"

namespace terrace {

namespace {

[[noreturn]] void fail(const std::string& text, std::size_t pos, const std::string& why) {
    throw ConfigError("expression error at position " + std::to_string(pos) + " in \"" + text +
                      "\": " + why);
}

}  // namespace

class ExpressionParser {
public:
    explicit ExpressionParser(const std::string& text) : text_(text) {}

    std::vector<Expression::Instr> run() {
        std::vector<Expression::Instr> out;
        parseExpr(out);
        skipSpace();
        if (pos_ != text_.size()) fail(text_, pos_, "trailing input");
        if (out.empty()) fail(text_, 0, "empty expression");
        return out;
    }

private:
    using Instr = Expression::Instr;
    using Op = Expression::Op;

    const std::string& text_;
    std::size_t pos_ = 0;

    void skipSpace() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool consume(char c) {
        skipSpace();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    char peek() {
        skipSpace();
        return pos_ < text_.size() ? text_[pos_] : '\0';
    }

    void parseExpr(std::vector<Instr>& out) {
        parseTerm(out);
        for (;;) {
            if (consume('+')) {
                parseTerm(out);
                out.push_back({Op::Add, 0.0});
            } else if (consume('-')) {
                parseTerm(out);
                out.push_back({Op::Sub, 0.0});
            } else {
                return;
            }
        }
    }

    void parseTerm(std::vector<Instr>& out) {
        parseUnary(out);
        for (;;) {
            if (consume('*')) {
                parseUnary(out);
                out.push_back({Op::Mul, 0.0});
            } else if (consume('/')) {
                parseUnary(out);
                out.push_back({Op::Div, 0.0});
            } else {
                return;
            }
        }
    }

    void parseUnary(std::vector<Instr>& out) {
        if (consume('-')) {
            parseUnary(out);
            out.push_back({Op::Neg, 0.0});
            return;
        }
        (void)consume('+');
        parsePower(out);
    }

    void parsePower(std::vector<Instr>& out) {
        parsePrimary(out);
        if (consume('^')) {
            // Right associative: a^b^c = a^(b^c). The exponent may itself
            // carry a unary sign, e.g. u^-2.
            parseUnary(out);
            out.push_back({Op::Pow, 0.0});
        }
    }

    void parsePrimary(std::vector<Instr>& out) {
        skipSpace();
        if (pos_ >= text_.size()) fail(text_, pos_, "unexpected end of input");
        char c = text_[pos_];

        if (c == '(') {
            ++pos_;
            parseExpr(out);
            if (!consume(')')) fail(text_, pos_, "missing ')'");
            return;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            const char* begin = text_.c_str() + pos_;
            char* end = nullptr;
            double v = std::strtod(begin, &end);
            if (end == begin) fail(text_, pos_, "bad number");
            pos_ += static_cast<std::size_t>(end - begin);
            out.push_back({Op::PushConst, v});
            return;
        }
        if (std::isalpha(static_cast<unsigned char>(c))) {
            std::size_t start = pos_;
            while (pos_ < text_.size() &&
                   std::isalpha(static_cast<unsigned char>(text_[pos_])))
                ++pos_;
            std::string word = text_.substr(start, pos_ - start);
            if (word == "t") {
                out.push_back({Op::PushT, 0.0});
                return;
            }
            if (word == "u") {
                out.push_back({Op::PushU, 0.0});
                return;
            }
            Op fn;
            if (word == "sin") fn = Op::Sin;
            else if (word == "cos") fn = Op::Cos;
            else if (word == "exp") fn = Op::Exp;
            else fail(text_, start, "unknown identifier '" + word + "'");
            if (!consume('(')) fail(text_, pos_, "expected '(' after '" + word + "'");
            parseExpr(out);
            if (!consume(')')) fail(text_, pos_, "missing ')'");
            out.push_back({fn, 0.0});
            return;
        }
        fail(text_, pos_, std::string("unexpected character '") + c + "'");
    }
};

Expression Expression::parse(const std::string& text) {
    Expression e;
    e.text_ = text;
    e.program_ = ExpressionParser(text).run();
    return e;
}

double Expression::eval(double t, double u) const {
    // The stack never exceeds the program length; a small fixed buffer
    // avoids allocation on the hot path.
    double stack[64];
    std::size_t top = 0;
    auto push = [&](double v) {
        if (top >= 64) throw ConfigError("expression too deep: " + text_);
        stack[top++] = v;
    };
    for (const Instr& in : program_) {
        switch (in.op) {
            case Op::PushConst: push(in.value); break;
            case Op::PushT: push(t); break;
            case Op::PushU: push(u); break;
            case Op::Add: stack[top - 2] += stack[top - 1]; --top; break;
            case Op::Sub: stack[top - 2] -= stack[top - 1]; --top; break;
            case Op::Mul: stack[top - 2] *= stack[top - 1]; --top; break;
            case Op::Div: stack[top - 2] /= stack[top - 1]; --top; break;
            case Op::Pow:
                stack[top - 2] = std::pow(stack[top - 2], stack[top - 1]);
                --top;
                break;
            case Op::Neg: stack[top - 1] = -stack[top - 1]; break;
            case Op::Sin: stack[top - 1] = std::sin(stack[top - 1]); break;
            case Op::Cos: stack[top - 1] = std::cos(stack[top - 1]); break;
            case Op::Exp: stack[top - 1] = std::exp(stack[top - 1]); break;
        }
    }
    return stack[0];
}

}  // namespace terrace
