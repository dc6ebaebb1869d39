#pragma once

#include <string>
#include <vector>

namespace terrace {

/// A compiled arithmetic expression in the variables t and u.
///
/// Grammar: + - * / ^ (right-associative power), unary minus, parentheses,
/// the functions sin, cos, exp, numeric literals, and the variables t, u.
/// Parsing happens once; evaluation runs a small stack program.
class Expression {
public:
    static Expression parse(const std::string& text);

    double eval(double t, double u) const;

    const std::string& text() const { return text_; }

private:
    enum class Op : unsigned char {
        PushConst, PushT, PushU,
        Add, Sub, Mul, Div, Pow, Neg,
        Sin, Cos, Exp,
    };
    struct Instr {
        Op op;
        double value = 0.0;
    };

    std::string text_;
    std::vector<Instr> program_;

    friend class ExpressionParser;
};

}  // namespace terrace
