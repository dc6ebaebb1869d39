#include "terrace/signs.hpp"

#include <algorithm>
#include <cmath>

#include "terrace/errors.hpp"

namespace terrace {

int zero_number(std::span<const double> v, double tol) {
    int changes = -1;  // becomes 0 at the first survivor
    int last_sign = 0;
    for (double x : v) {
        if (std::abs(x) <= tol) continue;
        int sign = x > 0.0 ? 1 : -1;
        if (last_sign == 0) {
            changes = 0;
        } else if (sign != last_sign) {
            ++changes;
        }
        last_sign = sign;
    }
    return changes;
}

SignWord sgn_word(std::span<const double> v, double tol) {
    SignWord word;
    int last_sign = 0;
    for (double x : v) {
        if (std::abs(x) <= tol) continue;
        int sign = x > 0.0 ? 1 : -1;
        if (sign != last_sign) word.letters.push_back(sign > 0 ? '+' : '-');
        last_sign = sign;
    }
    return word;
}

bool is_subword(const SignWord& a, const SignWord& b) {
    std::size_t i = 0;
    for (char c : b.letters) {
        if (i < a.letters.size() && a.letters[i] == c) ++i;
    }
    return i == a.letters.size();
}

std::vector<SteepnessRow> steepness_violations(
    std::span<const std::vector<double>> u1_snapshots,
    std::span<const std::vector<double>> u2_snapshots, int max_shift, double tol) {
    if (max_shift < 0) throw ConfigError("steepness shift range must be nonnegative");
    static const SignWord kOneSwitch{"+-"};

    std::vector<SteepnessRow> rows;
    std::vector<double> diff;
    const int n1 = static_cast<int>(u1_snapshots.size());
    const int n2 = static_cast<int>(u2_snapshots.size());
    for (int j = 0; j < n1; ++j) {
        for (int k = -max_shift; k <= max_shift; ++k) {
            int j2 = j + k;
            if (j2 < 0 || j2 >= n2) continue;
            const auto& a = u1_snapshots[static_cast<std::size_t>(j)];
            const auto& b = u2_snapshots[static_cast<std::size_t>(j2)];
            std::size_t m = std::min(a.size(), b.size());
            diff.resize(m);
            for (std::size_t i = 0; i < m; ++i) diff[i] = a[i] - b[i];

            SteepnessRow row;
            row.snapshot_index = j;
            row.k_shift = k;
            row.zero_number = zero_number(diff, tol);
            row.word = sgn_word(diff, tol);
            row.violation = !is_subword(row.word, kOneSwitch);
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

}  // namespace terrace
