#pragma once

#include <span>
#include <string>
#include <vector>

namespace terrace {

/// A word over {+, -} with strictly alternating letters, recording the
/// sign pattern of a sampled profile after dead-band filtering.
struct SignWord {
    std::string letters;

    bool operator==(const SignWord&) const = default;
};

/// Number of sign changes of v after discarding entries with |v_i| <= tol.
/// Returns 0 when the survivors never change sign, -1 when nothing survives.
int zero_number(std::span<const double> v, double tol = 1e-9);

/// The sign pattern of v: one letter per constant-sign block of the
/// surviving entries. Empty word when nothing survives. The word length is
/// zero_number(v) + 1 whenever the zero number is nonnegative.
SignWord sgn_word(std::span<const double> v, double tol = 1e-9);

/// Whether a can be obtained from b by deleting letters (order preserved).
/// The empty word is a subword of everything; the relation is reflexive
/// and transitive.
bool is_subword(const SignWord& a, const SignWord& b);

struct SteepnessRow {
    int snapshot_index = 0;
    int k_shift = 0;
    int zero_number = -1;
    SignWord word;
    bool violation = false;  // word is not a subword of "+-"
};

/// Sign words of u1(., t_j) - u2(., t_{j+k}) over a range of period shifts
/// k, on a common grid. A violation row falsifies the expected one-switch
/// (steeper-than) ordering between the two profiles.
std::vector<SteepnessRow> steepness_violations(
    std::span<const std::vector<double>> u1_snapshots,
    std::span<const std::vector<double>> u2_snapshots, int max_shift, double tol = 1e-9);

}  // namespace terrace
