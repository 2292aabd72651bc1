#pragma once

// Subset helpers shared by the enumeration-heavy modules. Subsets are sorted
// vectors of 0-based covariate indices; enumeration is lexicographic on the
// sorted tuples.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "addsel/error.hpp"

namespace addsel {

using Subset = std::vector<int>;

inline std::string to_string(const Subset& s) {
    std::string out = "{";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "}";
}

inline bool contains(const Subset& s, int j) {
    return std::binary_search(s.begin(), s.end(), j);
}

inline bool is_subset_of(const Subset& a, const Subset& b) {
    return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

inline Subset set_union(const Subset& a, const Subset& b) {
    Subset out;
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

inline Subset set_difference(const Subset& a, const Subset& b) {
    Subset out;
    std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

inline Subset complement(const Subset& s, int q) {
    Subset out;
    for (int j = 0; j < q; ++j)
        if (!contains(s, j)) out.push_back(j);
    return out;
}

/// Total order used for deterministic tie-breaking: smaller cardinality, then lexicographic.
inline bool parsimony_less(const Subset& a, const Subset& b) {
    if (a.size() != b.size()) return a.size() < b.size();
    return a < b;
}

/// C(n, k) saturating at uint64 max.
inline std::uint64_t binomial_saturating(std::uint64_t n, std::uint64_t k) {
    if (k > n) return 0;
    k = std::min(k, n - k);
    std::uint64_t r = 1;
    for (std::uint64_t i = 1; i <= k; ++i) {
        // r * (n - k + i) / i is exact at every step
        const std::uint64_t num = n - k + i;
        const std::uint64_t g = std::gcd(r, i);
        const std::uint64_t r1 = r / g;
        const std::uint64_t i1 = i / g;
        const std::uint64_t num1 = num / i1;
        if (r1 > std::numeric_limits<std::uint64_t>::max() / num1)
            return std::numeric_limits<std::uint64_t>::max();
        r = r1 * num1;
    }
    return r;
}

/// Number of subsets of {0..q-1} with cardinality at most kmax (empty set included).
inline std::uint64_t count_subsets_up_to(int q, int kmax) {
    std::uint64_t total = 0;
    for (int k = 0; k <= std::min(kmax, q); ++k) {
        const auto c = binomial_saturating(static_cast<std::uint64_t>(q), static_cast<std::uint64_t>(k));
        if (c > std::numeric_limits<std::uint64_t>::max() - total)
            return std::numeric_limits<std::uint64_t>::max();
        total += c;
    }
    return total;
}

inline void check_budget(std::uint64_t count, std::uint64_t budget, const std::string& what,
                         const std::string& hint) {
    if (count > budget)
        throw BudgetExceeded(what + ": " + std::to_string(count) + " subsets exceed budget " +
                                 std::to_string(budget) + "; " + hint,
                             count, budget);
}

/// Calls `fn(subset)` for every k-subset of `pool` in lexicographic order.
/// `fn` may return false to stop the enumeration early.
template <class Fn>
bool for_each_combination(const std::vector<int>& pool, int k, Fn&& fn) {
    const int n = static_cast<int>(pool.size());
    if (k < 0 || k > n) return true;
    std::vector<int> pos(k);
    std::iota(pos.begin(), pos.end(), 0);
    Subset cur(k);
    while (true) {
        for (int i = 0; i < k; ++i) cur[i] = pool[pos[i]];
        if (!fn(static_cast<const Subset&>(cur))) return false;
        int i = k - 1;
        while (i >= 0 && pos[i] == n - k + i) --i;
        if (i < 0) return true;
        ++pos[i];
        for (int j = i + 1; j < k; ++j) pos[j] = pos[j - 1] + 1;
    }
}

/// Every subset of {0..q-1} with |J| <= kmax, grouped by size (0, 1, ...), lexicographic within a size.
template <class Fn>
void for_each_subset_up_to(int q, int kmax, Fn&& fn) {
    std::vector<int> pool(q);
    std::iota(pool.begin(), pool.end(), 0);
    for (int k = 0; k <= std::min(kmax, q); ++k)
        if (!for_each_combination(pool, k, fn)) return;
}

}  // namespace addsel
