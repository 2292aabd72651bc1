#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "addsel/basis.hpp"
#include "addsel/error.hpp"
#include "addsel/population.hpp"
#include "addsel/subsets.hpp"

namespace addsel {

/// Ground-truth sparse additive model Y = sum_{j in J0} f_j(X_j) + sigma * z.
struct AdditiveModel {
    int q = 0;
    Subset J0;                               ///< active covariates, sorted
    std::vector<std::vector<double>> theta;  ///< theta[j][k-1] multiplies phi_k; empty for inactive j
    double sigma = 0.0;
    std::vector<double> alpha;  ///< Sobolev smoothness per covariate
    std::vector<double> K;      ///< Sobolev radius per covariate

    int s() const { return static_cast<int>(J0.size()); }

    const std::vector<double>& coefficients(int j) const { return theta.at(static_cast<std::size_t>(j)); }

    double component(int j, double x) const { return eval_series(coefficients(j), x); }

    /// Noiseless regression function at one design row.
    template <class Row>
    double regression(const Row& x) const {
        double v = 0.0;
        for (int j : J0) v += component(j, x(j));
        return v;
    }

    /// ||f_j||^2 under the uniform density (Parseval).
    double norm_sq_uniform(int j) const {
        double acc = 0.0;
        for (double t : coefficients(j)) acc += t * t;
        return acc;
    }

    /// sum_k (2 pi k)^{2 alpha} (theta_{2k}^2 + theta_{2k+1}^2).
    double sobolev_sum(int j) const {
        const auto& th = coefficients(j);
        const double a = alpha.at(static_cast<std::size_t>(j));
        double acc = 0.0;
        for (std::size_t idx = 1; idx < th.size(); ++idx) {
            const double freq = static_cast<double>((idx + 1) / 2);
            acc += std::pow(2.0 * std::numbers::pi * freq, 2.0 * a) * th[idx] * th[idx];
        }
        return acc;
    }

    /// Energy of theta_j beyond basis index m (uniform density L^2 truncation error).
    double tail_energy(int j, int m) const {
        const auto& th = coefficients(j);
        double acc = 0.0;
        for (std::size_t idx = static_cast<std::size_t>(std::max(m, 0)); idx < th.size(); ++idx) acc += th[idx] * th[idx];
        return acc;
    }

    /// Squared l1 tail sum (sum_{k>m} |theta_k|)^2, the sup-norm truncation bound.
    double tail_l1_sq(int j, int m) const {
        const auto& th = coefficients(j);
        double acc = 0.0;
        for (std::size_t idx = static_cast<std::size_t>(std::max(m, 0)); idx < th.size(); ++idx) acc += std::abs(th[idx]);
        return acc * acc;
    }

    void validate() const {
        if (static_cast<int>(theta.size()) != q || static_cast<int>(alpha.size()) != q || static_cast<int>(K.size()) != q)
            throw ValidationError("AdditiveModel: per-covariate vectors must have length q");
        if (!(sigma >= 0.0)) throw ValidationError("AdditiveModel: sigma must be >= 0");
        for (int j = 0; j < q; ++j) {
            const bool active = contains(J0, j);
            if (!active && !theta[static_cast<std::size_t>(j)].empty())
                throw ValidationError("AdditiveModel: inactive covariate " + std::to_string(j) + " has coefficients");
            if (active && norm_sq_uniform(j) <= 0.0)
                throw ValidationError("AdditiveModel: active covariate " + std::to_string(j) + " has zero norm");
            if (!theta[static_cast<std::size_t>(j)].empty() && theta[static_cast<std::size_t>(j)][0] != 0.0)
                throw ValidationError("AdditiveModel: phi_1 coefficient must be 0 (centered components)");
        }
    }
};

/// The active components f_j, j in J0, as population features.
inline std::vector<Feature> component_features(const AdditiveModel& model) {
    std::vector<Feature> out;
    for (int j : model.J0) {
        const auto* th = &model.coefficients(j);
        out.push_back({j, [th](double x) { return eval_series(*th, x); }, false});
    }
    return out;
}

/// s x s Gram <f_i, f_j> of the active components under the design law.
inline Matrix component_gram(const AdditiveModel& model, const DesignLaw& law) {
    return function_gram(law, component_features(model));
}

}  // namespace addsel
