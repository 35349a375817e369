#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <random>
#include <string>
#include <vector>

#include "fpv/chain.hpp"

namespace fpv::test {

/// Random validated chain with the halt state at a random index. Every
/// transient row keeps some direct escape probability so lambda2 < 1.
inline ChainModel random_chain(std::mt19937_64& rng, Eigen::Index states,
                               bool dense_positive = false) {
    std::uniform_real_distribution<double> weight(0.05, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    ChainModel chain;
    chain.transition = Eigen::MatrixXd::Zero(states, states);
    for (Eigen::Index i = 0; i < states; ++i) {
        chain.state_names.push_back("s" + std::to_string(i));
    }
    chain.halt_index =
        static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(states));
    chain.transition(chain.halt_index, chain.halt_index) = 1.0;
    for (Eigen::Index i = 0; i < states; ++i) {
        if (i == chain.halt_index) continue;
        Eigen::VectorXd row = Eigen::VectorXd::Zero(states);
        for (Eigen::Index j = 0; j < states; ++j) {
            if (dense_positive || j == chain.halt_index || unit(rng) < 0.6) {
                row(j) = weight(rng);
            }
        }
        row /= row.sum();
        chain.transition.row(i) = row;
    }
    return validate_chain(std::move(chain));
}

/// Random value matrix with entries in [0, 10).
inline Eigen::MatrixXd random_value_matrix(std::mt19937_64& rng, Eigen::Index states) {
    std::uniform_real_distribution<double> value(0.0, 10.0);
    Eigen::MatrixXd out(states, states);
    for (Eigen::Index i = 0; i < states; ++i) {
        for (Eigen::Index j = 0; j < states; ++j) out(i, j) = value(rng);
    }
    return out;
}

/// Independent full eigen-decomposition oracle: largest eigenvalue modulus.
inline double spectral_radius_oracle(const Eigen::MatrixXd& a) {
    const Eigen::EigenSolver<Eigen::MatrixXd> solver(a, false);
    double radius = 0.0;
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        radius = std::max(radius, std::abs(solver.eigenvalues()(i)));
    }
    return radius;
}

/// Second-largest eigenvalue modulus from the same oracle.
inline double second_modulus_oracle(const Eigen::MatrixXd& a) {
    const Eigen::EigenSolver<Eigen::MatrixXd> solver(a, false);
    std::vector<double> mods;
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        mods.push_back(std::abs(solver.eigenvalues()(i)));
    }
    std::sort(mods.begin(), mods.end(), std::greater<>());
    return mods.size() >= 2 ? mods[1] : 0.0;
}

inline double rel_error(double got, double expected) {
    return std::abs(got - expected) / std::abs(expected);
}

}  // namespace fpv::test
