#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "desert/basis.hpp"
#include "desert/data.hpp"

namespace desert {

// Logistic series score d(s, z, x) on the features of (S, Z, X) or of (Z, X).
struct ScoreModel {
    Basis basis;
    Eigen::VectorXd gamma;
    bool uses_s = true;
    int iterations = 0;
    double constraint = 0.0;  // MLC: achieved E[d(1,Z,X) - d(0,Z,X)]; LD: final disparity
    std::vector<std::string> warnings;

    double eval(int s, int z, const std::vector<double>& x) const;
    // Scores for every record of a scaled dataset.
    Eigen::VectorXd eval_rows(const Dataset& data) const;
};

// Basis over (S, Z, X) or (Z, X); binary columns enter at power 1.
BasisConfig baseline_basis(std::size_t covariate_dim, bool uses_s, int degree = 3,
                           int interaction_order = 2);

// Design matrix for the given inputs; `s_override` in {0, 1} replaces S.
Eigen::MatrixXd baseline_design(const Basis& basis, const Dataset& data, bool uses_s,
                                int s_override = -1);

// Unconstrained learner of Y on (S, Z, X).
ScoreModel fit_uml(const Dataset& data, int degree = 3, int interaction_order = 2);
// Fairness through unawareness: Y on (Z, X).
ScoreModel fit_ftu(const Dataset& data, int degree = 3, int interaction_order = 2);
// Likelihood on (S, Z, X) subject to mean[d(1,Z,X) - d(0,Z,X)] = 0, by an
// augmented Lagrangian; `tol` bounds the achieved constraint.
ScoreModel fit_mlc(const Dataset& data, int degree = 3, int interaction_order = 2,
                   double tol = 1e-5);
// Label debiasing by reweighting: a weighted logit of Y on (Z, X) with group
// weights tuned until the mean score gap across S is below `tol`.
ScoreModel fit_ld(const Dataset& data, int degree = 3, int interaction_order = 2,
                  double tol = 1e-3, int max_iter = 50);

}  // namespace desert
