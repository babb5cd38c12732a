#pragma once

#include <cmath>

namespace risksea {

template <typename Real>
inline Real sigmoid(Real x) {
    if (x >= 0) return Real(1) / (Real(1) + std::exp(-x));
    Real e = std::exp(x);
    return e / (Real(1) + e);
}

template <typename Real>
inline Real dot(const Real* a, const Real* b, int dim) {
    Real s = 0;
    for (int i = 0; i < dim; ++i) s += a[i] * b[i];
    return s;
}

// SGNS loss for one (center, positive context, negatives) unit:
//   L = -log sigma(u.v+) - sum_j log sigma(-u.v-_j)
template <typename Real>
Real sgns_pair_loss(const Real* center, int dim, const Real* pos, const Real* const* negs,
                    int n_negs) {
    Real loss = -std::log(sigmoid(dot(center, pos, dim)));
    for (int j = 0; j < n_negs; ++j)
        loss -= std::log(sigmoid(-dot(center, negs[j], dim)));
    return loss;
}

// Analytic gradients of sgns_pair_loss. g_center must hold dim zeros on
// entry; g_pos and g_negs[j] are overwritten. The trainer applies these with
// a plain SGD step, so checking them against finite differences checks the
// exact arithmetic the training path uses.
template <typename Real>
void sgns_pair_grad(const Real* center, int dim, const Real* pos, const Real* const* negs,
                    int n_negs, Real* g_center, Real* g_pos, Real* const* g_negs) {
    Real gp = sigmoid(dot(center, pos, dim)) - Real(1);  // dL/d(u.v+)
    for (int i = 0; i < dim; ++i) {
        g_pos[i] = gp * center[i];
        g_center[i] += gp * pos[i];
    }
    for (int j = 0; j < n_negs; ++j) {
        Real gn = sigmoid(dot(center, negs[j], dim));  // dL/d(u.v-_j)
        for (int i = 0; i < dim; ++i) {
            g_negs[j][i] = gn * center[i];
            g_center[i] += gn * negs[j][i];
        }
    }
}

}  // namespace risksea
