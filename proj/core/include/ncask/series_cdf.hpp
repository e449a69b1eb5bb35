#pragma once

#include <span>
#include <vector>

namespace ncask {

// Per-eigenvalue-group parameters of an indefinite quadratic form
// X = sum_p beta_p * sum_{q<q_p} |z_q + c_q|^2 whose m.g.f. is
// G(nu) = prod_p exp(nu beta_p gk_p / (1 - nu beta_p)) / (1 - nu beta_p)^{q_p},
// where gk_p is the total noncentrality of group p. All beta_p share a sign.
struct QuadraticForm {
    std::vector<double> beta;
    std::vector<double> gk;
    std::vector<int> q;
};

// Tangent of the quadratic-form parameters and the evaluation point along one
// differentiation direction.
struct FormTangent {
    std::vector<double> dbeta;
    std::vector<double> dgk;
    double dx = 0.0;
};

// Result of the truncated m.g.f. series at depth xi evaluated at x.
//
// The u-th series term (xi-1)^u / (x^u u!) * d^u G / d nu^u at nu = (1-xi)/x is
// nonnegative and the terms over all u sum to G(0) = 1. `head` is the sum of
// the first xi terms (the c.d.f. approximation); `tail` is the sum of the rest,
// evaluated directly so it stays accurate when head is close to one.
struct SeriesResult {
    double head = 0.0;
    double tail = 0.0;
    std::vector<double> d_head;
    std::vector<double> d_tail;
    int tail_terms = 0;
};

// O(xi * L) evaluation. The binomial recursion for R_u collapses, after scaling
// term u by c^u/u!, into geometric accumulators per eigenvalue group. Values are
// carried as doubles with a shared running exponent so that G(nu) may underflow
// and R_u overflow without loss. Throws DomainError if 1 - nu beta_p <= 0 and
// NumericalError if the scaled representation cannot stay finite.
SeriesResult evaluate_series(const QuadraticForm& form, double x, int xi, bool want_tail,
                             std::span<const FormTangent> tangents = {});

// Literal binomial recursion R_u = sum_v C(u-1,v) g^{(u-1-v)} R_v with every
// quantity held as (sign, log-magnitude). O(xi^2); used as an independent check.
double evaluate_series_reference(const QuadraticForm& form, double x, int xi);

double form_log_mgf(const QuadraticForm& form, double nu);
// n-th derivative of ln G at nu, n >= 0 (so n = 0 is G'/G).
double form_g_derivative(const QuadraticForm& form, double nu, int n);

}  // namespace ncask
