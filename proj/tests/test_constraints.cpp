#include <hnnest/constraints.hpp>

#include "oracle_linalg.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <random>

using namespace hnnest;
using Catch::Approx;

namespace {

BoxConstraints paper_box() {
    BoxConstraints box;
    box.lower = Vector(4);
    box.upper = Vector(4);
    box.lower << 0.25, 0.05, 0.3, 0.15;
    box.upper << 1.75, 0.25, 0.7, 0.35;
    return box;
}

std::mt19937_64 rng(7);
Vector random_vector(int n, double scale = 1.0) {
    std::normal_distribution<double> d;
    Vector v(n);
    for (int i = 0; i < n; ++i) v(i) = scale * d(rng);
    return v;
}

} // namespace

TEST_CASE("from_box encodes paired inequality rows") {
    BoxConstraints box;
    box.lower = Vector::Constant(1, 0.25);
    box.upper = Vector::Constant(1, 1.75);
    ConstraintSet cs = from_box(box);
    REQUIRE(cs.n_in() == 2);
    CHECK(cs.A_in(0, 0) == Approx(1.0));
    CHECK(cs.a_in(0) == Approx(1.75));
    CHECK(cs.A_in(1, 0) == Approx(-1.0));
    CHECK(cs.a_in(1) == Approx(-0.25));

    ConstraintSet cs4 = from_box(paper_box());
    CHECK(cs4.n_in() == 8);

    BoxConstraints bad;
    bad.lower = Vector::Constant(2, 1.0);
    bad.upper = Vector::Constant(2, 1.0);
    CHECK_THROWS_AS(from_box(bad), InvalidInputError);
}

TEST_CASE("row_normalize scales rows and preserves the feasible set") {
    ConstraintSet cs = ConstraintSet::empty(2);
    cs.A_in = Matrix(1, 2);
    cs.A_in << 2, 0;
    cs.a_in = Vector::Constant(1, 3.0);
    ConstraintSet n = row_normalize(cs);
    CHECK(n.A_in(0, 0) == Approx(1.0));
    CHECK(n.A_in(0, 1) == Approx(0.0).margin(1e-15));
    CHECK(n.a_in(0) == Approx(1.5));

    // idempotent on already-unit rows
    ConstraintSet n2 = row_normalize(n);
    CHECK((n2.A_in - n.A_in).norm() == Approx(0.0).margin(1e-15));

    // random rows: membership unchanged
    ConstraintSet r = ConstraintSet::empty(3);
    r.A_in = Matrix(4, 3);
    r.a_in = Vector(4);
    for (int i = 0; i < 4; ++i) {
        r.A_in.row(i) = random_vector(3).transpose();
        r.a_in(i) = random_vector(1)(0);
    }
    ConstraintSet rn = row_normalize(r);
    for (int trial = 0; trial < 200; ++trial) {
        Vector theta = random_vector(3, 2.0);
        CHECK(feasible(r, theta) == feasible(rn, theta));
    }

    ConstraintSet zero = ConstraintSet::empty(2);
    zero.A_in = Matrix::Zero(1, 2);
    zero.a_in = Vector::Zero(1);
    CHECK_THROWS_AS(row_normalize(zero), InvalidInputError);
}

TEST_CASE("lift of a single inequality matches the hand construction") {
    ConstraintSet cs = ConstraintSet::empty(1);
    cs.A_in = Matrix::Constant(1, 1, 1.0);
    cs.a_in = Vector::Constant(1, 1.0);  // x <= 1
    LiftedConstraints lc = lift(row_normalize(cs));
    REQUIRE(lc.r() == 1);
    REQUIRE(lc.dim() == 2);
    const double s = 1.0 / std::sqrt(2.0);
    CHECK(lc.A(0, 0) == Approx(s));
    CHECK(lc.A(0, 1) == Approx(-s));
    CHECK(lc.a(0) == Approx(s));
    // boundary point x = 1 with zero slack sits on the lifted manifold
    Vector v(2);
    v << 1.0, 0.0;
    CHECK((lc.A * v - lc.a).norm() == Approx(0.0).margin(1e-14));
}

TEST_CASE("lift of the 4-parameter box") {
    LiftedConstraints lc = lift(row_normalize(from_box(paper_box())));
    REQUIRE(lc.r() == 8);
    REQUIRE(lc.dim() == 12);
    // slack block is a negative diagonal
    Matrix slack = lc.A.rightCols(8);
    for (int i = 0; i < 8; ++i) {
        CHECK(slack(i, i) < 0.0);
        for (int j = 0; j < 8; ++j)
            if (i != j) CHECK(slack(i, j) == Approx(0.0).margin(1e-15));
    }

    // projector properties
    CHECK((lc.P_A * lc.P_A - lc.P_A).norm() <= 1e-9);
    CHECK((lc.P_A - lc.P_A.transpose()).norm() <= 1e-12);

    // A b_ctr... b_ctr is a particular solution: A b_ctr = a
    CHECK((lc.A * lc.b_ctr - lc.a).norm() <= 1e-12);

    // parameter-effective projector: PSD with eigenvalues in [0, 1]
    oracle::EigResult eig = oracle::jacobi_eig(lc.P_A_theta);
    CHECK(eig.values(0) >= -1e-12);
    CHECK(eig.values(eig.values.size() - 1) <= 1.0 + 1e-12);
}

TEST_CASE("slack lifting encodes feasibility as s <= 0") {
    ConstraintSet cs = row_normalize(from_box(paper_box()));
    LiftedConstraints lc = lift(cs);
    for (int trial = 0; trial < 300; ++trial) {
        Vector theta = random_vector(4, 1.0);
        Vector s = slack_for(cs, theta);
        // the pair (theta, s) always satisfies the lifted equalities
        Vector v(lc.dim());
        v.head(4) = theta;
        v.tail(8) = s;
        CHECK((lc.A * v - lc.a).norm() <= 1e-12);
        // and original feasibility corresponds to nonpositive slacks
        CHECK(feasible(cs, theta) == (s.maxCoeff() <= 1e-12));
    }
}

TEST_CASE("embed_augmented inserts a zero compensation block") {
    LiftedConstraints lc = lift(row_normalize(from_box(paper_box())));
    LiftedConstraints same = embed_augmented(lc, 0);
    CHECK(same.dim() == lc.dim());

    LiftedConstraints aug = embed_augmented(lc, 1);
    REQUIRE(aug.A.rows() == 8);
    REQUIRE(aug.A.cols() == 13);
    CHECK(aug.A.col(4).norm() == Approx(0.0).margin(1e-15));
    // d-block of the parameter-effective projector is exactly zero
    CHECK(aug.P_A_theta.row(4).norm() == Approx(0.0).margin(1e-15));
    CHECK(aug.P_A_theta.col(4).norm() == Approx(0.0).margin(1e-15));
    // right-hand side unchanged
    CHECK((aug.a - lc.a).norm() == Approx(0.0).margin(1e-15));
    CHECK((aug.A * aug.b_ctr - aug.a).norm() <= 1e-12);
}

TEST_CASE("coercivity of P_W + eta P_A_theta (rank-complete vs deficient)") {
    LiftedConstraints lc = lift(row_normalize(from_box(paper_box())));
    const double eta = 50.0;
    for (int trial = 0; trial < 20; ++trial) {
        Matrix w(2, 4);
        for (int i = 0; i < 2; ++i) w.row(i) = random_vector(4).transpose();
        Matrix stack(2 + lc.A_theta.rows(), 4);
        stack.topRows(2) = w;
        stack.bottomRows(lc.A_theta.rows()) = lc.A_theta;
        REQUIRE(min_singular_value(stack) > 1e-8);  // rank complete w.h.p.

        Matrix pi = projector(w) + eta * lc.P_A_theta;
        CHECK(oracle::min_eigenvalue(pi) > 0.0);
        CHECK(oracle::max_eigenvalue(pi) <= 1.0 + eta + 1e-9);
    }

    // no constraints, rank-deficient data: lambda_min collapses
    Matrix w1(1, 2);
    w1 << 1.0, 0.0;
    Matrix pw = projector(w1);
    CHECK(oracle::min_eigenvalue(pw) <= 1e-10);
}
