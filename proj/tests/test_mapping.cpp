#include <hnnest/mapping.hpp>

#include "oracle_linalg.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <random>

using namespace hnnest;
using Catch::Approx;

namespace {

std::mt19937_64 rng(11);
Matrix random_matrix(int rows, int cols) {
    std::normal_distribution<double> d;
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = d(rng);
    return m;
}

LiftedConstraints paper_box_lifted() {
    BoxConstraints box;
    box.lower = Vector(4);
    box.upper = Vector(4);
    box.lower << 0.25, 0.05, 0.3, 0.15;
    box.upper << 1.75, 0.25, 0.7, 0.35;
    return lift(row_normalize(from_box(box)));
}

RegressorSnapshot snap_of(const Matrix& w, const Vector& rhs, double t = 0.0) {
    RegressorSnapshot s;
    s.W = w;
    s.w = rhs;
    s.H = Matrix::Zero(w.rows(), 0);
    s.t = t;
    return s;
}

} // namespace

TEST_CASE("scalar unconstrained mapping reduces to T=-1, b=v*") {
    LiftedConstraints none = lift(ConstraintSet::empty(1));
    RegressorSnapshot s = snap_of(Matrix::Constant(1, 1, 2.0), Vector::Constant(1, 4.0));
    HnnMapping map = build_mapping(s, none, 1.0);
    REQUIRE(map.dim() == 1);
    CHECK(map.T(0, 0) == Approx(-1.0));
    CHECK(map.b(0) == Approx(2.0));
}

TEST_CASE("orthonormal regressor gives identity data block") {
    LiftedConstraints none = lift(ConstraintSet::empty(2));
    Vector rhs(2);
    rhs << 3, 5;
    HnnMapping map = build_mapping(snap_of(Matrix::Identity(2, 2), rhs), none, 1.0);
    CHECK((map.T + Matrix::Identity(2, 2)).norm() <= 1e-12);
    CHECK(map.b(0) == Approx(3.0));
    CHECK(map.b(1) == Approx(5.0));
}

TEST_CASE("constrained mapping spectrum stays within the Lemma-1 bound") {
    LiftedConstraints lc = paper_box_lifted();
    const double eta = 50.0;
    for (int trial = 0; trial < 10; ++trial) {
        Matrix w = random_matrix(2, 4);
        HnnMapping map = build_mapping(snap_of(w, Vector(random_matrix(2, 1))), lc, eta);
        CHECK((map.T - map.T.transpose()).norm() <= 1e-12);
        Matrix minus_t = -map.T;
        CHECK(oracle::min_eigenvalue(minus_t) >= -1e-10);
        CHECK(oracle::max_eigenvalue(minus_t) <= 1.0 + eta + 1e-8);
    }
}

TEST_CASE("augmented mapping with a zero channel pads P_W") {
    LiftedConstraints none = lift(ConstraintSet::empty(3));
    LiftedConstraints aug = embed_augmented(none, 1);
    Matrix w = random_matrix(2, 3);
    Vector rhs = Vector(random_matrix(2, 1));

    RegressorSnapshot s = snap_of(w, rhs);
    s.H = Matrix::Zero(2, 1);
    HnnMapping map = build_augmented_mapping(s, aug, 1.0);

    Matrix p_w = projector(w);
    CHECK((map.T.topLeftCorner(3, 3) + p_w).norm() <= 1e-10);
    CHECK(map.T.row(3).norm() <= 1e-12);
    CHECK(map.T.col(3).norm() <= 1e-12);
}

TEST_CASE("augmented mapping couples the disturbance column") {
    // H = [0;1] appended: second row of W_aug gains a unit entry
    LiftedConstraints lc = paper_box_lifted();
    LiftedConstraints aug = embed_augmented(lc, 1);
    RegressorSnapshot s = snap_of(random_matrix(2, 4), Vector(random_matrix(2, 1)));
    s.H = Matrix::Zero(2, 1);
    s.H(1, 0) = 1.0;
    HnnMapping map = build_augmented_mapping(s, aug, 50.0);
    REQUIRE(map.dim() == 13);
    CHECK((map.T - map.T.transpose()).norm() <= 1e-12);

    // excited data keeps the augmented curvature positive
    Matrix w_aug(2, 5);
    w_aug.leftCols(4) = s.W;
    w_aug.rightCols(1) = s.H;
    Matrix stack(2 + aug.A_theta.rows(), 5);
    stack.topRows(2) = w_aug;
    stack.bottomRows(aug.A_theta.rows()) = aug.A_theta;
    if (min_singular_value(stack) > 1e-8) {
        Matrix pi = projector(w_aug) + 50.0 * aug.P_A_theta;
        CHECK(oracle::min_eigenvalue(pi) > 0.0);
    }
}

TEST_CASE("instantaneous target on simple mappings") {
    HnnMapping map;
    map.T = Matrix::Constant(1, 1, -1.0);
    map.b = Vector::Constant(1, 2.0);
    map.p = 1;
    CHECK(instantaneous_target(map)(0) == Approx(2.0));

    map.T = -Matrix::Identity(2, 2);
    map.b = Vector(2);
    map.b << 3, 5;
    map.p = 2;
    Vector v = instantaneous_target(map);
    CHECK(v(0) == Approx(3.0));
    CHECK(v(1) == Approx(5.0));

    map.T = Matrix::Zero(2, 2);
    map.b = Vector::Zero(2);
    CHECK_THROWS_AS(instantaneous_target(map), NotIdentifiableError);
}

TEST_CASE("well-excited noise-free snapshot pins the target at the truth") {
    LiftedConstraints lc = paper_box_lifted();
    Vector theta_star(4);
    theta_star << 1.0, 0.15, 0.5, 0.25;  // feasible truth
    Matrix w = random_matrix(8, 4);       // stacked, rank 4 w.h.p.
    Vector rhs = w * theta_star;
    HnnMapping map = build_mapping(snap_of(w, rhs), lc, 50.0);
    Vector target = instantaneous_target(map);
    CHECK((target.head(4) - theta_star).norm() <= 1e-6);

    // the truth plus its slacks is a fixed point: T v* + b = 0
    ConstraintSet cs = row_normalize(from_box(BoxConstraints{
        (Vector(4) << 0.25, 0.05, 0.3, 0.15).finished(),
        (Vector(4) << 1.75, 0.25, 0.7, 0.35).finished()}));
    Vector v_star(12);
    v_star.head(4) = theta_star;
    v_star.tail(8) = slack_for(cs, theta_star);
    CHECK((map.T * v_star + map.b).norm() <= 1e-10);
}

TEST_CASE("energy gradient matches finite differences") {
    LiftedConstraints lc = paper_box_lifted();
    HnnMapping map = build_mapping(snap_of(random_matrix(2, 4), Vector(random_matrix(2, 1))), lc, 50.0);
    Vector v = Vector(random_matrix(map.dim(), 1));
    Vector g = mapping_energy_gradient(map, v);
    const double h = 1e-6;
    for (int i = 0; i < map.dim(); ++i) {
        Vector vp = v, vm = v;
        vp(i) += h;
        vm(i) -= h;
        const double fd = (mapping_energy(map, vp) - mapping_energy(map, vm)) / (2 * h);
        CHECK(g(i) == Approx(fd).epsilon(1e-6).margin(1e-8));
    }
}

TEST_CASE("ls mapping is the raw normal-equation synthesis") {
    RegressorSnapshot s = snap_of(random_matrix(2, 4), Vector(random_matrix(2, 1)));
    HnnMapping map = build_ls_mapping(s);
    CHECK((map.T + s.W.transpose() * s.W).norm() <= 1e-12);
    CHECK((map.b - s.W.transpose() * s.w).norm() <= 1e-12);
}
