#include "circuits.hpp"

#include "mtm/circuit.hpp"
#include "mtm/linalg.hpp"
#include "mtm/netlist.hpp"
#include "mtm/solver.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace {

mtm::Circuit compile(const std::string& text) { return mtm::Circuit::compile(mtm::parse_netlist(text)); }

/// Linear system of a circuit at t = dt with zero history.
mtm::MnaSystem system_of(const mtm::Circuit& c) {
    const std::vector<mtm::DeviceState> states(c.elements().size());
    const std::vector<double> guess(c.size(), 0.0);
    mtm::AssemblyInputs in;
    in.ctx = {1e-9, 1e-9, mtm::IntegrationRule::trapezoidal, false};
    in.states = states;
    in.v_guess = guess;
    return mtm::assemble(c, in);
}

TEST(Assemble, SourceAndResistor) {
    const auto c = compile("V1 a 0 DC 1\nR1 a 0 1k\n");
    const auto sys = system_of(c);
    ASSERT_EQ(sys.n, 2u);
    EXPECT_EQ(sys.ordering, (std::vector<std::string>{"v(a)", "i(V1)"}));
    const auto x = mtm::lu_solve(sys.a, sys.b);
    EXPECT_NEAR(x[0], 1.0, 1e-15);
    EXPECT_NEAR(x[1], -(1e-3 + 1e-12), 1e-18); // gmin draws 1e-12 A at 1 V
}

TEST(Assemble, Divider) {
    const auto c = compile("V1 in 0 DC 1\nR1 in mid 1k\nR2 mid 0 1k\n");
    const auto x = mtm::lu_solve(system_of(c).a, system_of(c).b);
    EXPECT_NEAR(x[static_cast<std::size_t>(*c.node_index("mid"))], 0.5, 1e-9);
}

TEST(Assemble, VccsMakesMatrixAsymmetric) {
    const auto sys = system_of(compile("V1 a 0 DC 1\nR1 a b 1k\nR2 b 0 1k\nG1 0 b a 0 2m\n"));
    bool asymmetric = false;
    for (std::size_t r = 0; r < sys.n; ++r)
        for (std::size_t c = 0; c < sys.n; ++c) asymmetric = asymmetric || sys.a(r, c) != sys.a(c, r);
    EXPECT_TRUE(asymmetric);
}

TEST(Assemble, GminOnEveryNodeDiagonal) {
    const auto c = compile("V1 a 0 DC 1\nC1 a b 1p\nC2 b 0 1p\n");
    mtm::AssemblyInputs in;
    const std::vector<mtm::DeviceState> states(c.elements().size());
    const std::vector<double> guess(c.size(), 0.0);
    in.ctx = {0.0, 0.0, mtm::IntegrationRule::trapezoidal, true};
    in.states = states;
    in.v_guess = guess;
    const auto sys = mtm::assemble(c, in);
    EXPECT_EQ(sys.a(static_cast<std::size_t>(*c.node_index("b")), static_cast<std::size_t>(*c.node_index("b"))),
              1e-12);
}

TEST(Assemble, NodeWithoutConnectionIsStructuralError) {
    mtm::Netlist net = mtm::parse_netlist("V1 a 0 DC 1\nR1 a 0 1\n");
    net.touch_node("orphan");
    EXPECT_THROW(mtm::Circuit::compile(net), mtm::StructuralError);
}

TEST(Lu, RandomDiagonallyAugmentedSystems) {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::bernoulli_distribution sparse(0.3);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + static_cast<std::size_t>(trial % 50);
        mtm::DenseMatrix a(n);
        std::vector<double> b(n);
        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t c = 0; c < n; ++c)
                if (sparse(rng)) a(r, c) = u(rng);
            a(r, r) += (trial % 2 ? 1.0 : static_cast<double>(n)) * (u(rng) > 0 ? 1.0 : -1.0);
            b[r] = u(rng);
        }
        const auto x = mtm::lu_solve(a, b);
        const auto ax = a.multiply(x);
        double res = 0.0, bn = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            res = std::max(res, std::abs(ax[r] - b[r]));
            bn = std::max(bn, std::abs(b[r]));
        }
        EXPECT_LE(res, 1e-9 * bn) << "n=" << n << " trial=" << trial;
    }
}

TEST(Lu, NeedsPivoting) {
    mtm::DenseMatrix a(2);
    a(0, 1) = 1.0;
    a(1, 0) = 2.0;
    const std::vector<double> b{3.0, 4.0};
    const auto x = mtm::lu_solve(a, b);
    EXPECT_DOUBLE_EQ(x[0], 2.0);
    EXPECT_DOUBLE_EQ(x[1], 3.0);
}

TEST(Lu, SingularThrows) {
    mtm::DenseMatrix a(3);
    a(0, 0) = 1.0;
    a(1, 1) = 1.0;
    EXPECT_THROW(mtm::lu_solve(a, std::vector<double>{1, 1, 1}), mtm::SingularMatrix);
}

TEST(Newton, LinearProblemTakesOneSolve) {
    const auto c = compile("V1 in 0 DC 1\nR1 in mid 1k\nR2 mid 0 3k\n");
    const auto sys = system_of(c);
    auto build = [&](const std::vector<double>&) -> const mtm::MnaSystem& { return sys; };
    for (double v0 : {0.0, 5.0, -1e3}) {
        const auto r = mtm::newton_solve(build, std::vector<double>(sys.n, v0), {}, true);
        EXPECT_EQ(r.iterations, 1);
        EXPECT_NEAR(r.x[static_cast<std::size_t>(*c.node_index("mid"))], 0.75, 1e-9);
    }
}

TEST(Newton, LinearTransientUsesOneSolvePerStep) {
    const auto r = mtm::run_transient(compile("V1 in 0 DC 1\nR1 in out 1k\nC1 out 0 1n\n"), 1e-8, 1e-6);
    for (std::size_t n = 1; n < r.nr_iterations.size(); ++n) EXPECT_EQ(r.nr_iterations[n], 1);
}

TEST(Newton, RejectsBadTolerances) {
    const auto sys = system_of(compile("V1 a 0 DC 1\nR1 a 0 1\n"));
    auto build = [&](const std::vector<double>&) -> const mtm::MnaSystem& { return sys; };
    mtm::NrTolerances tol;
    tol.abstol = 0.0;
    EXPECT_THROW(mtm::newton_solve(build, std::vector<double>(2, 0.0), tol), std::invalid_argument);
}

const char* kDiodeCircuit = "V1 in 0 DC 1\nR1 in a 1k\nD1 a 0 IS=1e-14 VT=0.025\n";

double diode_bisection() {
    double lo = 0.0, hi = 1.0;
    for (int k = 0; k < 200; ++k) {
        const double mid = 0.5 * (lo + hi);
        ((1.0 - mid) / 1000.0 - 1e-14 * (std::exp(mid / 0.025) - 1.0) > 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

TEST(Newton, DiodeOperatingPointMatchesBisection) {
    const auto c = compile(kDiodeCircuit);
    const auto x = mtm::dc_operating_point(c);
    const double v = x[static_cast<std::size_t>(*c.node_index("a"))];
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 0.7);
    EXPECT_NEAR(v, diode_bisection(), 1e-9);
}

TEST(Newton, DiodeTransientStepConverges) {
    const auto r = mtm::run_transient(compile(kDiodeCircuit), 1e-9, 5e-9);
    EXPECT_NEAR(r.trace("v(a)").back(), diode_bisection(), 1e-9);
    for (std::size_t n = 1; n < r.nr_iterations.size(); ++n) {
        EXPECT_GE(r.nr_iterations[n], 1);
        EXPECT_LE(r.nr_iterations[n], 100);
    }
}

TEST(Newton, MaxIterOneFails) {
    mtm::SolverOptions opt;
    opt.nr.maxiter = 1;
    EXPECT_THROW(mtm::dc_operating_point(compile(kDiodeCircuit), opt), mtm::NoConvergence);
    try {
        (void)mtm::run_transient(compile(kDiodeCircuit), 1e-9, 5e-9, opt);
        FAIL() << "transient converged with maxiter = 1";
    } catch (const mtm::NoConvergence& e) {
        EXPECT_DOUBLE_EQ(e.time(), 1e-9);
        EXPECT_EQ(e.iterations(), 1);
    }
}

// Independent KCL check at node a: source current through R equals diode plus gmin current.
TEST(Newton, KclHoldsAtEveryAcceptedPoint) {
    const auto r =
        mtm::run_transient(compile("V1 in 0 SIN(0.3 0.6 1g)\nR1 in a 1k\nD1 a 0 IS=1e-14 VT=0.025\n"), 1e-11, 3e-9);
    const auto& vin = r.trace("v(in)");
    const auto& va = r.trace("v(a)");
    for (std::size_t n = 0; n < va.size(); ++n) {
        const double kcl = (vin[n] - va[n]) / 1000.0 - 1e-14 * (std::exp(va[n] / 0.025) - 1.0) - 1e-12 * va[n];
        EXPECT_LE(std::abs(kcl), 1e-12) << "t=" << r.time[n];
    }
}

double rc_error(double dt) {
    const auto r = mtm::run_transient(compile("V1 in 0 DC 1\nR1 in out 1k\nC1 out 0 1n\n"), dt, 1e-5);
    const auto& v = r.trace("v(out)");
    double worst = 0.0;
    for (std::size_t n = 0; n < v.size(); ++n) worst = std::max(worst, std::abs(v[n] - (1.0 - std::exp(-r.time[n] / 1e-6))));
    return worst;
}

TEST(Transient, RcStepResponse) { EXPECT_LT(rc_error(1e-8), 1e-3); }

TEST(Transient, TrapezoidalOrder) { EXPECT_GE(rc_error(1e-8) / rc_error(0.5e-8), 3.5); }

TEST(Transient, GridIsExactAndTracesAligned) {
    const auto r = mtm::run_transient(compile("V1 in 0 DC 1\nR1 in out 1k\nC1 out 0 1n\n"), 1e-8, 1e-6);
    ASSERT_EQ(r.time.size(), 101u);
    for (std::size_t n = 0; n < r.time.size(); ++n) EXPECT_EQ(r.time[n], static_cast<double>(n) * 1e-8);
    for (const auto& t : r.traces) EXPECT_EQ(t.size(), r.time.size());
}

TEST(Transient, ZeroSourcesGiveZeroTraces) {
    const auto r = mtm::run_transient(compile("V1 in 0 DC 0\nR1 in out 1k\nC1 out 0 1n\nL1 out 0 1u\n"), 1e-8, 1e-6);
    for (const auto& t : r.traces)
        for (double v : t) EXPECT_EQ(v, 0.0);
}

TEST(Transient, InitialSampleIsZero) {
    const auto r = mtm::run_transient(compile(kDiodeCircuit), 1e-9, 2e-9);
    for (const auto& t : r.traces) EXPECT_EQ(t.front(), 0.0);
}

TEST(Transient, Deterministic) {
    const auto net = mtm::parse_netlist(circuits::inverter_pair());
    const auto c = mtm::Circuit::compile(net);
    const auto a = mtm::run_transient(c, net.directives.tran->step, net.directives.tran->stop);
    const auto b = mtm::run_transient(c, net.directives.tran->step, net.directives.tran->stop);
    EXPECT_TRUE(a == b);
}

TEST(Transient, InductorCurrentRamp) {
    // v = L di/dt with a constant 1 V across 1 uH: i(t) = t * 1e6 after the first step.
    const auto r = mtm::run_transient(compile("V1 a 0 DC 1\nL1 a 0 1u\n"), 1e-9, 1e-8);
    const auto& i = r.trace("i(L1)");
    for (std::size_t n = 1; n < i.size(); ++n) EXPECT_NEAR(std::abs(i[n]), r.time[n] * 1e6, 1e-9);
}

TEST(Transient, SpanMustBeAWholeNumberOfSteps) {
    const auto c = compile("V1 a 0 DC 1\nR1 a 0 1\n");
    EXPECT_THROW(mtm::run_transient(c, {0.0, 1.5e-9}, 1e-9), std::invalid_argument);
}

TEST(Transient, SnapshotRestoreReplaysIdentically) {
    const auto c = mtm::Circuit::compile(mtm::parse_netlist(circuits::inverter_pair()));
    const double dt = circuits::kTau / 10.0;
    mtm::TransientSolver s(c, dt);
    for (int k = 0; k < 25; ++k) s.advance();
    const auto snap = s.snapshot();
    std::vector<double> first;
    for (int k = 0; k < 10; ++k) s.advance();
    first.assign(s.solution().begin(), s.solution().end());
    s.restore(snap);
    EXPECT_EQ(s.step(), 25);
    for (int k = 0; k < 10; ++k) s.advance();
    EXPECT_EQ(std::vector<double>(s.solution().begin(), s.solution().end()), first);
}

} // namespace
