#include "circuits.hpp"

#include "mtm/errors.hpp"
#include "mtm/netlist.hpp"
#include "mtm/units.hpp"

#include <gtest/gtest.h>

#include <numbers>

namespace {

TEST(Units, SuffixesAreExactDoubles) {
    EXPECT_EQ(*mtm::parse_number("1k"), 1e3);
    EXPECT_EQ(*mtm::parse_number("1meg"), 1e6);
    EXPECT_EQ(*mtm::parse_number("1MEG"), 1e6);
    EXPECT_EQ(*mtm::parse_number("1p"), 1e-12);
    EXPECT_EQ(*mtm::parse_number("4.7p"), 4.7e-12);
    EXPECT_EQ(*mtm::parse_number("1f"), 1e-15);
    EXPECT_EQ(*mtm::parse_number("2.5u"), 2.5e-6);
    EXPECT_EQ(*mtm::parse_number("3n"), 3e-9);
    EXPECT_EQ(*mtm::parse_number("1m"), 1e-3);
    EXPECT_EQ(*mtm::parse_number("1g"), 1e9);
    EXPECT_EQ(*mtm::parse_number("1t"), 1e12);
    EXPECT_EQ(*mtm::parse_number("10pF"), 10e-12);
    EXPECT_EQ(*mtm::parse_number("1.5e-3k"), 1.5);
    EXPECT_EQ(*mtm::parse_number("-2"), -2.0);
}

TEST(Units, RejectsGarbage) {
    EXPECT_FALSE(mtm::parse_number(""));
    EXPECT_FALSE(mtm::parse_number("k"));
    EXPECT_FALSE(mtm::parse_number("1.2.3"));
    EXPECT_FALSE(mtm::parse_number("1k2"));
}

TEST(Units, FormatRoundTrips) {
    for (double v : {1.0, 0.1, 1e-12, 6.666666666666667e-11, -3.25, 1.2566370614359173e-6, 0.0})
        EXPECT_EQ(*mtm::parse_number(mtm::format_number(v)), v);
}

TEST(Parse, Resistor) {
    const auto net = mtm::parse_netlist("R1 a 0 1k\n");
    ASSERT_EQ(net.elements.size(), 1u);
    const auto& r = net.elements[0];
    EXPECT_EQ(r.kind, mtm::ElementKind::resistor);
    EXPECT_EQ(r.terminals, (std::vector<std::string>{"a", "0"}));
    EXPECT_EQ(r.param("R"), 1000.0);
    EXPECT_TRUE(net.has_node("0"));
    EXPECT_TRUE(net.has_node("a"));
}

TEST(Parse, LosslessLine) {
    const double l = 4.0 * std::numbers::pi * 1e-7;
    const double c = 1e-7 / (9.0 * std::numbers::pi);
    const auto net = mtm::parse_netlist("T1 p1 0 p2 0 L=" + mtm::format_number(l) + " C=" + mtm::format_number(c) +
                                        " LEN=1m\n");
    ASSERT_EQ(net.tlines.size(), 1u);
    const auto& t = net.tlines[0];
    EXPECT_EQ(t.params.l, l);
    EXPECT_EQ(t.params.c, c);
    EXPECT_EQ(t.params.length, 1e-3);
    EXPECT_TRUE(t.params.lossless());
    EXPECT_EQ(t.p1, "p1");
    EXPECT_EQ(t.p2, "p2");
}

TEST(Parse, SourcesAndDevices) {
    const auto net = mtm::parse_netlist(circuits::inverter_pair());
    const auto* vin = net.find_element("VIN");
    ASSERT_NE(vin, nullptr);
    ASSERT_TRUE(vin->wave);
    EXPECT_EQ(vin->wave->shape, mtm::SourceWave::Shape::pulse);
    EXPECT_DOUBLE_EQ(vin->wave->at(0.0), 0.0);
    EXPECT_DOUBLE_EQ(vin->wave->at(200e-12), 1.0);
    EXPECT_TRUE(net.find_element("MP1")->pmos);
    EXPECT_FALSE(net.find_element("mn1")->pmos);
    EXPECT_EQ(net.find_element("D1")->param("IS"), 1e-14);
    ASSERT_TRUE(net.directives.tran);
    EXPECT_EQ(net.directives.partition_wires, (std::vector<std::string>{"T1"}));
}

TEST(Parse, WaveShapes) {
    const auto net = mtm::parse_netlist("V1 a 0 SIN(0 1 1g)\nV2 b 0 PWL(0 0 1n 2 2n 2)\nI1 c 0 0.5m\nR1 a b 1\n"
                                        "R2 b c 1\n");
    const auto& sin = *net.find_element("V1")->wave;
    EXPECT_NEAR(sin.at(0.25e-9), 1.0, 1e-12);
    const auto& pwl = *net.find_element("V2")->wave;
    EXPECT_DOUBLE_EQ(pwl.at(0.5e-9), 1.0);
    EXPECT_DOUBLE_EQ(pwl.at(5e-9), 2.0);
    EXPECT_DOUBLE_EQ(net.find_element("I1")->wave->at(1.0), 0.5e-3);
}

TEST(Parse, PrintAndPartitionLists) {
    const auto net = mtm::parse_netlist("R1 a 0 1\nT1 a 0 b 0 L=1u C=1p LEN=1\nT2 b 0 c 0 L=1u C=1p LEN=1\n"
                                        "R2 c 0 1\n.partition wire T1,T2\n.print v(a) i(T1.2)\n");
    EXPECT_EQ(net.directives.partition_wires, (std::vector<std::string>{"T1", "T2"}));
    ASSERT_EQ(net.directives.prints.size(), 2u);
    EXPECT_EQ(net.directives.prints[1].label(), "i(T1.2)");
}

void expect_parse_error(const std::string& text, std::size_t line) {
    try {
        (void)mtm::parse_netlist(text);
        FAIL() << "accepted: " << text;
    } catch (const mtm::ParseError& e) {
        EXPECT_EQ(e.line(), line) << e.what();
    }
}

TEST(ParseErrors, CarryLineNumbers) {
    expect_parse_error("R1 a 0 -5\n", 1);
    expect_parse_error("* c\nR1 a 0 0\n", 2);
    expect_parse_error("R1 a 0 1k\nr1 b 0 1k\n", 2);
    expect_parse_error("R1 a 0 abc\n", 1);
    expect_parse_error("R1 a 0\n", 1);
    expect_parse_error("X1 a 0 1\n", 1);
    expect_parse_error("C1 a 0 1p\n.tran 1n 0.5n\n", 2);
    expect_parse_error("D1 a 0 IS=-1\n", 1);
    expect_parse_error("R1 a 0 1\n.print v(zz)\n", 2);
    expect_parse_error("T1 a 0 b 0 L=1u LEN=1\n", 1);
}

TEST(Validate, CleanCircuitHasNoDiagnostics) {
    EXPECT_TRUE(mtm::validate(mtm::parse_netlist(circuits::inverter_pair())).empty());
}

TEST(Validate, UnknownPartitionWire) {
    const auto d = mtm::validate(mtm::parse_netlist("V1 a 0 DC 1\nR1 a 0 1\n.partition wire TX\n"));
    ASSERT_EQ(d.size(), 1u);
    EXPECT_EQ(d[0].severity, mtm::Diagnostic::Severity::error);
}

TEST(Validate, FloatingNodeWarns) {
    const auto d = mtm::validate(mtm::parse_netlist("V1 a 0 DC 1\nR1 a 0 1\nC1 f 0 1p\n"));
    ASSERT_EQ(d.size(), 1u);
    EXPECT_EQ(d[0].severity, mtm::Diagnostic::Severity::warning);
}

TEST(RoundTrip, UnparseReparsesIdentically) {
    const std::vector<std::string> texts{
        circuits::inverter_pair(),
        circuits::inverter_pair(20.0),
        "V1 a 0 SIN(0 1 1g 1n 1e8)\nR1 a b 1.5k\nL1 b c 3n\nC1 c 0 4.7p\nG1 c 0 a 0 -2m\nI1 0 c PWL(0 0 1n 1m)\n"
        ".tran 1p 2n\n.print v(c) i(V1) i(L1)\n",
    };
    for (const auto& t : texts) {
        const auto net = mtm::parse_netlist(t);
        const auto again = mtm::parse_netlist(mtm::unparse(net));
        EXPECT_EQ(net, again);
        EXPECT_EQ(mtm::unparse(again), mtm::unparse(net));
    }
}

} // namespace
