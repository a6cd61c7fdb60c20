#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "voltcraft/errors.hpp"
#include "voltcraft/io.hpp"
#include "voltcraft/math.hpp"
#include "voltcraft/monte_carlo.hpp"

using namespace voltcraft;

TEST(FormatDouble, RoundTripsEveryValueBitwise) {
    CounterRng rng(55, 0);
    std::vector<double> values = {0.0,
                                  -0.0,
                                  1.0,
                                  -1.0 / 3.0,
                                  1e-308,
                                  -1.7976931348623157e308,
                                  5e-324,
                                  0.1,
                                  123456789.123456789};
    for (int i = 0; i < 200; ++i) {
        values.push_back(std::ldexp(2.0 * rng.uniform() - 1.0, static_cast<int>(rng.uniform() * 600) - 300));
    }
    for (double v : values) {
        const std::string s = format_double(v);
        const double back = std::strtod(s.c_str(), nullptr);
        EXPECT_EQ(back, v) << s;
    }
}

TEST(FormatDouble, NonFiniteBecomesNull) {
    EXPECT_EQ(format_double(std::nan("")), "null");
    EXPECT_EQ(format_double(std::numeric_limits<double>::infinity()), "null");
    EXPECT_EQ(format_double(-std::numeric_limits<double>::infinity()), "null");
}

TEST(JsonWriterTest, ProducesStableIndentedOutput) {
    std::ostringstream os;
    JsonWriter w(os);
    w.begin_object();
    w.field("name", "a \"quoted\"\nvalue");
    w.field("count", 3);
    w.key("nested").begin_object();
    w.field("flag", true);
    w.field("xs", std::vector<double>{1.0, 2.5});
    w.end_object();
    w.key("empty").begin_object().end_object();
    w.key("none").begin_array().end_array();
    w.end_object();
    w.finish();

    const std::string expected =
        "{\n"
        "  \"name\": \"a \\\"quoted\\\"\\nvalue\",\n"
        "  \"count\": 3,\n"
        "  \"nested\": {\n"
        "    \"flag\": true,\n"
        "    \"xs\": [\n"
        "      1,\n"
        "      2.5\n"
        "    ]\n"
        "  },\n"
        "  \"empty\": {},\n"
        "  \"none\": []\n"
        "}\n";
    EXPECT_EQ(os.str(), expected);
}

TEST(JsonWriterTest, OutputIsValidJson) {
    std::ostringstream os;
    JsonWriter w(os);
    w.begin_object();
    w.field("control\twith\rescapes", std::string("\x01 low"));
    w.field("value", 0.30000000000000004);
    w.end_object();
    w.finish();
    const nlohmann::json j = nlohmann::json::parse(os.str());
    EXPECT_EQ(j.at("control\twith\rescapes").get<std::string>(), "\x01 low");
    EXPECT_EQ(j.at("value").get<double>(), 0.30000000000000004);
}

TEST(QuotesCsv, ReadsKindsWeightsAndTolerantFormatting) {
    std::istringstream in(
        "Maturity,Strike,Kind,Price,Weight\r\n"
        "0.5, 90, C, 13.5, 2\n"
        "\n"
        "0.5,110,put,8.25,1\n"
        "1.0,100,Call,10.45,0.5\n");
    const std::vector<OptionQuote> quotes = read_quotes_csv(in);
    ASSERT_EQ(quotes.size(), 3u);
    EXPECT_EQ(quotes[0].kind, QuoteKind::call);
    EXPECT_DOUBLE_EQ(quotes[0].weight, 2.0);
    EXPECT_EQ(quotes[1].kind, QuoteKind::put);
    EXPECT_DOUBLE_EQ(quotes[2].price, 10.45);
}

TEST(QuotesCsv, WeightColumnIsOptionalFileWide) {
    std::istringstream in(
        "maturity,strike,kind,price\n"
        "1,100,call,10\n");
    const std::vector<OptionQuote> quotes = read_quotes_csv(in);
    ASSERT_EQ(quotes.size(), 1u);
    EXPECT_DOUBLE_EQ(quotes[0].weight, 1.0);
}

TEST(QuotesCsv, ErrorsCarryContext) {
    std::istringstream wrong_header("t,k,kind,price\n1,100,call,10\n");
    try {
        read_quotes_csv(wrong_header, "quotes.csv");
        FAIL() << "expected InvalidInput";
    } catch (const InvalidInput& e) {
        EXPECT_NE(std::string(e.what()).find("maturity,strike,kind,price,[weight]"),
                  std::string::npos)
            << e.what();
    }

    std::istringstream bad_number("maturity,strike,kind,price\n1,100,call,1x0\n");
    try {
        read_quotes_csv(bad_number, "quotes.csv");
        FAIL() << "expected InvalidInput";
    } catch (const InvalidInput& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
        EXPECT_NE(msg.find("1x0"), std::string::npos) << msg;
    }

    std::istringstream bad_kind("maturity,strike,kind,price\n1,100,swap,10\n");
    EXPECT_THROW(read_quotes_csv(bad_kind), InvalidInput);

    std::istringstream short_row("maturity,strike,kind,price\n1,100,call\n");
    EXPECT_THROW(read_quotes_csv(short_row), InvalidInput);

    std::istringstream no_rows("maturity,strike,kind,price\n");
    EXPECT_THROW(read_quotes_csv(no_rows), InvalidInput);
}

TEST(PathCsv, ReadsAndValidates) {
    std::istringstream in("time,price\n0,100\n0.5,104\n1.0,99\n");
    const PricePath path = read_path_csv(in);
    ASSERT_EQ(path.times.size(), 3u);
    EXPECT_DOUBLE_EQ(path.prices[1], 104.0);

    std::istringstream bad("time,price\n0,100\n0,101\n");
    EXPECT_THROW(read_path_csv(bad), InvalidInput);
}

TEST(PayoffCsv, TerminalSlopeContinuesTheLastSegment) {
    std::istringstream in("x,value\n50,0\n100,0\n150,25\n");
    const Payoff p = read_payoff_csv(in);
    EXPECT_DOUBLE_EQ(p.evaluate(150.0), 25.0);
    // Slope of the last written segment is 0.5 and keeps going.
    EXPECT_DOUBLE_EQ(p.evaluate(200.0), 50.0);

    std::istringstream flat("x,value\n100,7\n");
    const Payoff c = read_payoff_csv(flat);
    EXPECT_DOUBLE_EQ(c.evaluate(0.0), 7.0);
    EXPECT_DOUBLE_EQ(c.evaluate(1000.0), 7.0);
}

TEST(PnlCsv, ReadsOptionalProbabilities) {
    std::istringstream plain("pnl\n-5\n1\n2\n");
    const RiskSample a = read_pnl_csv(plain);
    EXPECT_EQ(a.outcomes.size(), 3u);
    EXPECT_TRUE(a.probabilities.empty());

    std::istringstream weighted("pnl,probability\n-5,0.2\n1,0.8\n");
    const RiskSample b = read_pnl_csv(weighted);
    ASSERT_EQ(b.probabilities.size(), 2u);
    EXPECT_DOUBLE_EQ(b.probabilities[0], 0.2);

    std::istringstream bad("pnl,probability\n-5,0.2\n1,0.3\n");
    EXPECT_THROW(read_pnl_csv(bad), InvalidInput);
}

TEST(VolSurfaceJson, WriteReadRoundTripIsExact) {
    const LocalVolSurface surface({0.0, 0.7, 1.5}, {50.0, 100.0, 200.0},
                                  {0.2, 0.21, 0.22, 0.23, 0.24, 0.25, 0.26, 0.27, 0.28});
    std::stringstream buf;
    write_vol_surface_json(buf, surface);
    const LocalVolSurface back = read_vol_surface_json(buf);
    ASSERT_EQ(back.times().size(), 3u);
    ASSERT_EQ(back.prices().size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(back.times()[i], surface.times()[i]);
        EXPECT_EQ(back.prices()[i], surface.prices()[i]);
        for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(back.at(i, j), surface.at(i, j));
    }
}

TEST(VolSurfaceJson, FlatFormAndFailures) {
    std::istringstream flat("{\"vol\": 0.35}");
    const LocalVolSurface s = read_vol_surface_json(flat);
    EXPECT_DOUBLE_EQ(s.value(0.4, 123.0), 0.35);

    std::istringstream broken("{\"times\": [0, 1]");
    EXPECT_THROW(read_vol_surface_json(broken), InvalidInput);

    std::istringstream missing("{\"times\": [0, 1], \"prices\": [50, 150]}");
    EXPECT_THROW(read_vol_surface_json(missing), InvalidInput);

    std::istringstream ragged(
        "{\"times\": [0, 1], \"prices\": [50, 150], \"vols\": [[0.2, 0.2], [0.2]]}");
    EXPECT_THROW(read_vol_surface_json(ragged), InvalidInput);
}

TEST(Writers, EstimateFieldsSurviveTheTrip) {
    McEstimate est;
    est.mean = 10.5;
    est.se = 0.03;
    est.n = 20000;
    est.ci_low = 10.44;
    est.ci_high = 10.56;
    std::ostringstream os;
    JsonWriter w(os);
    w.begin_object();
    w.key("estimate");
    write_estimate(w, est);
    w.end_object();
    w.finish();
    const nlohmann::json j = nlohmann::json::parse(os.str());
    EXPECT_DOUBLE_EQ(j["estimate"]["mean"].get<double>(), 10.5);
    EXPECT_EQ(j["estimate"]["n"].get<std::size_t>(), 20000u);
    EXPECT_DOUBLE_EQ(j["estimate"]["ci_high"].get<double>(), 10.56);
}

TEST(Writers, LpResultFiltersNegligibleAtoms) {
    MartingaleLpResult r;
    r.value = 2.0;
    r.support = {0.0, 100.0, 200.0};
    r.weights = {1e-15, 0.5, 0.5};
    r.cash = 1.0;
    r.forward_units = 0.01;
    r.call_positions = {{100.0, -2.0}};
    r.duality_gap = 1e-12;
    r.iterations = 7;
    std::ostringstream os;
    JsonWriter w(os);
    write_lp_result(w, r);
    w.finish();
    const nlohmann::json j = nlohmann::json::parse(os.str());
    EXPECT_EQ(j["measure"].size(), 2u);
    EXPECT_DOUBLE_EQ(j["measure"][0]["x"].get<double>(), 100.0);
    EXPECT_DOUBLE_EQ(j["dual_hedge"]["calls"][0]["strike"].get<double>(), 100.0);
    EXPECT_DOUBLE_EQ(j["certificates"]["duality_gap"].get<double>(), 1e-12);
    EXPECT_EQ(j["iterations"].get<int>(), 7);
}

TEST(Writers, BatchCsvShapesFollowTheModel) {
    const MarketState market(0.0, 100.0);
    SimSpec spec;
    spec.maturity = 1.0;
    spec.steps = 2;
    spec.paths = 2;
    spec.seed = 3;
    const PathBatch gbm = simulate_paths(market, GbmModel{0.2, std::nullopt}, spec);
    std::ostringstream os;
    write_batch_csv(os, gbm);
    std::istringstream lines(os.str());
    std::string line;
    std::getline(lines, line);
    EXPECT_EQ(line, "path_id,time,price");
    int rows = 0;
    while (std::getline(lines, line)) ++rows;
    EXPECT_EQ(rows, 2 * 3);

    StochVolModel sv;
    sv.sigma = [](double, double, double) { return 0.2; };
    sv.y_drift = [](double, double, double) { return 0.0; };
    sv.y_vol = [](double, double, double) { return 0.0; };
    sv.y0 = 0.04;
    const PathBatch svb = simulate_paths(market, sv, spec);
    std::ostringstream os2;
    write_batch_csv(os2, svb);
    EXPECT_EQ(os2.str().substr(0, os2.str().find('\n')), "path_id,time,price,y");
}

TEST(PayoffSpec, ParsesEveryKind) {
    EXPECT_DOUBLE_EQ(parse_payoff_spec("call:100").evaluate(130.0), 30.0);
    EXPECT_DOUBLE_EQ(parse_payoff_spec("PUT:80").evaluate(60.0), 20.0);
    EXPECT_DOUBLE_EQ(parse_payoff_spec("butterfly:90,100,110").evaluate(100.0), 10.0);
    EXPECT_DOUBLE_EQ(parse_payoff_spec("forward:100").evaluate(60.0), -40.0);
    EXPECT_DOUBLE_EQ(parse_payoff_spec("constant:4.5").evaluate(1.0), 4.5);

    EXPECT_THROW(parse_payoff_spec("call"), InvalidInput);
    EXPECT_THROW(parse_payoff_spec("swap:100"), InvalidInput);
    EXPECT_THROW(parse_payoff_spec("butterfly:90,100"), InvalidInput);
    EXPECT_THROW(parse_payoff_spec("call:ten"), InvalidInput);
    EXPECT_THROW(parse_payoff_spec("pwl:/no/such/file.csv"), InvalidInput);
}

TEST(PayoffSpec, LoadsPiecewiseLinearFiles) {
    const std::string path = testing::TempDir() + "payoff_spec_test.csv";
    {
        std::ofstream out(path);
        out << "x,value\n80,0\n120,40\n160,40\n";
    }
    const Payoff p = parse_payoff_spec("pwl:" + path);
    EXPECT_DOUBLE_EQ(p.evaluate(100.0), 20.0);
    EXPECT_DOUBLE_EQ(p.evaluate(400.0), 40.0);
    std::remove(path.c_str());
}
