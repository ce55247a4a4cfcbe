#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "sigmarket/market_data.hpp"
#include "sigmarket/models.hpp"

using namespace sigmarket;

namespace {

PriceSeries make_series(const std::vector<double>& prices) {
    PriceSeries s;
    std::chrono::sys_days day = std::chrono::year{2000} / 1 / 3;
    for (double p : prices) {
        s.dates.emplace_back(day);
        s.prices.push_back(p);
        day += std::chrono::days{1};
    }
    return s;
}

std::string csv_of(const PriceSeries& s) {
    std::ostringstream out;
    out << "date,price\n";
    for (std::size_t i = 0; i < s.size(); ++i) out << format_date(s.dates[i]) << "," << s.prices[i] << "\n";
    return out.str();
}

}  // namespace

TEST(IngestCsv, WellFormedFile) {
    std::istringstream in("date,price\n2020-01-03,101.5\n2020-01-02,100\n2020-01-06,99.25\n");
    auto s = parse_price_csv(in);
    ASSERT_EQ(s.size(), 3u);
    EXPECT_EQ(s.prices[0], 100.0);  // sorted by date
    EXPECT_EQ(format_date(s.dates[2]), "2020-01-06");
}

TEST(IngestCsv, NegativePriceNamesLine) {
    std::istringstream in("date,price\n2020-01-02,100\n2020-01-03,-5\n");
    try {
        parse_price_csv(in, "prices.csv");
        FAIL() << "expected an error";
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("prices.csv:3"), std::string::npos) << e.what();
    }
}

TEST(IngestCsv, RejectsBadRowsAndDuplicates) {
    std::istringstream bad_date("date,price\n2020-13-02,100\n");
    EXPECT_THROW(parse_price_csv(bad_date), std::invalid_argument);
    std::istringstream bad_price("date,price\n2020-01-02,abc\n");
    EXPECT_THROW(parse_price_csv(bad_price), std::invalid_argument);
    std::istringstream three_cols("date,price\n2020-01-02,1,2\n");
    EXPECT_THROW(parse_price_csv(three_cols), std::invalid_argument);
    std::istringstream dup("date,price\n2020-01-02,1\n2020-01-03,2\n2020-01-02,3\n");
    try {
        parse_price_csv(dup);
        FAIL();
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find(":4:"), std::string::npos) << e.what();
    }
    EXPECT_THROW(ingest_csv("/nonexistent/file.csv"), std::invalid_argument);
}

TEST(IngestCsv, TwentyYearsGiveAboutTwoHundredFiftyMonths) {
    auto paths = simulate_gbm(GbmParams{}, SimulationGrid{4999, 1, 252.0}, 1, 3);
    std::vector<double> prices;
    for (double lp : paths[0].values()) prices.push_back(std::exp(lp));
    std::istringstream in(csv_of(make_series(prices)));
    auto s = parse_price_csv(in);
    ASSERT_EQ(s.size(), 5000u);
    EXPECT_EQ(segment(s, 20).size(), 249u);
    EXPECT_EQ(segment(s, 5).size(), 999u);
}

TEST(LogReturns, Examples) {
    EXPECT_EQ(log_returns(make_series({100, 100}), 1), std::vector<double>{0.0});
    auto r = log_returns(make_series({100, 110}), 1);
    ASSERT_EQ(r.size(), 1u);
    EXPECT_NEAR(r[0], 0.0953101798, 1e-9);
    auto s = make_series({100, 101, 102, 103, 104, 105, 106, 107, 108, 109, 110});
    EXPECT_EQ(log_returns(s, 1).size(), 10u);
    EXPECT_EQ(log_returns(s, 5).size(), 2u);
    EXPECT_NEAR(log_returns(s, 5)[0], std::log(105.0 / 100.0), 1e-15);
    EXPECT_THROW(log_returns(s, 20), std::invalid_argument);
    EXPECT_THROW(log_returns(s, 0), std::invalid_argument);
}

TEST(Segment, CountsAndPartition) {
    std::vector<double> prices;
    for (int i = 0; i < 101; ++i) prices.push_back(100.0 + std::sin(i));
    auto s = make_series(prices);
    auto set = segment(s, 20);
    ASSERT_EQ(set.size(), 5u);
    for (std::size_t i = 0; i < set.size(); ++i) {
        EXPECT_EQ(set.segments[i].size(), 21u);
        EXPECT_EQ(set.start[i], 20 * i);
        if (i > 0) EXPECT_EQ(set.segments[i].value(0), set.segments[i - 1].value(20));  // no gap, no overlap
        double sum = 0.0;
        for (double r : set.returns(i)) sum += r;
        EXPECT_NEAR(sum, set.segments[i].value(20) - set.segments[i].value(0), 1e-12);
    }
    EXPECT_EQ(set.start_label[1], format_date(s.dates[20]));
    EXPECT_THROW(segment(make_series({1, 2, 3}), 5), std::invalid_argument);
}

TEST(Scaler, MarginsDegenerateAndRoundTrip) {
    std::vector<std::vector<double>> rows{{1.0, 3.0}, {2.0, 3.0}, {5.0, 3.0}};
    auto sc = MinMaxScaler::fit(rows);
    EXPECT_DOUBLE_EQ(sc.apply({1.0, 3.0})[0], 0.05);
    EXPECT_DOUBLE_EQ(sc.apply({5.0, 3.0})[0], 0.95);
    EXPECT_DOUBLE_EQ(sc.apply({2.0, 3.0})[1], 0.5);
    EXPECT_DOUBLE_EQ(sc.apply({100.0, 3.0})[0], 1.0);
    EXPECT_DOUBLE_EQ(sc.apply({-100.0, 3.0})[0], 0.0);
    EXPECT_THROW(MinMaxScaler::fit({}), std::invalid_argument);

    std::mt19937_64 rng(2);
    std::normal_distribution<double> n01(0.0, 3.0);
    std::vector<std::vector<double>> data(50, std::vector<double>(6));
    for (auto& r : data)
        for (double& v : r) v = n01(rng);
    auto fit = MinMaxScaler::fit(data);
    for (const auto& r : data) {
        auto back = fit.invert(fit.apply(r));
        for (std::size_t j = 0; j < r.size(); ++j) EXPECT_NEAR(back[j], r[j], 1e-12);
    }
    // strictly monotone per coordinate
    for (std::size_t j = 0; j < 6; ++j) {
        std::vector<double> a = data[0], b = data[0];
        a[j] = fit.lo()[j] + 0.25 * (fit.hi()[j] - fit.lo()[j]);
        b[j] = fit.lo()[j] + 0.75 * (fit.hi()[j] - fit.lo()[j]);
        EXPECT_LT(fit.apply(a)[j], fit.apply(b)[j]);
    }
}

TEST(Standardizer, ZeroMeanUnitVariance) {
    std::vector<std::vector<double>> rows{{1.0, 7.0}, {3.0, 7.0}, {5.0, 7.0}};
    auto st = Standardizer::fit(rows);
    double sum = 0.0, sq = 0.0;
    for (const auto& r : rows) {
        auto z = st.apply(r);
        sum += z[0];
        sq += z[0] * z[0];
        EXPECT_EQ(z[1], 0.0);
    }
    EXPECT_NEAR(sum, 0.0, 1e-12);
    EXPECT_NEAR(sq / 3.0, 1.0, 1e-12);
}

TEST(Conditioning, ConstantPricesAndBoundaries) {
    auto set = segment(make_series(std::vector<double>(61, 50.0)), 20);
    auto first = conditioning_features(set, 0, 3);
    EXPECT_FALSE(first.prev_logsig.has_value());
    EXPECT_TRUE(first.vol_fallback);
    EXPECT_EQ(first.vol, 0.0);
    auto second = conditioning_features(set, 1, 3);
    EXPECT_TRUE(second.prev_logsig.has_value());
    EXPECT_FALSE(second.vol_fallback);
    EXPECT_EQ(second.vol, 0.0);
    EXPECT_DOUBLE_EQ(second.level, 50.0);
    EXPECT_EQ(second.prev_logsig->coords.size(), witt_dimension(2, 3));
}

TEST(Conditioning, PrevLogsigStaysWithinSource) {
    auto paths = simulate_gbm(GbmParams{}, SimulationGrid{40, 1, 252.0}, 2, 1);
    auto set = segment_paths(paths, 20);
    ASSERT_EQ(set.size(), 4u);
    EXPECT_TRUE(conditioning_features(set, 1, 2).prev_logsig.has_value());
    EXPECT_FALSE(conditioning_features(set, 2, 2).prev_logsig.has_value());
}

TEST(Conditioning, GbmVolatilityEstimate) {
    auto paths = simulate_gbm(GbmParams{0.0, 0.2, 100.0}, SimulationGrid{2000, 1, 252.0}, 1, 17);
    auto set = segment_paths(paths, 20);
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 1; i < set.size(); ++i) {
        auto c = conditioning_features(set, i, 2);
        EXPECT_FALSE(c.vol_fallback);
        sum += c.vol;
        ++n;
    }
    EXPECT_NEAR(sum / n, 0.2, 0.03);
}
