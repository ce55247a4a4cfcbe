// Price ingestion, segmentation and feature scaling.

#ifndef SIGMARKET_MARKET_DATA_HPP
#define SIGMARKET_MARKET_DATA_HPP

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sigmarket/path_sig.hpp"

namespace sigmarket {

inline constexpr double kTradingDaysPerYear = 252.0;
inline constexpr int kVolatilityWindow = 10;

struct PriceSeries {
    std::vector<std::chrono::year_month_day> dates;
    std::vector<double> prices;

    std::size_t size() const noexcept { return prices.size(); }
};

std::string format_date(const std::chrono::year_month_day& d);

/// Reads a `date,price` CSV (ISO-8601 dates). Rows are sorted by date.
/// Throws std::invalid_argument naming the offending line for unparsable
/// rows, non-positive prices and duplicate dates.
PriceSeries ingest_csv(const std::filesystem::path& file);
PriceSeries parse_price_csv(std::istream& in, const std::string& source_name = "<stream>");

/// ln S(t + delta) - ln S(t) over consecutive non-overlapping steps of `delta` rows.
std::vector<double> log_returns(const PriceSeries& series, int delta);

/// Non-overlapping log-price windows of `length` days (length + 1 points each),
/// cut from one or more independent sources. Consecutive windows of one source
/// share their boundary point.
struct SegmentSet {
    int segment_length = 0;
    std::vector<PathSample> segments;
    std::vector<std::size_t> source;       // source id per segment
    std::vector<std::size_t> start;        // start row within the source
    std::vector<std::string> start_label;  // date or "path<i>:<row>"
    std::vector<std::vector<double>> sources;  // daily log-prices per source

    std::size_t size() const noexcept { return segments.size(); }
    /// Daily log-returns of segment i, one per day.
    std::vector<double> returns(std::size_t i) const;
};

SegmentSet segment(const PriceSeries& series, int length);

/// Segments each simulated log-price path independently.
SegmentSet segment_paths(const std::vector<PathSample>& log_price_paths, int length);

struct Conditioning {
    double vol = 0.0;    // annualised
    double level = 0.0;  // price at segment start
    std::optional<LogSigVector> prev_logsig;
    bool vol_fallback = false;  // fewer than kVolatilityWindow trailing returns
};

/// Volatility over the trailing kVolatilityWindow daily returns before the
/// segment start (sample std * sqrt(252)), the starting price, and the
/// lead-lag log-signature of the previous segment of the same source.
Conditioning conditioning_features(const SegmentSet& set, std::size_t index, int order);

/// Per-coordinate affine map of the training range onto [margin, 1 - margin].
class MinMaxScaler {
public:
    static constexpr double kMargin = 0.05;

    MinMaxScaler() = default;
    MinMaxScaler(std::vector<double> lo, std::vector<double> hi);

    static MinMaxScaler fit(const std::vector<std::vector<double>>& rows);

    /// Clamped to [0, 1].
    std::vector<double> apply(const std::vector<double>& row) const;
    std::vector<double> invert(const std::vector<double>& row) const;

    std::size_t dim() const noexcept { return lo_.size(); }
    const std::vector<double>& lo() const noexcept { return lo_; }
    const std::vector<double>& hi() const noexcept { return hi_; }

private:
    std::vector<double> lo_;
    std::vector<double> hi_;
};

/// Zero-mean, unit-variance transform (used for conditioning vectors).
class Standardizer {
public:
    Standardizer() = default;
    Standardizer(std::vector<double> mean, std::vector<double> scale);

    static Standardizer fit(const std::vector<std::vector<double>>& rows);

    std::vector<double> apply(const std::vector<double>& row) const;
    std::size_t dim() const noexcept { return mean_.size(); }
    const std::vector<double>& mean() const noexcept { return mean_; }
    const std::vector<double>& scale() const noexcept { return scale_; }

private:
    std::vector<double> mean_;
    std::vector<double> scale_;
};

}  // namespace sigmarket

#endif  // SIGMARKET_MARKET_DATA_HPP
