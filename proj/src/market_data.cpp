#include "sigmarket/market_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace sigmarket {

namespace {

std::string trim(std::string s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::optional<std::chrono::year_month_day> parse_date(const std::string& text) {
    int y = 0;
    unsigned m = 0, d = 0;
    char tail = 0;
    if (text.size() != 10 || std::sscanf(text.c_str(), "%4d-%2u-%2u%c", &y, &m, &d, &tail) != 3) return std::nullopt;
    std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    if (!ymd.ok()) return std::nullopt;
    return ymd;
}

std::optional<double> parse_double(const std::string& text) {
    double v = 0.0;
    const char* begin = text.data();
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end || !std::isfinite(v)) return std::nullopt;
    return v;
}

double sample_std(const std::vector<double>& x) {
    if (x.size() < 2) return 0.0;
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

void append_segments(SegmentSet& set, const std::vector<double>& log_prices, std::size_t source_id,
                     const std::vector<std::string>& labels) {
    const std::size_t len = static_cast<std::size_t>(set.segment_length);
    const std::size_t count = (log_prices.size() - 1) / len;
    for (std::size_t s = 0; s < count; ++s) {
        const std::size_t begin = s * len;
        std::vector<double> times(len + 1), values(len + 1);
        for (std::size_t k = 0; k <= len; ++k) {
            times[k] = static_cast<double>(k);
            values[k] = log_prices[begin + k];
        }
        set.segments.emplace_back(std::move(times), std::move(values), 1);
        set.source.push_back(source_id);
        set.start.push_back(begin);
        set.start_label.push_back(labels[begin]);
    }
}

}  // namespace

std::string format_date(const std::chrono::year_month_day& d) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()), static_cast<unsigned>(d.month()),
                  static_cast<unsigned>(d.day()));
    return buf;
}

PriceSeries parse_price_csv(std::istream& in, const std::string& source_name) {
    std::vector<std::pair<std::chrono::year_month_day, double>> rows;
    std::vector<std::size_t> line_of;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    auto fail = [&](std::size_t ln, const std::string& what) {
        throw std::invalid_argument(source_name + ":" + std::to_string(ln) + ": " + what);
    };
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty()) continue;
        if (!header_seen) {
            header_seen = true;
            std::string lower = t;
            std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
            if (lower.rfind("date", 0) == 0) continue;
        }
        const auto comma = t.find(',');
        if (comma == std::string::npos || t.find(',', comma + 1) != std::string::npos) {
            fail(line_no, "expected two columns 'date,price'");
        }
        const auto date = parse_date(trim(t.substr(0, comma)));
        if (!date) fail(line_no, "unparsable date '" + trim(t.substr(0, comma)) + "'");
        const auto price = parse_double(trim(t.substr(comma + 1)));
        if (!price) fail(line_no, "unparsable price '" + trim(t.substr(comma + 1)) + "'");
        if (*price <= 0.0) fail(line_no, "non-positive price " + trim(t.substr(comma + 1)));
        rows.emplace_back(*date, *price);
        line_of.push_back(line_no);
    }
    std::vector<std::size_t> order(rows.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rows[a].first < rows[b].first; });
    PriceSeries out;
    for (std::size_t k = 0; k < order.size(); ++k) {
        const auto& r = rows[order[k]];
        if (k > 0 && r.first == out.dates.back()) fail(line_of[order[k]], "duplicate date " + format_date(r.first));
        out.dates.push_back(r.first);
        out.prices.push_back(r.second);
    }
    return out;
}

PriceSeries ingest_csv(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw std::invalid_argument("cannot open price file " + file.string());
    return parse_price_csv(in, file.string());
}

std::vector<double> log_returns(const PriceSeries& series, int delta) {
    if (delta < 1) throw std::invalid_argument("log_returns: delta must be >= 1");
    if (series.size() <= static_cast<std::size_t>(delta)) throw std::invalid_argument("log_returns: series too short");
    std::vector<double> out;
    for (std::size_t i = 0; i + static_cast<std::size_t>(delta) < series.size(); i += static_cast<std::size_t>(delta)) {
        out.push_back(std::log(series.prices[i + static_cast<std::size_t>(delta)]) - std::log(series.prices[i]));
    }
    return out;
}

std::vector<double> SegmentSet::returns(std::size_t i) const {
    const auto& seg = segments[i];
    std::vector<double> r(seg.size() - 1);
    for (std::size_t k = 1; k < seg.size(); ++k) r[k - 1] = seg.value(k) - seg.value(k - 1);
    return r;
}

SegmentSet segment(const PriceSeries& series, int length) {
    if (length < 1) throw std::invalid_argument("segment: length must be >= 1");
    if (series.size() < static_cast<std::size_t>(length) + 1) {
        throw std::invalid_argument("segment: series of " + std::to_string(series.size()) +
                                    " prices is too short for length " + std::to_string(length));
    }
    SegmentSet set;
    set.segment_length = length;
    std::vector<double> lp(series.size());
    std::vector<std::string> labels(series.size());
    for (std::size_t i = 0; i < series.size(); ++i) {
        lp[i] = std::log(series.prices[i]);
        labels[i] = format_date(series.dates[i]);
    }
    append_segments(set, lp, 0, labels);
    set.sources.push_back(std::move(lp));
    return set;
}

SegmentSet segment_paths(const std::vector<PathSample>& log_price_paths, int length) {
    if (length < 1) throw std::invalid_argument("segment_paths: length must be >= 1");
    SegmentSet set;
    set.segment_length = length;
    for (std::size_t p = 0; p < log_price_paths.size(); ++p) {
        const auto& path = log_price_paths[p];
        if (path.dim() != 1) throw std::invalid_argument("segment_paths: expected one-dimensional log-price paths");
        if (path.size() < static_cast<std::size_t>(length) + 1) {
            throw std::invalid_argument("segment_paths: path " + std::to_string(p) + " is too short");
        }
        std::vector<double> lp(path.values());
        std::vector<std::string> labels(lp.size());
        for (std::size_t i = 0; i < lp.size(); ++i) labels[i] = "path" + std::to_string(p) + ":" + std::to_string(i);
        append_segments(set, lp, p, labels);
        set.sources.push_back(std::move(lp));
    }
    return set;
}

Conditioning conditioning_features(const SegmentSet& set, std::size_t index, int order) {
    if (index >= set.size()) throw std::out_of_range("conditioning_features: segment index out of range");
    const auto& src = set.sources[set.source[index]];
    const std::size_t start = set.start[index];
    Conditioning c;
    c.level = std::exp(src[start]);

    std::vector<double> trailing;
    if (start >= static_cast<std::size_t>(kVolatilityWindow)) {
        for (std::size_t k = start - kVolatilityWindow + 1; k <= start; ++k) trailing.push_back(src[k] - src[k - 1]);
    } else {
        c.vol_fallback = true;
        for (std::size_t k = 1; k < src.size(); ++k) trailing.push_back(src[k] - src[k - 1]);
    }
    c.vol = sample_std(trailing) * std::sqrt(kTradingDaysPerYear);

    if (index > 0 && set.source[index - 1] == set.source[index]) {
        c.prev_logsig = lead_lag_log_signature(set.segments[index - 1], order);
    }
    return c;
}

MinMaxScaler::MinMaxScaler(std::vector<double> lo, std::vector<double> hi) : lo_(std::move(lo)), hi_(std::move(hi)) {
    if (lo_.size() != hi_.size()) throw std::invalid_argument("MinMaxScaler: size mismatch");
    for (std::size_t j = 0; j < lo_.size(); ++j) {
        if (!(hi_[j] >= lo_[j])) throw std::invalid_argument("MinMaxScaler: max < min");
    }
}

MinMaxScaler MinMaxScaler::fit(const std::vector<std::vector<double>>& rows) {
    if (rows.empty() || rows.front().empty()) throw std::invalid_argument("MinMaxScaler::fit: empty input");
    std::vector<double> lo = rows.front(), hi = rows.front();
    for (const auto& r : rows) {
        if (r.size() != lo.size()) throw std::invalid_argument("MinMaxScaler::fit: ragged rows");
        for (std::size_t j = 0; j < r.size(); ++j) {
            lo[j] = std::min(lo[j], r[j]);
            hi[j] = std::max(hi[j], r[j]);
        }
    }
    return MinMaxScaler(std::move(lo), std::move(hi));
}

std::vector<double> MinMaxScaler::apply(const std::vector<double>& row) const {
    if (row.size() != lo_.size()) throw std::invalid_argument("MinMaxScaler::apply: dimension mismatch");
    std::vector<double> out(row.size());
    for (std::size_t j = 0; j < row.size(); ++j) {
        const double range = hi_[j] - lo_[j];
        const double v = range > 0.0 ? kMargin + (1.0 - 2.0 * kMargin) * (row[j] - lo_[j]) / range : 0.5;
        out[j] = std::clamp(v, 0.0, 1.0);
    }
    return out;
}

std::vector<double> MinMaxScaler::invert(const std::vector<double>& row) const {
    if (row.size() != lo_.size()) throw std::invalid_argument("MinMaxScaler::invert: dimension mismatch");
    std::vector<double> out(row.size());
    for (std::size_t j = 0; j < row.size(); ++j) {
        const double range = hi_[j] - lo_[j];
        out[j] = range > 0.0 ? lo_[j] + (row[j] - kMargin) * range / (1.0 - 2.0 * kMargin) : lo_[j];
    }
    return out;
}

Standardizer::Standardizer(std::vector<double> mean, std::vector<double> scale)
    : mean_(std::move(mean)), scale_(std::move(scale)) {
    if (mean_.size() != scale_.size()) throw std::invalid_argument("Standardizer: size mismatch");
}

Standardizer Standardizer::fit(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw std::invalid_argument("Standardizer::fit: empty input");
    const std::size_t d = rows.front().size();
    std::vector<double> mean(d, 0.0), scale(d, 0.0);
    for (const auto& r : rows) {
        if (r.size() != d) throw std::invalid_argument("Standardizer::fit: ragged rows");
        for (std::size_t j = 0; j < d; ++j) mean[j] += r[j];
    }
    for (double& m : mean) m /= static_cast<double>(rows.size());
    for (const auto& r : rows)
        for (std::size_t j = 0; j < d; ++j) scale[j] += (r[j] - mean[j]) * (r[j] - mean[j]);
    for (double& s : scale) {
        s = std::sqrt(s / static_cast<double>(rows.size()));
        if (!(s > 0.0)) s = 1.0;  // constant column: centre only
    }
    return Standardizer(std::move(mean), std::move(scale));
}

std::vector<double> Standardizer::apply(const std::vector<double>& row) const {
    if (row.size() != mean_.size()) throw std::invalid_argument("Standardizer::apply: dimension mismatch");
    std::vector<double> out(row.size());
    for (std::size_t j = 0; j < row.size(); ++j) out[j] = (row[j] - mean_[j]) / scale_[j];
    return out;
}

}  // namespace sigmarket
