#include "sigmarket/pipeline.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

#include "sigmarket/random.hpp"

namespace sigmarket {

namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kConditionModes{"vol", "level", "prev_logsig"};

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
    T out{};
    const auto* end = value.data() + value.size();
    auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (ec != std::errc() || ptr != end) throw std::invalid_argument("config: " + key + ": cannot parse '" + value + "'");
    return out;
}

std::string hex64(std::uint64_t v) {
    std::ostringstream s;
    s << std::hex << std::setw(16) << std::setfill('0') << v;
    return s.str();
}

std::string slurp(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw std::invalid_argument("missing input " + file.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::string file_hash(const fs::path& file) { return hex64(fnv1a(slurp(file))); }

fs::path require(const fs::path& file, const char* producer) {
    if (!fs::exists(file)) {
        throw std::invalid_argument("missing input " + file.string() + " (run `sigmarket " + producer + "` first)");
    }
    return file;
}

std::ofstream open_out(const fs::path& file) {
    if (file.has_parent_path()) fs::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + file.string());
    out.precision(17);
    return out;
}

void write_manifest(const PipelineConfig& cfg, const std::string& command, const std::vector<fs::path>& inputs,
                    const std::vector<fs::path>& outputs) {
    nlohmann::ordered_json j;
    j["command"] = command;
    j["config_file"] = cfg.file.string();
    j["config_hash"] = hex64(cfg.hash());
    j["seed"] = cfg.seed;
    j["inputs"] = nlohmann::ordered_json::object();
    for (const auto& p : inputs) j["inputs"][p.string()] = file_hash(p);
    j["outputs"] = nlohmann::ordered_json::object();
    for (const auto& p : outputs) {
        if (fs::is_regular_file(p)) j["outputs"][p.string()] = file_hash(p);
    }
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::ostringstream ts;
    ts << std::put_time(std::gmtime(&now), "%Y-%m-%dT%H:%M:%SZ");
    j["created"] = ts.str();
    auto out = open_out(cfg.out / ("manifest-" + command + ".json"));
    out << j.dump(2) << "\n";
}

std::vector<std::string> numbered(const std::string& prefix, std::size_t n, std::size_t first = 0) {
    std::vector<std::string> h;
    for (std::size_t i = 0; i < n; ++i) h.push_back(prefix + std::to_string(first + i));
    return h;
}

// Table with a leading integer id column stripped off.
std::vector<std::vector<double>> body(const CsvTable& t, std::size_t skip = 1) {
    std::vector<std::vector<double>> out;
    for (const auto& r : t.rows) out.emplace_back(r.begin() + static_cast<std::ptrdiff_t>(skip), r.end());
    return out;
}

std::vector<double> column0(const CsvTable& t) {
    std::vector<double> c;
    for (const auto& r : t.rows) c.push_back(r.front());
    return c;
}

struct Scalers {
    MinMaxScaler features;
    Standardizer conds;
};

Scalers load_scalers(const PipelineConfig& cfg) {
    Scalers s;
    const auto f = read_csv_table(require(cfg.out / "scaler.csv", "preprocess"));
    if (f.rows.size() != 2) throw std::invalid_argument("scaler.csv: expected lo and hi rows");
    s.features = MinMaxScaler(body(f)[0], body(f)[1]);
    if (cfg.cond_dim() > 0) {
        const auto c = read_csv_table(require(cfg.out / "cond_scaler.csv", "preprocess"));
        if (c.rows.size() != 2) throw std::invalid_argument("cond_scaler.csv: expected mean and scale rows");
        s.conds = Standardizer(body(c)[0], body(c)[1]);
    }
    return s;
}

VaeParams load_model(const PipelineConfig& cfg) {
    std::ifstream in(require(cfg.out / "model.vae", "train"));
    return load_vae(in);
}

// Rows used for training: raw conditioning vectors and segment start prices.
struct TrainingContext {
    std::vector<double> segment_ids;
    std::vector<std::vector<double>> conds;  // raw, possibly empty rows
    std::vector<double> start_prices;
};

TrainingContext training_context(const PipelineConfig& cfg) {
    TrainingContext ctx;
    const auto features = read_csv_table(require(cfg.out / "features.csv", "preprocess"));
    ctx.segment_ids = column0(features);
    const auto segs = read_segments_csv(require(cfg.out / "segments.csv", "ingest"));
    for (double id : ctx.segment_ids) {
        ctx.start_prices.push_back(std::exp(segs.segments.at(static_cast<std::size_t>(id)).value(0)));
    }
    if (cfg.cond_dim() > 0) {
        ctx.conds = body(read_csv_table(require(cfg.out / "conditions.csv", "preprocess")));
        if (ctx.conds.size() != ctx.segment_ids.size()) throw std::invalid_argument("conditions.csv does not align with features.csv");
    } else {
        ctx.conds.assign(ctx.segment_ids.size(), {});
    }
    if (ctx.segment_ids.empty()) throw std::invalid_argument("features.csv has no rows");
    return ctx;
}

double trailing_vol(const std::vector<double>& log_path) {
    std::vector<double> r;
    for (std::size_t i = 1; i < log_path.size(); ++i) r.push_back(log_path[i] - log_path[i - 1]);
    if (r.size() > static_cast<std::size_t>(kVolatilityWindow)) r.erase(r.begin(), r.end() - kVolatilityWindow);
    if (r.size() < 2) return 0.0;
    const double mean = std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(r.size());
    double ss = 0.0;
    for (double v : r) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / static_cast<double>(r.size() - 1)) * std::sqrt(kTradingDaysPerYear);
}

std::vector<TensorSeries> signatures_of(const std::vector<PathSample>& paths, int order) {
    std::vector<TensorSeries> out(paths.size(), TensorSeries(1, 1));
    parallel_for(paths.size(), [&](std::size_t i) { out[i] = lead_lag_signature(paths[i], order); });
    return out;
}

std::vector<TensorSeries> signatures_of(const std::vector<std::vector<double>>& logsigs, int order) {
    std::vector<TensorSeries> out(logsigs.size(), TensorSeries(1, 1));
    parallel_for(logsigs.size(), [&](std::size_t i) { out[i] = signature_from_log(LogSigVector{2, order, logsigs[i]}); });
    return out;
}

double sample_sd(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double mean_of(const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

SegmentSet vol_bucket(const SegmentSet& set, const PipelineConfig& cfg) {
    SegmentSet out;
    out.segment_length = set.segment_length;
    out.sources = set.sources;
    for (std::size_t i = 0; i < set.size(); ++i) {
        if (std::abs(conditioning_features(set, i, cfg.order).vol - cfg.vol_level) > cfg.vol_bucket) continue;
        out.segments.push_back(set.segments[i]);
        out.source.push_back(set.source[i]);
        out.start.push_back(set.start[i]);
        out.start_label.push_back(set.start_label[i]);
    }
    if (out.size() < 2) {
        throw std::invalid_argument("vol_filter: fewer than 2 real segments start within " + std::to_string(cfg.vol_bucket) +
                                    " of vol " + std::to_string(cfg.vol_level));
    }
    return out;
}

}  // namespace

// ---------------------------------------------------------------- config

PipelineConfig PipelineConfig::parse(const std::string& text) {
    PipelineConfig c;
    c.text = text;
    std::istringstream in(text);
    std::vector<CLI::ConfigItem> items;
    try {
        items = CLI::ConfigINI().from_config(in);
    } catch (const CLI::Error& e) {
        throw std::invalid_argument(std::string("config: ") + e.what());
    }

    using Setter = std::function<void(const std::string& key, const std::vector<std::string>& v)>;
    auto one = [](const std::string& key, const std::vector<std::string>& v) {
        if (v.size() != 1) throw std::invalid_argument("config: " + key + " expects a single value");
        return v.front();
    };
    auto i32 = [&](int& dst) -> Setter { return [&, one](auto& k, auto& v) { dst = parse_number<int>(k, one(k, v)); }; };
    auto f64 = [&](double& dst) -> Setter { return [&, one](auto& k, auto& v) { dst = parse_number<double>(k, one(k, v)); }; };
    auto u64 = [&](std::uint64_t& dst) -> Setter {
        return [&, one](auto& k, auto& v) { dst = parse_number<std::uint64_t>(k, one(k, v)); };
    };
    auto size = [&](std::size_t& dst) -> Setter {
        return [&, one](auto& k, auto& v) { dst = parse_number<std::size_t>(k, one(k, v)); };
    };
    auto str = [&](std::string& dst) -> Setter { return [&, one](auto& k, auto& v) { dst = one(k, v); }; };
    auto path = [&](fs::path& dst) -> Setter { return [&, one](auto& k, auto& v) { dst = one(k, v); }; };

    const std::map<std::string, Setter> setters{
        {"run.seed", u64(c.seed)},
        {"run.out", path(c.out)},
        {"data.source", str(c.source)},
        {"data.csv", path(c.csv)},
        {"data.segment_length", i32(c.segment_length)},
        {"simulate.model", str(c.model)},
        {"simulate.paths", i32(c.sim_paths)},
        {"simulate.horizon_days", i32(c.grid.horizon_days)},
        {"simulate.steps_per_day", i32(c.grid.steps_per_day)},
        {"simulate.hurst", f64(c.rbergomi.hurst)},
        {"simulate.nu", f64(c.rbergomi.nu)},
        {"simulate.rho", f64(c.rbergomi.rho)},
        {"simulate.xi0", f64(c.rbergomi.xi0)},
        {"simulate.s0", [&](auto& k, auto& v) { c.rbergomi.s0 = c.gbm.s0 = parse_number<double>(k, one(k, v)); }},
        {"simulate.mu", f64(c.gbm.mu)},
        {"simulate.sigma", f64(c.gbm.sigma)},
        {"features.order", i32(c.order)},
        {"features.representation",
         [&](auto& k, auto& v) {
             const auto r = one(k, v);
             if (r == "logsig") c.representation = Representation::LogSignature;
             else if (r == "returns") c.representation = Representation::Returns;
             else throw std::invalid_argument("config: " + k + " must be logsig or returns");
         }},
        {"features.conditioning",
         [&](auto&, auto& v) {
             c.conditioning.clear();
             for (const auto& m : v) {
                 if (m == "none") continue;
                 c.conditioning.push_back(m);
             }
         }},
        {"vae.latent_dim", i32(c.vae.latent_dim)},
        {"vae.hidden_units", i32(c.vae.hidden_units)},
        {"vae.leaky_alpha", f64(c.vae.leaky_alpha)},
        {"vae.recon_sigma", f64(c.vae.recon_sigma)},
        {"vae.epochs", i32(c.vae.epochs)},
        {"vae.batch_size", i32(c.vae.batch_size)},
        {"vae.learning_rate", f64(c.vae.learning_rate)},
        {"generate.n", size(c.n_generate)},
        {"inversion.population_size", i32(c.inversion.population_size)},
        {"inversion.generations", i32(c.inversion.generations)},
        {"inversion.elite_fraction", f64(c.inversion.elite_fraction)},
        {"inversion.mutation_scale", f64(c.inversion.mutation_scale)},
        {"inversion.anneal", f64(c.inversion.anneal)},
        {"inversion.pip_size", f64(c.inversion.pip_size)},
        {"inversion.tolerance", f64(c.inversion.tolerance)},
        {"inversion.max_failure_fraction", f64(c.max_failure_fraction)},
        {"inversion.start_price", f64(c.start_price)},
        {"evaluate.alpha", f64(c.alpha)},
        {"evaluate.max_lag", i32(c.max_lag)},
        {"evaluate.amplitude", f64(c.amplitude)},
        {"evaluate.segment_length", i32(c.eval_segment_length)},
        {"concat.segments", i32(c.concat_segments)},
        {"concat.start_index", size(c.concat_start)},
        {"smalldata.small", size(c.small_n)},
        {"smalldata.large", size(c.large_n)},
        {"smalldata.test", size(c.test_n)},
        {"smalldata.small_epochs", i32(c.small_epochs)},
        {"smalldata.large_epochs", i32(c.large_epochs)},
        {"smalldata.seeds", i32(c.smalldata_seeds)},
        {"smalldata.null_seeds", i32(c.null_seeds)},
        {"smalldata.segment_length", i32(c.smalldata_length)},
        {"vol_filter.level", f64(c.vol_level)},
        {"vol_filter.bucket", f64(c.vol_bucket)},
    };

    for (const auto& item : items) {
        if (item.name == "++" || item.name == "--") continue;
        std::string key;
        for (const auto& p : item.parents) key += p + ".";
        key += item.name;
        const auto it = setters.find(key);
        if (it == setters.end()) throw std::invalid_argument("config: unknown key '" + key + "'");
        it->second(key, item.inputs);
    }
    return c;
}

PipelineConfig PipelineConfig::load(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw std::invalid_argument("cannot read config " + file.string());
    std::ostringstream s;
    s << in.rdbuf();
    auto c = parse(s.str());
    c.file = file;
    return c;
}

bool PipelineConfig::has_condition(const std::string& mode) const {
    return std::find(conditioning.begin(), conditioning.end(), mode) != conditioning.end();
}

int PipelineConfig::cond_dim() const {
    int d = 0;
    if (has_condition("vol")) d += 1;
    if (has_condition("level")) d += 1;
    if (has_condition("prev_logsig")) d += static_cast<int>(witt_dimension(2, order));
    return d;
}

std::uint64_t PipelineConfig::hash() const { return fnv1a(text); }

void PipelineConfig::validate() const {
    auto fail = [](const std::string& m) { throw std::invalid_argument("config: " + m); };
    if (source != "simulated" && source != "csv") fail("data.source must be simulated or csv");
    if (source == "csv" && csv.empty()) fail("data.csv is required when data.source = csv");
    if (segment_length < 1) fail("data.segment_length must be >= 1");
    if (model != "rbergomi" && model != "gbm") fail("simulate.model must be rbergomi or gbm");
    if (sim_paths < 1) fail("simulate.paths must be >= 1");
    if (grid.steps() > 1000) {
        fail("simulate.horizon_days * steps_per_day must be <= 1000 (exact simulation is cubic in the grid size); "
             "use more paths instead");
    }
    grid.validate();
    if (model == "rbergomi") rbergomi.validate();
    else gbm.validate();
    if (order < 2 || order > kMaxTruncationOrder) fail("features.order must lie in [2, " + std::to_string(kMaxTruncationOrder) + "]");
    for (const auto& m : conditioning) {
        if (std::find(kConditionModes.begin(), kConditionModes.end(), m) == kConditionModes.end()) {
            fail("features.conditioning: unknown mode '" + m + "' (expected none, vol, level, prev_logsig)");
        }
    }
    VaeConfig v = vae;
    v.input_dim = 1;
    v.validate();
    InversionConfig inv = inversion;
    inv.path_length = segment_length + 1;
    inv.validate();
    if (!(max_failure_fraction >= 0.0 && max_failure_fraction <= 1.0)) fail("inversion.max_failure_fraction must lie in [0, 1]");
    if (start_price < 0.0) fail("inversion.start_price must be >= 0");
    if (!(alpha > 0.0 && alpha < 1.0)) fail("evaluate.alpha must lie in (0, 1)");
    if (max_lag < 1) fail("evaluate.max_lag must be >= 1");
    if (!(amplitude > 0.0)) fail("evaluate.amplitude must be > 0");
    if (eval_segment_length < 0 || (eval_segment_length > 0 && eval_segment_length % segment_length != 0)) {
        fail("evaluate.segment_length must be a multiple of data.segment_length");
    }
    if (concat_segments < 1) fail("concat.segments must be >= 1");
    if (small_n < 2 || large_n < 2 || test_n < 2) fail("smalldata sizes must be >= 2");
    if (small_epochs < 1 || large_epochs < 1 || smalldata_seeds < 1 || null_seeds < 2) fail("smalldata budgets must be positive (null_seeds >= 2)");
    if (smalldata_length < 2) fail("smalldata.segment_length must be >= 2");
    if (vol_level < 0.0 || !(vol_bucket > 0.0)) fail("vol_filter.level must be >= 0 and vol_filter.bucket > 0");
    if (vol_level > 0.0 && !has_condition("vol")) fail("vol_filter.level requires vol in features.conditioning");
}

std::vector<double> condition_vector(const Conditioning& c, const PipelineConfig& cfg) {
    std::vector<double> v;
    if (cfg.has_condition("vol")) v.push_back(c.vol);
    if (cfg.has_condition("level")) v.push_back(c.level);
    if (cfg.has_condition("prev_logsig")) {
        if (!c.prev_logsig) throw std::invalid_argument("condition_vector: previous log-signature unavailable");
        v.insert(v.end(), c.prev_logsig->coords.begin(), c.prev_logsig->coords.end());
    }
    return v;
}

// ---------------------------------------------------------------- csv

CsvTable read_csv_table(const fs::path& file) {
    std::istringstream in(slurp(file));
    CsvTable t;
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument(file.string() + ": empty file");
    {
        std::istringstream h(line);
        std::string cell;
        while (std::getline(h, cell, ',')) t.header.push_back(cell);
    }
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<double> row;
        std::istringstream r(line);
        std::string cell;
        while (std::getline(r, cell, ',')) {
            try {
                row.push_back(parse_number<double>("value", cell));
            } catch (const std::invalid_argument&) {
                throw std::invalid_argument(file.string() + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
            }
        }
        if (row.size() != t.header.size()) {
            throw std::invalid_argument(file.string() + ":" + std::to_string(lineno) + ": expected " +
                                        std::to_string(t.header.size()) + " fields, got " + std::to_string(row.size()));
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

void write_csv_table(const fs::path& file, const CsvTable& t) {
    auto out = open_out(file);
    for (std::size_t i = 0; i < t.header.size(); ++i) out << (i ? "," : "") << t.header[i];
    out << "\n";
    for (const auto& r : t.rows) {
        for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << r[i];
        out << "\n";
    }
}

void write_segments_csv(const fs::path& file, const SegmentSet& set) {
    CsvTable t;
    t.header = {"segment", "source", "start"};
    const auto xs = numbered("x", static_cast<std::size_t>(set.segment_length) + 1);
    t.header.insert(t.header.end(), xs.begin(), xs.end());
    for (std::size_t i = 0; i < set.size(); ++i) {
        std::vector<double> r{static_cast<double>(i), static_cast<double>(set.source[i]), static_cast<double>(set.start[i])};
        r.insert(r.end(), set.segments[i].values().begin(), set.segments[i].values().end());
        t.rows.push_back(std::move(r));
    }
    write_csv_table(file, t);
}

SegmentSet read_segments_csv(const fs::path& file) {
    const auto t = read_csv_table(file);
    if (t.header.size() < 5 || t.header[0] != "segment") throw std::invalid_argument(file.string() + ": not a segments file");
    SegmentSet set;
    set.segment_length = static_cast<int>(t.header.size()) - 4;
    for (const auto& r : t.rows) {
        const auto src = static_cast<std::size_t>(r[1]);
        const auto start = static_cast<std::size_t>(r[2]);
        std::vector<double> v(r.begin() + 3, r.end());
        if (set.sources.size() <= src) set.sources.resize(src + 1);
        auto& s = set.sources[src];
        if (s.empty()) {
            if (start != 0) throw std::invalid_argument(file.string() + ": first segment of a source must start at row 0");
            s = v;
        } else {
            if (start + 1 != s.size() || s.back() != v.front()) {
                throw std::invalid_argument(file.string() + ": segments of source " + std::to_string(src) + " are not contiguous");
            }
            s.insert(s.end(), v.begin() + 1, v.end());
        }
        set.segments.push_back(PathSample::from_stream(std::move(v)));
        set.source.push_back(src);
        set.start.push_back(start);
        set.start_label.push_back("path" + std::to_string(src) + ":" + std::to_string(start));
    }
    return set;
}

// ---------------------------------------------------------------- commands

void cmd_simulate(const PipelineConfig& cfg) {
    cfg.validate();
    const auto seed = derive_seed(cfg.seed, "simulate");
    const auto paths = cfg.model == "rbergomi" ? simulate_rbergomi(cfg.rbergomi, cfg.grid, static_cast<std::size_t>(cfg.sim_paths), seed)
                                               : simulate_gbm(cfg.gbm, cfg.grid, static_cast<std::size_t>(cfg.sim_paths), seed);
    CsvTable t;
    t.header = {"path"};
    const auto cols = numbered("t", paths.front().size());
    t.header.insert(t.header.end(), cols.begin(), cols.end());
    for (std::size_t i = 0; i < paths.size(); ++i) {
        std::vector<double> r{static_cast<double>(i)};
        for (double lp : paths[i].values()) r.push_back(std::exp(lp));
        t.rows.push_back(std::move(r));
    }
    const auto out = cfg.out / "paths.csv";
    write_csv_table(out, t);
    write_manifest(cfg, "simulate", {}, {out});
}

void cmd_ingest(const PipelineConfig& cfg) {
    cfg.validate();
    SegmentSet set;
    fs::path input;
    if (cfg.source == "csv") {
        input = cfg.csv;
        set = segment(ingest_csv(cfg.csv), cfg.segment_length);
    } else {
        input = require(cfg.out / "paths.csv", "simulate");
        const auto t = read_csv_table(input);
        std::vector<PathSample> paths;
        for (const auto& row : body(t)) {
            std::vector<double> lp;
            for (double p : row) {
                if (!(p > 0.0)) throw std::invalid_argument(input.string() + ": non-positive price");
                lp.push_back(std::log(p));
            }
            paths.push_back(PathSample::from_stream(std::move(lp)));
        }
        set = segment_paths(paths, cfg.segment_length);
    }
    const auto out = cfg.out / "segments.csv";
    write_segments_csv(out, set);
    write_manifest(cfg, "ingest", {input}, {out});
}

void cmd_preprocess(const PipelineConfig& cfg) {
    cfg.validate();
    const auto in = require(cfg.out / "segments.csv", "ingest");
    const auto set = read_segments_csv(in);
    const bool need_prev = cfg.has_condition("prev_logsig");
    CsvTable features, conds;
    features.header = {"segment"};
    conds.header = {"segment"};
    std::vector<std::vector<double>> feat_rows, cond_rows;
    for (std::size_t i = 0; i < set.size(); ++i) {
        std::vector<double> f;
        if (cfg.representation == Representation::LogSignature) f = lead_lag_log_signature(set.segments[i], cfg.order).coords;
        else f = set.returns(i);
        std::vector<double> c;
        if (cfg.cond_dim() > 0) {
            const auto cond = conditioning_features(set, i, cfg.order);
            if (need_prev && !cond.prev_logsig) continue;  // first segment of a source
            c = condition_vector(cond, cfg);
        }
        feat_rows.push_back(f);
        cond_rows.push_back(c);
        std::vector<double> fr{static_cast<double>(i)};
        fr.insert(fr.end(), f.begin(), f.end());
        features.rows.push_back(std::move(fr));
        std::vector<double> cr{static_cast<double>(i)};
        cr.insert(cr.end(), c.begin(), c.end());
        conds.rows.push_back(std::move(cr));
    }
    if (feat_rows.empty()) throw std::invalid_argument("preprocess: no usable segments");
    const std::string prefix = cfg.representation == Representation::LogSignature ? "l" : "r";
    const auto fh = numbered(prefix, feat_rows.front().size());
    features.header.insert(features.header.end(), fh.begin(), fh.end());

    std::vector<fs::path> outputs{cfg.out / "features.csv", cfg.out / "scaler.csv"};
    write_csv_table(outputs[0], features);
    const auto scaler = MinMaxScaler::fit(feat_rows);
    CsvTable st;
    st.header = features.header;
    st.header[0] = "stat";
    std::vector<double> lo{0.0}, hi{1.0};
    lo.insert(lo.end(), scaler.lo().begin(), scaler.lo().end());
    hi.insert(hi.end(), scaler.hi().begin(), scaler.hi().end());
    st.rows = {lo, hi};
    write_csv_table(outputs[1], st);

    if (cfg.cond_dim() > 0) {
        const auto ch = numbered("c", cond_rows.front().size());
        conds.header.insert(conds.header.end(), ch.begin(), ch.end());
        outputs.push_back(cfg.out / "conditions.csv");
        write_csv_table(outputs.back(), conds);
        const auto stdz = Standardizer::fit(cond_rows);
        CsvTable cs;
        cs.header = conds.header;
        cs.header[0] = "stat";
        std::vector<double> mean{0.0}, scale{1.0};
        mean.insert(mean.end(), stdz.mean().begin(), stdz.mean().end());
        scale.insert(scale.end(), stdz.scale().begin(), stdz.scale().end());
        cs.rows = {mean, scale};
        outputs.push_back(cfg.out / "cond_scaler.csv");
        write_csv_table(outputs.back(), cs);
    }
    write_manifest(cfg, "preprocess", {in}, outputs);
}

TrainReport cmd_train(const PipelineConfig& cfg) {
    cfg.validate();
    const auto fpath = require(cfg.out / "features.csv", "preprocess");
    const auto raw = body(read_csv_table(fpath));
    const auto scalers = load_scalers(cfg);
    std::vector<std::vector<double>> data, conds;
    for (const auto& r : raw) data.push_back(scalers.features.apply(r));
    std::vector<fs::path> inputs{fpath, cfg.out / "scaler.csv"};
    if (cfg.cond_dim() > 0) {
        inputs.push_back(cfg.out / "conditions.csv");
        inputs.push_back(cfg.out / "cond_scaler.csv");
        for (const auto& r : body(read_csv_table(require(inputs[2], "preprocess")))) conds.push_back(scalers.conds.apply(r));
    }
    VaeConfig vc = cfg.vae;
    vc.input_dim = static_cast<int>(data.front().size());
    vc.cond_dim = cfg.cond_dim();
    vc.seed = derive_seed(cfg.seed, "train");
    auto [params, report] = train(data, conds, vc);

    const auto model = cfg.out / "model.vae";
    {
        auto out = open_out(model);
        save_vae(out, params);
    }
    CsvTable rep;
    rep.header = {"epoch", "elbo", "recon", "kl"};
    for (std::size_t e = 0; e < report.elbo.size(); ++e) {
        rep.rows.push_back({static_cast<double>(e + 1), report.elbo[e], report.recon[e], report.kl[e]});
    }
    const auto rpath = cfg.out / "train_report.csv";
    write_csv_table(rpath, rep);
    write_manifest(cfg, "train", inputs, {model, rpath});
    return report;
}

void cmd_generate(const PipelineConfig& cfg) {
    cfg.validate();
    const auto params = load_model(cfg);
    const auto scalers = load_scalers(cfg);
    if (params.config.cond_dim != cfg.cond_dim()) {
        throw std::invalid_argument("generate: model conditioning size " + std::to_string(params.config.cond_dim) +
                                    " does not match features.conditioning (" + std::to_string(cfg.cond_dim()) + ")");
    }
    const auto ctx = training_context(cfg);
    std::vector<std::vector<double>> conds;
    for (std::size_t i = 0; i < cfg.n_generate; ++i) {
        auto raw = ctx.conds[i % ctx.conds.size()];
        if (cfg.vol_level > 0.0) raw[0] = cfg.vol_level;  // vol leads the layout
        conds.push_back(cfg.cond_dim() > 0 ? scalers.conds.apply(raw) : raw);
    }
    const auto rows = generate(params, conds, derive_seed(cfg.seed, "generate"));
    CsvTable t;
    t.header = {"row"};
    const std::string prefix = cfg.representation == Representation::LogSignature ? "l" : "r";
    const auto h = numbered(prefix, static_cast<std::size_t>(params.config.input_dim));
    t.header.insert(t.header.end(), h.begin(), h.end());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::vector<double> r{static_cast<double>(i)};
        const auto x = scalers.features.invert(rows[i]);
        r.insert(r.end(), x.begin(), x.end());
        t.rows.push_back(std::move(r));
    }
    const auto out = cfg.out / "generated.csv";
    write_csv_table(out, t);
    write_manifest(cfg, "generate", {cfg.out / "model.vae", cfg.out / "scaler.csv", cfg.out / "features.csv"}, {out});
}

std::vector<InversionResult> cmd_invert(const PipelineConfig& cfg) {
    cfg.validate();
    if (cfg.representation != Representation::LogSignature) {
        throw std::invalid_argument("invert: only log-signature outputs need inversion (features.representation = returns)");
    }
    const auto gpath = require(cfg.out / "generated.csv", "generate");
    const auto rows = body(read_csv_table(gpath));
    const auto ctx = training_context(cfg);
    const auto root = derive_seed(cfg.seed, "invert");
    std::vector<std::optional<InversionResult>> res(rows.size());
    parallel_for(rows.size(), [&](std::size_t i) {
        InversionConfig ic = cfg.inversion;
        ic.path_length = cfg.segment_length + 1;
        ic.seed = inversion_seed(root, i);
        const double start = cfg.start_price > 0.0 ? cfg.start_price : ctx.start_prices[i % ctx.start_prices.size()];
        res[i] = invert_logsig(LogSigVector{2, cfg.order, rows[i]}, start, ic);
    });
    CsvTable t;
    t.header = {"row", "distance", "converged"};
    const auto ph = numbered("p", static_cast<std::size_t>(cfg.segment_length) + 1);
    t.header.insert(t.header.end(), ph.begin(), ph.end());
    std::vector<InversionResult> out;
    std::size_t failures = 0;
    for (std::size_t i = 0; i < res.size(); ++i) {
        const auto& r = *res[i];
        failures += !r.converged;
        std::vector<double> row{static_cast<double>(i), r.distance, r.converged ? 1.0 : 0.0};
        row.insert(row.end(), r.path.values().begin(), r.path.values().end());
        t.rows.push_back(std::move(row));
        out.push_back(r);
    }
    const auto opath = cfg.out / "inverted.csv";
    write_csv_table(opath, t);
    write_manifest(cfg, "invert", {gpath}, {opath});
    const double frac = rows.empty() ? 0.0 : static_cast<double>(failures) / static_cast<double>(rows.size());
    if (frac > cfg.max_failure_fraction) {
        throw InversionFailure("invert: " + std::to_string(failures) + " of " + std::to_string(rows.size()) +
                               " inversions unconverged (limit " + std::to_string(cfg.max_failure_fraction) + ")");
    }
    return out;
}

ConcatResult cmd_concat(const PipelineConfig& cfg) {
    cfg.validate();
    if (cfg.representation != Representation::LogSignature) throw std::invalid_argument("concat: requires features.representation = logsig");
    if (cfg.concat_segments > 1 && !cfg.has_condition("prev_logsig")) {
        throw std::invalid_argument("concat: chaining more than one segment requires features.conditioning to include prev_logsig");
    }
    const auto params = load_model(cfg);
    if (params.config.cond_dim != cfg.cond_dim()) throw std::invalid_argument("concat: model conditioning does not match config");
    const auto scalers = load_scalers(cfg);
    const auto ctx = training_context(cfg);
    if (cfg.concat_start >= ctx.conds.size()) throw std::invalid_argument("concat.start_index is beyond the training rows");

    const auto gen_seed = derive_seed(cfg.seed, "generate");
    const auto inv_root = derive_seed(cfg.seed, "invert");
    ConcatResult res;
    std::vector<double> log_path;
    std::vector<double> raw_cond = ctx.conds[cfg.concat_start];
    double price = cfg.start_price > 0.0 ? cfg.start_price : ctx.start_prices[cfg.concat_start];
    std::size_t failures = 0;
    for (int j = 0; j < cfg.concat_segments; ++j) {
        const auto idx = static_cast<std::size_t>(j);
        const auto cond = cfg.cond_dim() > 0 ? scalers.conds.apply(raw_cond) : raw_cond;
        const auto logsig = scalers.features.invert(generate_at(params, cond, gen_seed, idx));
        InversionConfig ic = cfg.inversion;
        ic.path_length = cfg.segment_length + 1;
        ic.seed = inversion_seed(inv_root, idx);
        auto inv = invert_logsig(LogSigVector{2, cfg.order, logsig}, price, ic);
        failures += !inv.converged;

        std::vector<double> lp;
        for (double p : inv.path.values()) lp.push_back(std::log(p));
        if (!res.prices.empty()) res.max_join_gap = std::max(res.max_join_gap, std::abs(res.prices.back() - inv.path.value(0)));
        const std::size_t skip = res.prices.empty() ? 0 : 1;
        res.prices.insert(res.prices.end(), inv.path.values().begin() + static_cast<std::ptrdiff_t>(skip), inv.path.values().end());
        log_path.insert(log_path.end(), lp.begin() + static_cast<std::ptrdiff_t>(skip), lp.end());
        res.pieces.push_back(PathSample::from_stream(lp));
        price = inv.path.value(inv.path.size() - 1);
        res.inversions.push_back(std::move(inv));

        Conditioning next;
        next.vol = trailing_vol(log_path);
        next.level = price;
        next.prev_logsig = lead_lag_log_signature(res.pieces.back(), cfg.order);
        raw_cond = cfg.cond_dim() > 0 ? condition_vector(next, cfg) : std::vector<double>{};
    }

    TensorSeries chained = lead_lag_signature(res.pieces.front(), cfg.order);
    for (std::size_t j = 1; j < res.pieces.size(); ++j) chained = sig_concat(chained, lead_lag_signature(res.pieces[j], cfg.order));
    res.chain_error = max_abs_diff(chained, lead_lag_signature(PathSample::from_stream(log_path), cfg.order));

    CsvTable path;
    path.header = {"step", "price", "log_price"};
    for (std::size_t i = 0; i < res.prices.size(); ++i) path.rows.push_back({static_cast<double>(i), res.prices[i], log_path[i]});
    CsvTable segs;
    segs.header = {"segment", "distance", "converged"};
    const auto ph = numbered("p", static_cast<std::size_t>(cfg.segment_length) + 1);
    segs.header.insert(segs.header.end(), ph.begin(), ph.end());
    for (std::size_t j = 0; j < res.inversions.size(); ++j) {
        const auto& r = res.inversions[j];
        std::vector<double> row{static_cast<double>(j), r.distance, r.converged ? 1.0 : 0.0};
        row.insert(row.end(), r.path.values().begin(), r.path.values().end());
        segs.rows.push_back(std::move(row));
    }
    const std::vector<fs::path> outputs{cfg.out / "long_path.csv", cfg.out / "concat_segments.csv", cfg.out / "concat_check.csv"};
    write_csv_table(outputs[0], path);
    write_csv_table(outputs[1], segs);
    {
        auto out = open_out(outputs[2]);
        out << "metric,value\n";
        out << "segments," << cfg.concat_segments << "\n";
        out << "steps," << res.prices.size() - 1 << "\n";
        out << "max_join_gap," << res.max_join_gap << "\n";
        out << "chain_signature_error," << res.chain_error << "\n";
        out << "unconverged," << failures << "\n";
    }
    write_manifest(cfg, "concat", {cfg.out / "model.vae", cfg.out / "scaler.csv"}, outputs);
    const double frac = static_cast<double>(failures) / static_cast<double>(cfg.concat_segments);
    if (frac > cfg.max_failure_fraction) {
        throw InversionFailure("concat: " + std::to_string(failures) + " of " + std::to_string(cfg.concat_segments) +
                               " segment inversions unconverged");
    }
    return res;
}

EvalReport cmd_evaluate(const PipelineConfig& cfg) {
    cfg.validate();
    const auto spath = require(cfg.out / "segments.csv", "ingest");
    const auto gpath = require(cfg.out / "generated.csv", "generate");
    auto real = read_segments_csv(spath);
    std::vector<fs::path> inputs{spath, gpath};
    if (cfg.eval_segment_length > 0 && cfg.eval_segment_length != real.segment_length) {
        std::vector<PathSample> sources;
        for (const auto& s : real.sources) sources.push_back(PathSample::from_stream(s));
        real = segment_paths(sources, cfg.eval_segment_length);
    }
    if (cfg.vol_level > 0.0) real = vol_bucket(real, cfg);

    GeneratedBundle bundle;
    bundle.representation = cfg.representation;
    bundle.segment_length = cfg.segment_length;
    const auto rows = body(read_csv_table(gpath));
    if (cfg.representation == Representation::Returns) {
        bundle.returns = rows;
    } else {
        for (const auto& r : rows) bundle.logsigs.push_back(LogSigVector{2, cfg.order, r});
        const auto ipath = cfg.out / "inverted.csv";
        if (fs::exists(ipath)) {
            inputs.push_back(ipath);
            for (const auto& r : body(read_csv_table(ipath))) {
                bundle.inversion_failures += r[1] == 0.0;
                std::vector<double> lp;
                for (auto it = r.begin() + 2; it != r.end(); ++it) lp.push_back(std::log(*it));
                bundle.paths.push_back(PathSample::from_stream(std::move(lp)));
            }
        }
    }
    EvalOptions opts;
    opts.order = cfg.order;
    opts.alpha = cfg.alpha;
    opts.amplitude = cfg.amplitude;
    opts.max_lag = cfg.max_lag;
    opts.max_failure_fraction = cfg.max_failure_fraction;
    opts.inversion = cfg.inversion;
    opts.inversion.seed = derive_seed(cfg.seed, "invert");
    opts.start_price = cfg.start_price > 0.0 ? cfg.start_price : std::exp(real.segments.front().value(0));
    const auto report = eval_matrix(real, bundle, opts);

    const std::vector<fs::path> outputs{cfg.out / "report.csv", cfg.out / "report.txt"};
    {
        auto out = open_out(outputs[0]);
        write_report_csv(out, report);
    }
    {
        auto out = open_out(outputs[1]);
        out.precision(8);
        write_report_text(out, report);
    }
    write_plot_data(cfg.out / "plots", report);
    write_manifest(cfg, "evaluate", inputs, outputs);
    return report;
}

SmallDataResult cmd_experiment_smalldata(const PipelineConfig& cfg) {
    cfg.validate();
    if (cfg.small_n >= cfg.large_n) throw std::invalid_argument("smalldata.small must be below smalldata.large");
    const SimulationGrid grid{cfg.smalldata_length, 1, kTradingDaysPerYear};
    auto simulate = [&](std::size_t n, std::uint64_t seed) {
        return cfg.model == "rbergomi" ? simulate_rbergomi(cfg.rbergomi, grid, n, seed) : simulate_gbm(cfg.gbm, grid, n, seed);
    };
    auto fit_and_score = [&](const std::vector<PathSample>& train_paths, int epochs, std::uint64_t seed,
                             const std::vector<TensorSeries>& test_sigs) {
        std::vector<std::vector<double>> feats;
        for (const auto& p : train_paths) feats.push_back(lead_lag_log_signature(p, cfg.order).coords);
        const auto scaler = MinMaxScaler::fit(feats);
        std::vector<std::vector<double>> data;
        for (const auto& f : feats) data.push_back(scaler.apply(f));
        VaeConfig vc = cfg.vae;
        vc.input_dim = static_cast<int>(feats.front().size());
        vc.cond_dim = 0;
        vc.epochs = epochs;
        vc.seed = derive_seed(seed, "train");
        const auto params = train(data, {}, vc).first;
        auto gen = generate(params, test_sigs.size(), std::nullopt, derive_seed(seed, "generate"));
        for (auto& g : gen) g = scaler.invert(g);
        return mmd_statistic(test_sigs, signatures_of(gen, cfg.order), 1, cfg.amplitude);
    };

    SmallDataResult res;
    CsvTable runs;
    runs.header = {"seed", "t_small", "t_large"};
    for (int s = 0; s < cfg.smalldata_seeds; ++s) {
        const auto root = derive_seed(cfg.seed, "smalldata-" + std::to_string(s));
        const auto large = simulate(cfg.large_n, derive_seed(root, "train-data"));
        const std::vector<PathSample> small(large.begin(), large.begin() + static_cast<std::ptrdiff_t>(cfg.small_n));
        const auto test = signatures_of(simulate(cfg.test_n, derive_seed(root, "test-data")), cfg.order);
        res.t_small.push_back(fit_and_score(small, cfg.small_epochs, derive_seed(root, "small"), test));
        res.t_large.push_back(fit_and_score(large, cfg.large_epochs, derive_seed(root, "large"), test));
        runs.rows.push_back({static_cast<double>(s), res.t_small.back(), res.t_large.back()});
    }
    for (int s = 0; s < cfg.null_seeds; ++s) {
        const auto root = derive_seed(cfg.seed, "smalldata-null-" + std::to_string(s));
        const auto a = signatures_of(simulate(cfg.test_n, derive_seed(root, "a")), cfg.order);
        const auto b = signatures_of(simulate(cfg.test_n, derive_seed(root, "b")), cfg.order);
        res.t_null.push_back(mmd_statistic(a, b, 1, cfg.amplitude));
    }
    res.delta = mean_of(res.t_small) - mean_of(res.t_large);
    res.null_sd = sample_sd(res.t_null);
    res.ratio = res.null_sd > 0.0 ? std::abs(res.delta) / res.null_sd : std::numeric_limits<double>::infinity();

    CsvTable nulls;
    nulls.header = {"seed", "t_null"};
    for (std::size_t s = 0; s < res.t_null.size(); ++s) nulls.rows.push_back({static_cast<double>(s), res.t_null[s]});
    const std::vector<fs::path> outputs{cfg.out / "smalldata_runs.csv", cfg.out / "smalldata_null.csv",
                                        cfg.out / "smalldata_summary.csv"};
    write_csv_table(outputs[0], runs);
    write_csv_table(outputs[1], nulls);
    {
        auto out = open_out(outputs[2]);
        out << "metric,value\n";
        out << "small_n," << cfg.small_n << "\nlarge_n," << cfg.large_n << "\ntest_n," << cfg.test_n << "\n";
        out << "mean_t_small," << mean_of(res.t_small) << "\nmean_t_large," << mean_of(res.t_large) << "\n";
        out << "delta," << res.delta << "\nnull_sd," << res.null_sd << "\nratio," << res.ratio << "\n";
        out << "no_significant_improvement," << (res.ratio < 2.0 ? 1 : 0) << "\n";
    }
    write_manifest(cfg, "experiment-smalldata", {}, outputs);
    return res;
}

// ---------------------------------------------------------------- cli

int run_cli(const std::vector<std::string>& args, std::ostream& err) {
    CLI::App app{"Signature-based market generator pipeline", "sigmarket"};
    app.require_subcommand(1);
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    const std::vector<std::pair<std::string, std::string>> commands{
        {"simulate", "simulate model paths"},
        {"ingest", "read prices and cut them into segments"},
        {"preprocess", "compute log-signature or return features and conditioning"},
        {"train", "train the (conditional) VAE"},
        {"generate", "sample features from the trained model"},
        {"invert", "recover price paths from generated log-signatures"},
        {"concat", "chain generated segments into one long path"},
        {"evaluate", "compare generated and real segments"},
        {"experiment-smalldata", "small vs large training set comparison"},
    };
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_path, "key=value config file")->required();
        sub->add_option("--seed", seed, "root seed (overrides run.seed)");
        sub->add_option("--out", out_dir, "output directory (overrides run.out)");
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    if (!reversed.empty()) reversed.pop_back();  // program name
    std::string command = "-";
    auto report = [&](int code, const char* kind, const std::string& message) {
        std::string m = message;
        std::replace(m.begin(), m.end(), '\n', ' ');
        err << "error code=" << code << " kind=" << kind << " command=" << command << " message=" << m << "\n";
        return code;
    };
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, std::cout, err);
    } catch (const CLI::ParseError& e) {
        return report(kExitValidation, "usage", e.what());
    }
    command = app.get_subcommands().front()->get_name();

    try {
        auto cfg = PipelineConfig::load(config_path);
        if (seed) cfg.seed = *seed;
        if (out_dir) cfg.out = *out_dir;
        cfg.validate();
        fs::create_directories(cfg.out);
        if (command == "simulate") cmd_simulate(cfg);
        else if (command == "ingest") cmd_ingest(cfg);
        else if (command == "preprocess") cmd_preprocess(cfg);
        else if (command == "train") cmd_train(cfg);
        else if (command == "generate") cmd_generate(cfg);
        else if (command == "invert") cmd_invert(cfg);
        else if (command == "concat") cmd_concat(cfg);
        else if (command == "evaluate") cmd_evaluate(cfg);
        else cmd_experiment_smalldata(cfg);
    } catch (const InversionFailure& e) {
        return report(kExitUnconverged, "unconverged", e.what());
    } catch (const std::invalid_argument& e) {
        return report(kExitValidation, "validation", e.what());
    } catch (const std::domain_error& e) {
        return report(kExitValidation, "validation", e.what());
    } catch (const std::exception& e) {
        return report(kExitRuntime, "runtime", e.what());
    }
    return kExitOk;
}

}  // namespace sigmarket
