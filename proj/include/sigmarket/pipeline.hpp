// Batch pipeline behind the `sigmarket` command line tool.
//
// Every command reads its inputs from and writes its outputs into one output
// directory, plus a manifest-<command>.json recording the config hash, seed
// and input/output hashes.

#ifndef SIGMARKET_PIPELINE_HPP
#define SIGMARKET_PIPELINE_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "sigmarket/evaluation.hpp"
#include "sigmarket/inversion.hpp"
#include "sigmarket/market_data.hpp"
#include "sigmarket/models.hpp"
#include "sigmarket/vae.hpp"

namespace sigmarket {

enum ExitCode : int { kExitOk = 0, kExitValidation = 1, kExitRuntime = 2, kExitUnconverged = 3 };

struct PipelineConfig {
    // [run]
    std::uint64_t seed = 0;
    std::filesystem::path out = "out";
    // [data]
    std::string source = "simulated";  // simulated | csv
    std::filesystem::path csv;
    int segment_length = 20;
    // [simulate]
    std::string model = "rbergomi";  // rbergomi | gbm
    int sim_paths = 4;
    SimulationGrid grid{250, 1, kTradingDaysPerYear};
    RBergomiParams rbergomi;
    GbmParams gbm;
    // [features]
    int order = 4;
    Representation representation = Representation::LogSignature;
    std::vector<std::string> conditioning;  // subset of vol, level, prev_logsig
    // [vae]
    VaeConfig vae;
    // [generate]
    std::size_t n_generate = 1000;
    // [inversion]
    InversionConfig inversion;
    double max_failure_fraction = 0.1;
    double start_price = 0.0;  // 0: start of the matching training segment
    // [evaluate]
    double alpha = 0.05;
    int max_lag = 10;
    double amplitude = 1.0;
    int eval_segment_length = 0;  // 0: same as data
    // [concat]
    int concat_segments = 12;
    std::size_t concat_start = 0;
    // [smalldata]
    std::size_t small_n = 250;
    std::size_t large_n = 5000;
    std::size_t test_n = 250;
    int small_epochs = 2000;
    int large_epochs = 100;
    int smalldata_seeds = 5;
    int null_seeds = 20;
    int smalldata_length = 20;
    // [vol_filter] level > 0 pins the vol condition during generation and
    // keeps only real segments whose start vol lies within +-bucket of it.
    double vol_level = 0.0;
    double vol_bucket = 0.01;

    std::filesystem::path file;  // where it was loaded from, if anywhere
    std::string text;            // raw text, hashed into manifests

    static PipelineConfig parse(const std::string& text);
    static PipelineConfig load(const std::filesystem::path& file);

    /// Cross-field checks; throws std::invalid_argument.
    void validate() const;

    bool has_condition(const std::string& mode) const;
    int cond_dim() const;
    std::uint64_t hash() const;
};

/// Conditioning vector in the fixed layout [vol][level][prev_logsig...],
/// keeping only the enabled parts.
std::vector<double> condition_vector(const Conditioning& c, const PipelineConfig& cfg);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};
CsvTable read_csv_table(const std::filesystem::path& file);
void write_csv_table(const std::filesystem::path& file, const CsvTable& table);

void write_segments_csv(const std::filesystem::path& file, const SegmentSet& set);
/// Rebuilds sources by joining each source's contiguous segments.
SegmentSet read_segments_csv(const std::filesystem::path& file);

struct ConcatResult {
    std::vector<double> prices;      // segments * length + 1 points
    std::vector<PathSample> pieces;  // per-segment log-price paths
    std::vector<InversionResult> inversions;
    double chain_error = 0.0;  // max |chained signature - direct signature|
    double max_join_gap = 0.0;
};

struct SmallDataResult {
    std::vector<double> t_small, t_large, t_null;
    double delta = 0.0;    // mean T_small - mean T_large
    double null_sd = 0.0;  // sample std of the null statistics
    double ratio = 0.0;
};

void cmd_simulate(const PipelineConfig& cfg);
void cmd_ingest(const PipelineConfig& cfg);
void cmd_preprocess(const PipelineConfig& cfg);
TrainReport cmd_train(const PipelineConfig& cfg);
void cmd_generate(const PipelineConfig& cfg);
/// Throws InversionFailure after writing outputs when too many rows fail.
std::vector<InversionResult> cmd_invert(const PipelineConfig& cfg);
ConcatResult cmd_concat(const PipelineConfig& cfg);
EvalReport cmd_evaluate(const PipelineConfig& cfg);
SmallDataResult cmd_experiment_smalldata(const PipelineConfig& cfg);

/// Full command line entry point. Errors become one line on `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& err);

}  // namespace sigmarket

#endif  // SIGMARKET_PIPELINE_HPP
