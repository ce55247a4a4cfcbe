#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "sigmarket/pipeline.hpp"

using namespace sigmarket;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("sigmarket-test-" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// Small but complete run: 4 simulated years cut into weekly segments.
std::string small_config(const fs::path& out, const std::string& extra = "") {
    return "[run]\nseed = 11\nout = " + out.string() +
           "\n[data]\nsegment_length = 5\n"
           "[simulate]\npaths = 4\nhorizon_days = 100\n"
           "[features]\norder = 3\nconditioning = vol, prev_logsig\n"
           "[vae]\nepochs = 20\nhidden_units = 16\nlatent_dim = 4\n"
           "[generate]\nn = 12\n"
           "[inversion]\ngenerations = 40\npopulation_size = 60\nmax_failure_fraction = 1\n" +
           extra;
}

PipelineConfig config_in(const fs::path& dir, const std::string& extra = "") {
    const auto file = dir / "run.ini";
    std::ofstream(file) << small_config(dir / "out", extra);
    return PipelineConfig::load(file);
}

int cli(const std::vector<std::string>& args, std::string* err_line = nullptr) {
    std::ostringstream err;
    std::vector<std::string> argv{"sigmarket"};
    argv.insert(argv.end(), args.begin(), args.end());
    const int code = run_cli(argv, err);
    if (err_line) *err_line = err.str();
    return code;
}

void run_through_generate(const PipelineConfig& cfg) {
    cmd_simulate(cfg);
    cmd_ingest(cfg);
    cmd_preprocess(cfg);
    cmd_train(cfg);
    cmd_generate(cfg);
}

}  // namespace

TEST(PipelineConfig, ParsesSectionsListsAndComments) {
    const auto c = PipelineConfig::parse(
        "; comment\n[run]\nseed = 42\nout = results\n[features]\norder = 5\nrepresentation = returns\n"
        "conditioning = vol, level\n[vae]\nlearning_rate = 0.005\n[simulate]\ns0 = 50\n");
    EXPECT_EQ(c.seed, 42u);
    EXPECT_EQ(c.out, fs::path("results"));
    EXPECT_EQ(c.order, 5);
    EXPECT_EQ(c.representation, Representation::Returns);
    EXPECT_EQ(c.conditioning, (std::vector<std::string>{"vol", "level"}));
    EXPECT_DOUBLE_EQ(c.vae.learning_rate, 0.005);
    EXPECT_DOUBLE_EQ(c.rbergomi.s0, 50.0);
    EXPECT_DOUBLE_EQ(c.gbm.s0, 50.0);
    EXPECT_EQ(c.cond_dim(), 2);
    EXPECT_NO_THROW(c.validate());
}

TEST(PipelineConfig, ConditionDimensionCountsLogSignature) {
    auto c = PipelineConfig::parse("[features]\norder = 4\nconditioning = prev_logsig, vol\n");
    EXPECT_EQ(c.cond_dim(), 1 + 8);
    c = PipelineConfig::parse("[features]\nconditioning = none\n");
    EXPECT_EQ(c.cond_dim(), 0);
}

TEST(PipelineConfig, RejectsUnknownKeysAndBadValues) {
    EXPECT_THROW(PipelineConfig::parse("[vae]\nepoch = 3\n"), std::invalid_argument);
    EXPECT_THROW(PipelineConfig::parse("[nope]\nseed = 3\n"), std::invalid_argument);
    EXPECT_THROW(PipelineConfig::parse("[run]\nseed = abc\n"), std::invalid_argument);
    EXPECT_THROW(PipelineConfig::parse("[vae]\nepochs = 3.5\n"), std::invalid_argument);
    EXPECT_THROW(PipelineConfig::parse("[features]\nrepresentation = prices\n"), std::invalid_argument);
}

TEST(PipelineConfig, ValidationCatchesCrossFieldErrors) {
    EXPECT_THROW(PipelineConfig::parse("[features]\nconditioning = momentum\n").validate(), std::invalid_argument);
    EXPECT_THROW(PipelineConfig::parse("[simulate]\nhorizon_days = 500\nsteps_per_day = 4\n").validate(),
                 std::invalid_argument);
    EXPECT_THROW(PipelineConfig::parse("[data]\nsource = csv\n").validate(), std::invalid_argument);
    EXPECT_THROW(PipelineConfig::parse("[features]\norder = 11\n").validate(), std::invalid_argument);
    EXPECT_THROW(PipelineConfig::parse("[evaluate]\nalpha = 1.5\n").validate(), std::invalid_argument);
    EXPECT_THROW(PipelineConfig::parse("[evaluate]\nsegment_length = 30\n").validate(), std::invalid_argument);
    EXPECT_THROW(PipelineConfig::parse("[simulate]\nhurst = 0.7\n").validate(), std::invalid_argument);
}

TEST(PipelineCsv, SegmentsRoundTripAndRebuildSources) {
    const auto dir = fresh_dir("segments");
    std::vector<PathSample> paths{PathSample::from_stream({0.0, 0.1, 0.3, 0.2, 0.25}),
                                  PathSample::from_stream({1.0, 0.9, 1.1, 1.3, 1.2})};
    const auto set = segment_paths(paths, 2);
    write_segments_csv(dir / "s.csv", set);
    const auto back = read_segments_csv(dir / "s.csv");
    ASSERT_EQ(back.size(), set.size());
    EXPECT_EQ(back.segment_length, 2);
    EXPECT_EQ(back.source, set.source);
    EXPECT_EQ(back.start, set.start);
    ASSERT_EQ(back.sources.size(), 2u);
    EXPECT_EQ(back.sources[1], paths[1].values());
    for (std::size_t i = 0; i < set.size(); ++i) EXPECT_EQ(back.segments[i].values(), set.segments[i].values());
}

TEST(PipelineCsv, RejectsNonContiguousSegmentsAndRaggedRows) {
    const auto dir = fresh_dir("badcsv");
    std::ofstream(dir / "gap.csv") << "segment,source,start,x0,x1\n0,0,0,1,2\n1,0,1,3,4\n";
    EXPECT_THROW(read_segments_csv(dir / "gap.csv"), std::invalid_argument);
    std::ofstream(dir / "ragged.csv") << "a,b\n1,2\n3\n";
    EXPECT_THROW(read_csv_table(dir / "ragged.csv"), std::invalid_argument);
}

TEST(Pipeline, EndToEndProducesArtifactsAndIsReproducible) {
    const auto dir = fresh_dir("e2e");
    const auto cfg = config_in(dir);
    run_through_generate(cfg);
    const auto inv = cmd_invert(cfg);
    ASSERT_EQ(inv.size(), 12u);
    const auto report = cmd_evaluate(cfg);
    EXPECT_EQ(report.n_generated, 12u);
    EXPECT_GT(report.n_real, 50u);
    EXPECT_TRUE(std::isfinite(report.mmd.statistic));

    for (const char* f : {"paths.csv", "segments.csv", "features.csv", "conditions.csv", "scaler.csv", "cond_scaler.csv",
                          "model.vae", "train_report.csv", "generated.csv", "inverted.csv", "report.csv", "report.txt",
                          "plots/acf.csv", "plots/ecdf_day1.csv", "plots/logsig_scatter.csv", "manifest-train.json"}) {
        EXPECT_TRUE(fs::exists(cfg.out / f)) << f;
    }
    // Inverted paths start at the price of the matching training segment.
    const auto segs = read_segments_csv(cfg.out / "segments.csv");
    const auto features = read_csv_table(cfg.out / "features.csv");
    const double start0 = std::exp(segs.segments[static_cast<std::size_t>(features.rows[0][0])].value(0));
    EXPECT_DOUBLE_EQ(inv[0].path.value(0), start0);
    // prev_logsig drops the first segment of each source.
    EXPECT_EQ(features.rows.size(), segs.size() - segs.sources.size());

    std::map<std::string, std::string> first;
    for (const auto& e : fs::recursive_directory_iterator(cfg.out)) {
        if (e.is_regular_file() && e.path().extension() != ".json") first[e.path().string()] = read_file(e.path());
    }
    fs::remove_all(cfg.out);
    run_through_generate(cfg);
    cmd_invert(cfg);
    cmd_evaluate(cfg);
    for (const auto& [path, bytes] : first) EXPECT_EQ(read_file(path), bytes) << path;
}

TEST(Pipeline, ReturnsRepresentationSkipsInversion) {
    const auto dir = fresh_dir("returns");
    const auto cfg = config_in(dir, "[features]\nrepresentation = returns\nconditioning = none\n");
    run_through_generate(cfg);
    EXPECT_THROW(cmd_invert(cfg), std::invalid_argument);
    const auto report = cmd_evaluate(cfg);
    EXPECT_EQ(report.representation, "returns");
    EXPECT_EQ(read_csv_table(cfg.out / "generated.csv").header.size(), 1u + 5u);
}

TEST(Pipeline, ConcatOfOneSegmentEqualsGenerateAndInvert) {
    const auto dir = fresh_dir("concat1");
    auto cfg = config_in(dir, "[concat]\nsegments = 1\n");
    run_through_generate(cfg);
    const auto inv = cmd_invert(cfg);
    const auto res = cmd_concat(cfg);
    ASSERT_EQ(res.inversions.size(), 1u);
    EXPECT_EQ(res.inversions[0].path.values(), inv[0].path.values());
    EXPECT_EQ(res.inversions[0].distance, inv[0].distance);
}

TEST(Pipeline, ConcatTwelveSegmentsIsContinuousAndChains) {
    const auto dir = fresh_dir("concat12");
    auto cfg = config_in(dir, "[concat]\nsegments = 12\n");
    cfg.segment_length = 20;
    cfg.grid.horizon_days = 240;
    run_through_generate(cfg);
    const auto res = cmd_concat(cfg);
    EXPECT_EQ(res.prices.size(), 241u);
    EXPECT_EQ(res.pieces.size(), 12u);
    EXPECT_EQ(res.max_join_gap, 0.0);
    EXPECT_LE(res.chain_error, 1e-10);
    for (std::size_t j = 1; j < res.inversions.size(); ++j) {
        EXPECT_EQ(res.inversions[j].path.value(0), res.inversions[j - 1].path.value(20));
    }
    const auto table = read_csv_table(cfg.out / "long_path.csv");
    EXPECT_EQ(table.rows.size(), 241u);
}

TEST(Pipeline, ConcatNeedsPreviousLogSignatureConditioning) {
    const auto dir = fresh_dir("concatbad");
    auto cfg = config_in(dir, "[features]\nconditioning = vol\n");
    EXPECT_THROW(cmd_concat(cfg), std::invalid_argument);
}

TEST(PipelineCli, ExitCodesAndSingleLineErrors) {
    const auto dir = fresh_dir("cli");
    std::string err;
    EXPECT_EQ(cli({"simulate"}, &err), kExitValidation);
    EXPECT_EQ(cli({"bogus", "--config", "x"}, &err), kExitValidation);
    EXPECT_EQ(cli({"simulate", "--config", (dir / "missing.ini").string()}, &err), kExitValidation);
    EXPECT_NE(err.find("missing.ini"), std::string::npos);

    std::ofstream(dir / "bad.ini") << "[vae]\nepoch = 3\n";
    EXPECT_EQ(cli({"train", "--config", (dir / "bad.ini").string()}, &err), kExitValidation);
    EXPECT_EQ(std::count(err.begin(), err.end(), '\n'), 1);
    EXPECT_NE(err.find("code=1"), std::string::npos);
    EXPECT_NE(err.find("vae.epoch"), std::string::npos);

    std::ofstream(dir / "run.ini") << small_config(dir / "out");
    const auto ini = (dir / "run.ini").string();
    EXPECT_EQ(cli({"generate", "--config", ini}, &err), kExitValidation);  // nothing trained yet
    EXPECT_NE(err.find("train"), std::string::npos);

    for (const char* c : {"simulate", "ingest", "preprocess", "train", "generate"}) {
        ASSERT_EQ(cli({c, "--config", ini}, &err), kExitOk) << c << ": " << err;
    }
    std::ofstream(dir / "strict.ini") << small_config(dir / "out", "tolerance = 1e-14\nmax_failure_fraction = 0\n");
    EXPECT_EQ(cli({"invert", "--config", (dir / "strict.ini").string()}, &err), kExitUnconverged);
    EXPECT_NE(err.find("unconverged"), std::string::npos);
    EXPECT_TRUE(fs::exists(dir / "out" / "inverted.csv"));  // written before the failure is reported

    std::ofstream(dir / "blocker") << "x";
    EXPECT_EQ(cli({"simulate", "--config", ini, "--out", (dir / "blocker").string()}, &err), kExitRuntime);
    EXPECT_EQ(std::count(err.begin(), err.end(), '\n'), 1);

    EXPECT_EQ(cli({"simulate", "--config", ini, "--seed", "5", "--out", (dir / "other").string()}, &err), kExitOk);
    EXPECT_NE(read_file(dir / "other" / "paths.csv"), read_file(dir / "out" / "paths.csv"));
}

TEST(Pipeline, VolFilterPinsGenerationAndBucketsRealSegments) {
    EXPECT_THROW(PipelineConfig::parse("[vol_filter]\nlevel = 0.2\n").validate(), std::invalid_argument);
    const auto dir = fresh_dir("volfilter");
    auto cfg = config_in(dir);
    run_through_generate(cfg);
    const auto all = cmd_evaluate(cfg);
    const auto unpinned = read_file(cfg.out / "generated.csv");

    cfg.vol_level = 0.2;
    cfg.vol_bucket = 0.05;
    cmd_generate(cfg);
    EXPECT_NE(read_file(cfg.out / "generated.csv"), unpinned);
    const auto bucketed = cmd_evaluate(cfg);
    EXPECT_LT(bucketed.n_real, all.n_real);
    const auto segs = read_segments_csv(cfg.out / "segments.csv");
    std::size_t inside = 0;
    for (std::size_t i = 0; i < segs.size(); ++i) inside += std::abs(conditioning_features(segs, i, cfg.order).vol - 0.2) <= 0.05;
    EXPECT_EQ(bucketed.n_real, inside);

    cfg.vol_level = 5.0;
    EXPECT_THROW(cmd_evaluate(cfg), std::invalid_argument);
}
