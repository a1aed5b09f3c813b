#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "jrlab/commands.hpp"
#include "jrlab/config.hpp"
#include "jrlab/errors.hpp"
#include "jrlab/mlp.hpp"

using namespace jrlab;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

std::size_t line_count(const std::string& text) {
    std::size_t n = 0;
    for (char c : text)
        if (c == '\n') ++n;
    return n;
}

// Directory that cleans up after itself.
struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::path("cli_scratch") / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& leaf) const { return (path / leaf).string(); }
};

// Small, fast, fully specified training setup.
KeyValues tiny_run(std::uint64_t seed) {
    return {
        {"dataset", "blobs"},       {"blob_classes", "2"},
        {"blob_side", "8"},         {"blob_per_class", "5"},
        {"blob_test_per_class", "3"}, {"hidden", "8"},
        {"total_iters", "20"},      {"quench_every", "10"},
        {"batch_size", "full"},     {"eta0", "0.05"},
        {"log_every", "10"},        {"eval_points", "8"},
        {"eval_jf_points", "4"},    {"seed", std::to_string(seed)},
    };
}

}  // namespace

TEST_CASE("key-value text parses with comments, blanks, and trimming") {
    KeyValues kv = parse_key_values("# leading comment\n"
                                    "\n"
                                    "alpha = 1\n"
                                    "  beta=  two words  \n"
                                    "alpha = 3\n",
                                    "mem");
    REQUIRE(kv.size() == 3);
    CHECK(kv[0].first == "alpha");
    CHECK(kv[0].second == "1");
    CHECK(kv[1].first == "beta");
    CHECK(kv[1].second == "two words");
    CHECK(kv[2].second == "3");  // duplicates preserved in order
}

TEST_CASE("malformed config lines name the origin and line") {
    try {
        parse_key_values("ok = 1\nnot a pair\n", "conf.txt");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("conf.txt:2") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_key_values("= value\n", "m"), ParseError);
    CHECK_THROWS_AS(load_key_values("definitely_missing.cfg"), LoadError);
}

TEST_CASE("run specs round-trip through text byte-for-byte") {
    RunSpec spec = RunSpec::from_key_values({});
    CHECK(spec.train.total_iters == 15000);
    CHECK(spec.hidden == std::vector<std::size_t>{128, 64});

    KeyValues kv = spec.to_key_values();
    RunSpec redo = RunSpec::from_key_values(kv);
    CHECK(render_key_values(redo.to_key_values()) == render_key_values(kv));

    // duplicate keys: the last value wins at lookup
    KeyValues dup = {{"lambda_jr", "0.5"}, {"lambda_jr", "0.25"}};
    CHECK(RunSpec::from_key_values(dup).train.lambda_jr == 0.25);
}

TEST_CASE("special spellings: exact projections and full batches") {
    RunSpec spec = RunSpec::from_key_values({{"n_proj", "exact"}, {"batch_size", "full"}});
    CHECK(spec.train.exact_reg);
    CHECK(spec.train.full_batch);
    KeyValues kv = spec.to_key_values();
    bool saw_exact = false, saw_full = false;
    for (const auto& [k, v] : kv) {
        if (k == "n_proj" && v == "exact") saw_exact = true;
        if (k == "batch_size" && v == "full") saw_full = true;
    }
    CHECK(saw_exact);
    CHECK(saw_full);
}

TEST_CASE("unknown and malformed keys are rejected with guidance") {
    try {
        RunSpec::from_key_values({{"lamda_jr", "0.1"}});
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("lamda_jr") != std::string::npos);
        CHECK(msg.find("lambda_jr") != std::string::npos);  // the valid key list
    }
    CHECK_THROWS_AS(RunSpec::from_key_values({{"eta0", "fast"}}), ConfigError);
    CHECK_THROWS_AS(RunSpec::from_key_values({{"total_iters", "-3"}}), ConfigError);
    CHECK_THROWS_AS(RunSpec::from_key_values({{"precision", "f16"}}), ConfigError);
    CHECK_THROWS_AS(RunSpec::from_key_values({{"momentum", "1.5"}}), ConfigError);

    // attack keys pass through only when explicitly allowed
    KeyValues mixed = {{"kind", "pgd"}, {"eta0", "0.1"}};
    CHECK_THROWS_AS(RunSpec::from_key_values(mixed), ConfigError);
    RunSpec ok = RunSpec::from_key_values(mixed, AttackSpec::keys());
    CHECK(ok.train.eta0 == 0.1);
    AttackSpec aspec = AttackSpec::from_key_values(mixed, RunSpec::keys());
    CHECK(aspec.attack.kind == AttackKind::Pgd);
}

TEST_CASE("attack specs parse sigma lists and round-trip") {
    AttackSpec spec = AttackSpec::from_key_values(
        {{"kind", "white"}, {"sigmas", "0, 0.05 ,0.1"}, {"n_test", "7"}, {"attack_seed", "9"}});
    CHECK(spec.sigmas == std::vector<double>{0.0, 0.05, 0.1});
    CHECK(spec.n_test == 7);
    CHECK(spec.attack.seed == 9);
    KeyValues kv = spec.to_key_values();
    AttackSpec redo = AttackSpec::from_key_values(kv);
    CHECK(render_key_values(redo.to_key_values()) == render_key_values(kv));
    CHECK_THROWS_AS(AttackSpec::from_key_values({{"pgd_step", "wide"}}), ConfigError);
    CHECK_THROWS_AS(AttackSpec::from_key_values({{"cw_c_init", "0.1"}, {"extent", "2"}}),
                    ConfigError);
}

TEST_CASE("blob data loading is deterministic and shares test statistics") {
    DataSpec spec;
    spec.blob_classes = 2;
    spec.blob_side = 8;
    spec.blob_per_class = 4;
    spec.blob_test_per_class = 2;
    auto [train1, test1] = load_data(spec);
    auto [train2, test2] = load_data(spec);
    CHECK(train1.size() == 8);
    CHECK(test1.size() == 4);
    CHECK(train1.pre.mean == test1.pre.mean);
    CHECK(train1.pre.std_dev == test1.pre.std_dev);
    CHECK(train1.images.data == train2.images.data);
    CHECK(test1.images.data == test2.images.data);
    // train and test draws differ
    CHECK(train1.images.data != test1.images.data);
}

TEST_CASE("idx data source demands a directory") {
    DataSpec spec;
    spec.source = "idx";
    spec.data_dir = "";
#ifdef _WIN32
    _putenv("JRLAB_DATA_DIR=");
#else
    unsetenv("JRLAB_DATA_DIR");
#endif
    CHECK_THROWS_AS(load_data(spec), ConfigError);
    spec.source = "parquet";
    CHECK_THROWS_AS(spec.validate(), ConfigError);
}

TEST_CASE("train command writes checkpoint, history, and manifest") {
    TempDir dir("train");
    std::ostringstream log;
    cmd_train(tiny_run(1), dir / "run", log);

    CHECK(fs::exists(dir / "run/checkpoint.bin"));
    CHECK(fs::exists(dir / "run/history.csv"));
    CHECK(fs::exists(dir / "run/manifest.txt"));

    const std::string history = slurp(dir / "run/history.csv");
    CHECK(history.find("# train_size = 10") != std::string::npos);
    CHECK(history.find("iteration,loss,reg_value,test_acc,jf_norm,lr") != std::string::npos);
    // rows at 0, 10 and the final 20
    CHECK(line_count(history) == 2 + 3);

    Mlp model = load_checkpoint(dir / "run/checkpoint.bin");
    CHECK(model.input_width() == 64);
    CHECK(model.output_width() == 2);
    CHECK(log.str().find("training 64-8-2 on 10 examples") != std::string::npos);
}

TEST_CASE("a written manifest reproduces the checkpoint byte-for-byte") {
    TempDir dir("manifest");
    std::ostringstream log;
    cmd_train(tiny_run(7), dir / "a", log);

    KeyValues manifest = load_key_values(dir / "a/manifest.txt");
    cmd_train(manifest, dir / "b", log);

    CHECK(slurp(dir / "a/checkpoint.bin") == slurp(dir / "b/checkpoint.bin"));
    CHECK(slurp(dir / "a/manifest.txt") == slurp(dir / "b/manifest.txt"));
    CHECK(slurp(dir / "a/history.csv") == slurp(dir / "b/history.csv"));
}

TEST_CASE("per-class subsampling reaches the training loop") {
    TempDir dir("subsample");
    std::ostringstream log;
    KeyValues kv = tiny_run(2);
    kv.emplace_back("samples_per_class", "2");
    cmd_train(kv, dir / "run", log);
    CHECK(slurp(dir / "run/history.csv").find("# train_size = 4") != std::string::npos);
}

TEST_CASE("eval command reports accuracy and the Jacobian norm") {
    TempDir dir("eval");
    std::ostringstream log;
    cmd_train(tiny_run(3), dir / "run", log);

    std::ostringstream elog;
    cmd_eval(dir / "run/checkpoint.bin", tiny_run(3), dir / "eval.csv", elog);
    CHECK(elog.str().find("accuracy") != std::string::npos);
    CHECK(elog.str().find("||J||_F") != std::string::npos);

    const std::string csv = slurp(dir / "eval.csv");
    CHECK(csv.find("n_acc,accuracy,n_jf,mean_jf\n") == 0);
    CHECK(line_count(csv) == 2);

    // dataset width mismatch is a load-level failure naming both widths
    KeyValues wide = tiny_run(3);
    for (auto& [k, v] : wide)
        if (k == "blob_side") v = "12";
    try {
        cmd_eval(dir / "run/checkpoint.bin", wide, "", elog);
        FAIL("expected LoadError");
    } catch (const LoadError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("input width 64") != std::string::npos);
        CHECK(msg.find("provides 144") != std::string::npos);
    }
    CHECK_THROWS_AS(cmd_eval(dir / "missing.bin", tiny_run(3), "", elog), LoadError);
}

TEST_CASE("attack command emits noise curves and sweep files") {
    TempDir dir("attack");
    std::ostringstream log;
    cmd_train(tiny_run(4), dir / "run", log);
    const std::string ckpt = dir / "run/checkpoint.bin";

    KeyValues white = tiny_run(4);
    white.emplace_back("kind", "white");
    white.emplace_back("sigmas", "0,0.1,0.2");
    white.emplace_back("n_test", "4");
    white.emplace_back("attack_seed", "5");
    std::ostringstream alog;
    cmd_attack(ckpt, white, dir / "white", alog);
    CHECK(fs::exists(dir / "white/manifest.txt"));
    CHECK(fs::exists(dir / "white/curve.csv"));
    CHECK(!fs::exists(dir / "white/points.csv"));
    const std::string curve = slurp(dir / "white/curve.csv");
    CHECK(curve.find("# attack = white") != std::string::npos);
    CHECK(curve.find("sigma,accuracy") != std::string::npos);
    CHECK(line_count(curve) == 3 + 3);

    cmd_attack(ckpt, white, dir / "white2", alog);
    CHECK(slurp(dir / "white2/curve.csv") == curve);

    KeyValues pgd = tiny_run(4);
    pgd.emplace_back("kind", "pgd");
    pgd.emplace_back("n_test", "4");
    cmd_attack(ckpt, pgd, dir / "pgd", alog);
    const std::string points = slurp(dir / "pgd/points.csv");
    CHECK(points.find("# attack = pgd") != std::string::npos);
    CHECK(points.find("index,distance,censored") != std::string::npos);
    CHECK(line_count(points) == 4 + 4);
    const std::string pcurve = slurp(dir / "pgd/curve.csv");
    CHECK(pcurve.find("distance,test_error") != std::string::npos);
}

TEST_CASE("slice command exports grids in both basis modes") {
    TempDir dir("slice");
    std::ostringstream log;
    cmd_train(tiny_run(5), dir / "m0", log);
    cmd_train(tiny_run(6), dir / "m1", log);
    cmd_train(tiny_run(8), dir / "m2", log);
    const std::string ckpt = dir / "m0/checkpoint.bin";

    KeyValues kv = tiny_run(5);
    kv.emplace_back("slice_index", "1");
    kv.emplace_back("resolution", "5");
    kv.emplace_back("extent", "0.5");
    kv.emplace_back("slice_seed", "21");
    std::ostringstream slog;
    cmd_slice(ckpt, kv, dir / "random.csv", slog);
    const std::string grid = slurp(dir / "random.csv");
    CHECK(grid.find("i,j,du,dv,pred_class,max_prob") != std::string::npos);
    CHECK(slog.str().find("boundary radius") != std::string::npos);

    KeyValues basis = kv;
    basis.emplace_back("slice_mode", "fgsm-basis");
    basis.emplace_back("basis_checkpoint_1", dir / "m1/checkpoint.bin");
    basis.emplace_back("basis_checkpoint_2", dir / "m2/checkpoint.bin");
    cmd_slice(ckpt, basis, dir / "fgsm.csv", slog);
    CHECK(fs::exists(dir / "fgsm.csv"));

    KeyValues bad_mode = kv;
    bad_mode.emplace_back("slice_mode", "pca");
    CHECK_THROWS_AS(cmd_slice(ckpt, bad_mode, dir / "x.csv", slog), ConfigError);

    KeyValues no_basis = kv;
    no_basis.emplace_back("slice_mode", "fgsm-basis");
    CHECK_THROWS_AS(cmd_slice(ckpt, no_basis, dir / "x.csv", slog), ConfigError);

    KeyValues far = kv;
    for (auto& [k, v] : far)
        if (k == "slice_index") v = "40";
    CHECK_THROWS_AS(cmd_slice(ckpt, far, dir / "x.csv", slog), ConfigError);

    KeyValues even = kv;
    for (auto& [k, v] : even)
        if (k == "resolution") v = "4";
    CHECK_THROWS_AS(cmd_slice(ckpt, even, dir / "x.csv", slog), ConfigError);

    KeyValues junk = kv;
    junk.emplace_back("extent", "wide");
    CHECK_THROWS_AS(cmd_slice(ckpt, junk, dir / "x.csv", slog), ConfigError);
}

TEST_CASE("sweep command lays out the lambda-by-seed grid") {
    TempDir dir("sweep");
    KeyValues kv = tiny_run(9);
    kv.emplace_back("sigmas", "0,0.1");
    kv.emplace_back("n_test", "3");
    std::ostringstream log;
    cmd_sweep(kv, "0.1", "0", dir / "out", log);

    const std::string cell = dir / "out/lambda_0.1/seed_0";
    for (const char* leaf : {"checkpoint.bin", "history.csv", "manifest.txt", "noise.csv",
                             "pgd_curve.csv", "pgd_points.csv"})
        CHECK(fs::exists(cell + "/" + leaf));
    CHECK(fs::exists(dir / "out/lambda_0.1/manifest.txt"));

    const std::string combined = slurp(dir / "out/combined.csv");
    CHECK(combined.find("lambda,seed,kind,abscissa,value\n") == 0);
    CHECK(combined.find(",white,") != std::string::npos);
    CHECK(combined.find("0.1,0,white,0,") != std::string::npos);

    // the cell manifest pins the lambda that trained it
    const std::string manifest = slurp(cell + "/manifest.txt");
    CHECK(manifest.find("lambda_jr = 0.1") != std::string::npos);

    CHECK_THROWS_AS(cmd_sweep(kv, "abc", "0", dir / "bad", log), ConfigError);
    CHECK_THROWS_AS(cmd_sweep(kv, "-0.5", "0", dir / "bad", log), ConfigError);
    CHECK_THROWS_AS(cmd_sweep(kv, "", "0", dir / "bad", log), ConfigError);
    CHECK_THROWS_AS(cmd_sweep(kv, "0.1", "", dir / "bad", log), ConfigError);
}

TEST_CASE("self-checks pass clean and catch an injected sign flip") {
    std::ostringstream log;
    CHECK(cmd_check(false, log) == 0);
    CHECK(log.str().find("PASS") != std::string::npos);

    std::ostringstream flipped;
    CHECK(cmd_check(true, flipped) >= 1);
    CHECK(flipped.str().find("FAIL") != std::string::npos);
}
