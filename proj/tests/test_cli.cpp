#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

struct CmdResult {
    int code = -1;
    std::string out;
};

CmdResult run_cmd(const std::string& args) {
    const std::string full = std::string(FRUITNET_CLI_PATH) + " " + args + " 2>&1";
    FILE* pipe = popen(full.c_str(), "r");
    REQUIRE(pipe != nullptr);
    CmdResult result;
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof(buf), pipe)) > 0) result.out.append(buf, n);
    const int status = pclose(pipe);
    result.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("fruitnet_cli_" + tag + "_" +
                                            std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("synth writes the advertised file tree deterministically") {
    TempDir tmp("synth");
    auto r = run_cmd("synth --classes 3 --per-class 100 --size 32 --seed 5 --out " +
                     (tmp / "a"));
    CHECK(r.code == 0);

    std::size_t dirs = 0, files = 0;
    for (const auto& e : fs::recursive_directory_iterator(tmp / "a")) {
        if (e.is_directory()) ++dirs;
        if (e.is_regular_file()) ++files;
    }
    CHECK(dirs == 3);
    CHECK(files == 300);

    auto r2 = run_cmd("synth --classes 3 --per-class 100 --size 32 --seed 5 --out " +
                      (tmp / "b"));
    CHECK(r2.code == 0);
    CHECK(slurp(fs::path(tmp / "a") / "class_0" / "img_00000.png") ==
          slurp(fs::path(tmp / "b") / "class_0" / "img_00000.png"));
    CHECK(slurp(fs::path(tmp / "a") / "class_2" / "img_00099.png") ==
          slurp(fs::path(tmp / "b") / "class_2" / "img_00099.png"));
}

TEST_CASE("train writes history, checkpoint and manifest") {
    TempDir tmp("train");
    REQUIRE(run_cmd("synth --classes 3 --per-class 10 --size 16 --seed 2 --out " +
                    (tmp / "data"))
                .code == 0);

    auto r = run_cmd("train --data " + (tmp / "data") +
                     " --case 1 --epochs 1 --image-size 16 --seed 3 --out " + (tmp / "run"));
    CHECK(r.code == 0);
    CHECK(fs::exists(fs::path(tmp / "run") / "history.csv"));
    CHECK(fs::exists(fs::path(tmp / "run") / "checkpoint.frck"));
    CHECK(fs::exists(fs::path(tmp / "run") / "manifest.json"));

    const std::string csv = slurp(fs::path(tmp / "run") / "history.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);  // header + exactly 1 row
    CHECK(csv.rfind("epoch,train_loss", 0) == 0);
}

TEST_CASE("train exit codes: missing data is 2, numerical blowup is 3") {
    TempDir tmp("trainerr");
    auto r = run_cmd("train --data " + (tmp / "nope") + " --case 4");
    CHECK(r.code == 2);
    CHECK(r.out.find("does not exist") != std::string::npos);

    REQUIRE(run_cmd("synth --classes 2 --per-class 4 --size 8 --seed 2 --out " +
                    (tmp / "data"))
                .code == 0);
    auto blow = run_cmd("train --data " + (tmp / "data") +
                        " --case 1 --epochs 1 --image-size 8 --lr 1e300 --out " +
                        (tmp / "run"));
    CHECK(blow.code == 3);
    CHECK(blow.out.find("numerical failure") != std::string::npos);
}

TEST_CASE("deterministic training runs are byte-identical") {
    TempDir tmp("det");
    REQUIRE(run_cmd("synth --classes 3 --per-class 8 --size 16 --seed 9 --out " +
                    (tmp / "data"))
                .code == 0);
    const std::string flags = "train --data " + (tmp / "data") +
                              " --case 4 --epochs 2 --image-size 16 --seed 11 --deterministic";
    REQUIRE(run_cmd(flags + " --out " + (tmp / "r1")).code == 0);
    REQUIRE(run_cmd(flags + " --out " + (tmp / "r2")).code == 0);
    CHECK(slurp(fs::path(tmp / "r1") / "history.csv") ==
          slurp(fs::path(tmp / "r2") / "history.csv"));
    CHECK(slurp(fs::path(tmp / "r1") / "checkpoint.frck") ==
          slurp(fs::path(tmp / "r2") / "checkpoint.frck"));
}

TEST_CASE("eval and predict on an overfit checkpoint") {
    TempDir tmp("evalpred");
    REQUIRE(run_cmd("synth --classes 3 --per-class 10 --size 16 --seed 4 --out " +
                    (tmp / "data"))
                .code == 0);
    REQUIRE(run_cmd("train --data " + (tmp / "data") +
                    " --case 1 --epochs 8 --image-size 16 --seed 4 --out " + (tmp / "run"))
                .code == 0);
    const std::string ckpt = (fs::path(tmp / "run") / "checkpoint.frck").string();

    auto ev = run_cmd("eval --checkpoint " + ckpt + " --data " + (tmp / "data"));
    CHECK(ev.code == 0);
    CHECK(ev.out.find("accuracy 1.000000") != std::string::npos);

    auto ev2 = run_cmd("eval --checkpoint " + ckpt + " --data " + (tmp / "data"));
    CHECK(ev2.out == ev.out);

    auto pred = run_cmd("predict --checkpoint " + ckpt + " --image " +
                        (fs::path(tmp / "data") / "class_1" / "img_00003.png").string() +
                        " --topk 1");
    CHECK(pred.code == 0);
    CHECK(pred.out.rfind("class_1", 0) == 0);

    // probabilities over all classes sum to 1
    auto all = run_cmd("predict --checkpoint " + ckpt + " --image " +
                       (fs::path(tmp / "data") / "class_0" / "img_00000.png").string() +
                       " --topk 25");
    CHECK(all.code == 0);
    double sum = 0;
    std::istringstream lines(all.out);
    std::string name;
    double p;
    int rows = 0;
    while (lines >> name >> p) {
        sum += p;
        ++rows;
    }
    CHECK(rows == 3);  // clamped to the class count
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));

    auto bad = run_cmd("predict --checkpoint " + ckpt + " --image " +
                       (fs::path(tmp / "data") / "class_0" / "img_00000.png").string() +
                       " --topk 0");
    CHECK(bad.code == 2);
}

TEST_CASE("eval rejects class-count mismatch and corrupt checkpoints") {
    TempDir tmp("evalbad");
    REQUIRE(run_cmd("synth --classes 3 --per-class 4 --size 8 --seed 4 --out " +
                    (tmp / "data3"))
                .code == 0);
    REQUIRE(run_cmd("synth --classes 4 --per-class 4 --size 8 --seed 4 --out " +
                    (tmp / "data4"))
                .code == 0);
    REQUIRE(run_cmd("train --data " + (tmp / "data3") +
                    " --case 1 --epochs 1 --image-size 8 --seed 4 --out " + (tmp / "run"))
                .code == 0);
    const std::string ckpt = (fs::path(tmp / "run") / "checkpoint.frck").string();

    auto mismatch = run_cmd("eval --checkpoint " + ckpt + " --data " + (tmp / "data4"));
    CHECK(mismatch.code == 2);

    std::ofstream(tmp / "garbage.frck", std::ios::binary) << "not a checkpoint";
    auto corrupt = run_cmd("eval --checkpoint " + (tmp / "garbage.frck") + " --data " +
                           (tmp / "data3"));
    CHECK(corrupt.code == 2);
    CHECK(corrupt.out.find("magic") != std::string::npos);
}

TEST_CASE("gradcheck command") {
    auto r = run_cmd("gradcheck --case 4");
    CHECK(r.code == 0);
    CHECK(r.out.find("FAIL") == std::string::npos);
    CHECK(r.out.find("conv1.weights") != std::string::npos);
    CHECK(r.out.find("fc2.bias") != std::string::npos);

    CHECK(run_cmd("gradcheck --case 0").code == 2);
    CHECK(run_cmd("gradcheck --case 4 --eps 0").code == 2);
}

TEST_CASE("curves command") {
    TempDir tmp("curves");
    std::ofstream(tmp / "h.csv") << "epoch,train_loss,train_acc,test_loss,test_acc,lr,seconds\n"
                                    "1,0.5,0.6,0.55,0.58,0.002,0\n"
                                    "2,0.3,0.8,0.35,0.75,0.002,0\n";
    auto r = run_cmd("curves --history " + (tmp / "h.csv") + " --out " + (tmp / "c.svg"));
    CHECK(r.code == 0);
    const std::string svg = slurp(tmp / "c.svg");
    for (const char* id : {"train_acc", "test_acc", "train_loss", "test_loss"})
        CHECK(svg.find("id=\"" + std::string(id) + "\"") != std::string::npos);

    std::ofstream(tmp / "empty.csv") << "";
    CHECK(run_cmd("curves --history " + (tmp / "empty.csv") + " --out " + (tmp / "e.svg"))
              .code == 2);

    std::ofstream(tmp / "bad.csv")
        << "epoch,train_loss,train_acc,test_loss,test_acc,lr,seconds\n1,zz,0,0,0,0,0\n";
    auto bad = run_cmd("curves --history " + (tmp / "bad.csv") + " --out " + (tmp / "b.svg"));
    CHECK(bad.code == 2);
    CHECK(bad.out.find("row 2") != std::string::npos);
}

TEST_CASE("help text exits 0 and documents defaults") {
    auto top = run_cmd("--help");
    CHECK(top.code == 0);
    for (const char* sub : {"train", "eval", "predict", "gradcheck", "synth", "curves"})
        CHECK(top.out.find(sub) != std::string::npos);

    auto tr = run_cmd("train --help");
    CHECK(tr.code == 0);
    CHECK(tr.out.find("0.002") != std::string::npos);  // lr default
    CHECK(tr.out.find("15") != std::string::npos);     // epochs/batch default
    CHECK(tr.out.find("--deterministic") != std::string::npos);

    CHECK(run_cmd("train --bogus-flag x").code == 2);
    CHECK(run_cmd("").code == 2);  // a subcommand is required
}
