#include <doctest.h>

#include <sys/resource.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <streambuf>
#include <string>
#include <vector>

#include "crowdstream/cli.hpp"

namespace cli = crowdstream::cli;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args, const std::string& input = "") {
    args.insert(args.begin(), "crowdstream");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::istringstream in(input);
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), in, out, err);
    return {code, out.str(), err.str()};
}

std::vector<std::string> lines(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream is(s);
    for (std::string l; std::getline(is, l);) out.push_back(l);
    return out;
}

// Produces `rows` lines of n labels, starting with a header, without ever
// holding the whole input in memory.
class RowSource : public std::streambuf {
public:
    RowSource(long long rows, int n) : rows_(rows), n_(n) { line_ = std::to_string(n) + " 1\n"; set(); }

protected:
    int_type underflow() override {
        if (gptr() < egptr()) return traits_type::to_int_type(*gptr());
        if (emitted_ >= rows_) return traits_type::eof();
        line_.clear();
        state_ = state_ * 6364136223846793005ULL + 1442695040888963407ULL;
        const bool truth = (state_ >> 63) != 0;
        for (int i = 0; i < n_; ++i) {
            state_ = state_ * 6364136223846793005ULL + 1442695040888963407ULL;
            // Labeller i is wrong with probability roughly (i + 1) / (3n).
            const bool wrong = (state_ >> 40) % (3 * n_) < static_cast<unsigned long long>(i + 1);
            line_ += (truth != wrong) ? "1" : "-1";
            line_ += i + 1 < n_ ? ' ' : '\n';
        }
        ++emitted_;
        set();
        return traits_type::to_int_type(*gptr());
    }

private:
    void set() { setg(line_.data(), line_.data(), line_.data() + line_.size()); }
    long long rows_;
    int n_;
    long long emitted_ = 0;
    unsigned long long state_ = 88172645463325252ULL;
    std::string line_;
};

// Discards output but keeps the last `keep` bytes and counts newlines.
class TailSink : public std::streambuf {
public:
    long long newlines = 0;
    std::string tail;

protected:
    int_type overflow(int_type c) override {
        if (c == traits_type::eof()) return c;
        push(static_cast<char>(c));
        return c;
    }
    std::streamsize xsputn(const char* s, std::streamsize k) override {
        for (std::streamsize i = 0; i < k; ++i) push(s[i]);
        return k;
    }

private:
    void push(char c) {
        newlines += c == '\n';
        tail.push_back(c);
        if (tail.size() > 4096) tail.erase(0, 2048);
    }
};

long peak_rss_kb() {
    rusage u{};
    getrusage(RUSAGE_SELF, &u);
    return u.ru_maxrss;
}

}  // namespace

TEST_CASE("usage errors exit 1") {
    CHECK(run({}).code == cli::kUsage);
    CHECK(run({"bogus"}).code == cli::kUsage);
    CHECK(run({"simulate", "--n", "2", "--tasks", "5"}).code == cli::kUsage);
    CHECK(run({"simulate", "--n", "5", "--tasks", "5"}).code == cli::kUsage);  // odd n
    CHECK(run({"simulate", "--profile", "wave"}).code == cli::kUsage);
    CHECK(run({"simulate", "--alpha", "0"}).code == cli::kUsage);
    CHECK(run({"simulate", "--methods", "ab,xyz"}).code == cli::kUsage);
    CHECK(run({"simulate", "--beta", "1.5"}).code == cli::kUsage);
    CHECK(run({"eval", "--labels", "x"}).code == cli::kUsage);
    CHECK(run({"--help"}).code == cli::kOk);
}

TEST_CASE("simulate output format") {
    const auto r = run({"simulate", "--n", "6", "--p1", "0.1", "--tasks", "20", "--runs", "3", "--seed", "7"});
    REQUIRE(r.code == cli::kOk);
    const auto ls = lines(r.out);
    REQUIRE(ls.size() == 3 + 20);
    CHECK(ls[0] == "# crowdstream simulate");
    CHECK(ls[1].find("n=6") != std::string::npos);
    CHECK(ls[1].find("averaging=uniform") != std::string::npos);
    CHECK(ls[2].rfind("# t\tlinf_error", 0) == 0);
    CHECK(ls[2].find("p1_true") != std::string::npos);
    std::istringstream row(ls.back());
    std::vector<double> cols;
    for (double v; row >> v;) cols.push_back(v);
    CHECK(cols.size() == 12);
    CHECK(cols[0] == 20);
    CHECK(cols[8] == doctest::Approx(0.1));
}

TEST_CASE("simulate is deterministic given the seed") {
    const std::vector<std::string> args{"simulate", "--profile", "sinusoid", "--n", "8",
                                        "--tasks", "200", "--runs", "4", "--seed", "42",
                                        "--methods", "ab,mv,em,oracle", "--em-every", "40"};
    const auto a = run(args);
    const auto b = run(args);
    REQUIRE(a.code == cli::kOk);
    CHECK(a.out == b.out);
    CHECK(a.out.find("averaging=ewma") != std::string::npos);
    CHECK(a.out.find("em_errors") != std::string::npos);
    auto other = args;
    other[10] = "43";
    CHECK(run(other).out != a.out);
}

TEST_CASE("simulate with explicit p and --out") {
    const auto path = std::filesystem::temp_directory_path() / "crowdstream_cli_sim.tsv";
    const auto r = run({"simulate", "--p", "0.1,0.2,0.3", "--tasks", "10", "--out", path.string(), "--trace", "3"});
    REQUIRE(r.code == cli::kOk);
    CHECK(r.out.empty());
    std::ifstream f(path);
    std::stringstream ss;
    ss << f.rdbuf();
    CHECK(ss.str().find("profile=explicit") != std::string::npos);
    CHECK(ss.str().find("p3_true") != std::string::npos);
    std::filesystem::remove(path);
}

TEST_CASE("all-fallback runs warn and, with --strict, exit 3") {
    const std::vector<std::string> base{"simulate", "--p", "0.5,0.5,0.5,0.5", "--alpha", "0.05",
                                        "--tasks", "3", "--runs", "1"};
    const auto loose = run(base);
    auto strict_args = base;
    strict_args.push_back("--strict");
    const auto strict = run(strict_args);
    // Almost nobody answers, so every agreement estimate is 0 and has no root.
    CHECK(loose.code == cli::kOk);
    CHECK(loose.err.find("fell back") != std::string::npos);
    CHECK(strict.code == cli::kNumericalFailure);
    CHECK(strict.out == loose.out);
}

TEST_CASE("eval") {
    const auto dir = std::filesystem::temp_directory_path() / "crowdstream_cli_eval";
    std::filesystem::create_directories(dir);
    {
        std::ofstream l(dir / "labels.csv");
        l << "task,worker,label\n";
        std::ofstream t(dir / "truth.csv");
        const int pattern[6][3] = {{1, 1, 2}, {2, 2, 2}, {1, 2, 1}, {1, 1, 1}, {2, 2, 1}, {2, 1, 2}};
        const int truth[6] = {1, 2, 1, 1, 2, 2};
        for (int k = 0; k < 6; ++k) {
            for (int w = 0; w < 3; ++w) l << "q" << k << ",w" << w << "," << pattern[k][w] << "\n";
            t << "q" << k << "," << truth[k] << "\n";
        }
        std::ofstream bad(dir / "bad.csv");
        bad << "q0,w0,1\nq0,w1\n";
    }
    const auto labels = (dir / "labels.csv").string();
    const auto truth = (dir / "truth.csv").string();

    const auto r = run({"eval", "--labels", labels, "--truth", truth, "--methods", "mv"});
    REQUIRE(r.code == cli::kOk);
    const auto ls = lines(r.out);
    REQUIRE(ls.size() == 4);
    CHECK(ls[1].find("n=3 t=6 labels=18") != std::string::npos);
    CHECK(ls[3] == "mv\t0.000");

    const auto all = run({"eval", "--labels", labels, "--truth", truth, "--prequential"});
    CHECK(all.code == cli::kOk);
    CHECK(lines(all.out).size() == 6);
    CHECK(all.out.find("mode=prequential") != std::string::npos);
    CHECK(run({"eval", "--labels", labels, "--truth", truth}).out ==
          run({"eval", "--labels", labels, "--truth", truth}).out);

    const auto bad = run({"eval", "--labels", (dir / "bad.csv").string(), "--truth", truth});
    CHECK(bad.code == cli::kDataError);
    CHECK(bad.err.find("line 2") != std::string::npos);
    CHECK(run({"eval", "--labels", "/nonexistent", "--truth", truth}).code == cli::kDataError);
    CHECK(run({"eval", "--labels", labels, "--truth", truth, "--methods", "zz"}).code == cli::kUsage);
    std::filesystem::remove_all(dir);
}

TEST_CASE("predict") {
    SUBCASE("basic stream") {
        const auto r = run({"predict"}, "3 1\n1 1 -1\n-1 -1 -1\n1 0 1\n");
        REQUIRE(r.code == cli::kOk);
        const auto ls = lines(r.out);
        REQUIRE(ls.size() == 5);
        CHECK(ls[0] == "1");
        CHECK(ls[1] == "-1");
        CHECK(ls[2] == "1");
        CHECK(ls[3] == "# tasks 3");
        CHECK(ls[4].rfind("# p_hat ", 0) == 0);
    }
    SUBCASE("malformed rows are skipped with a diagnostic") {
        const auto r = run({"predict"}, "3 1\n1 1 1\n1 2 1\n1 1\nfoo\n-1 -1 -1\n");
        REQUIRE(r.code == cli::kOk);
        CHECK(lines(r.out).size() == 4);
        CHECK(r.out.find("# tasks 2") != std::string::npos);
        CHECK(r.err.find("line 3") != std::string::npos);
        CHECK(r.err.find("line 4") != std::string::npos);
        CHECK(r.err.find("line 5") != std::string::npos);
    }
    SUBCASE("bad headers exit 2") {
        CHECK(run({"predict"}, "").code == cli::kDataError);
        CHECK(run({"predict"}, "2 1\n").code == cli::kDataError);
        CHECK(run({"predict"}, "4 1.5\n").code == cli::kDataError);
        CHECK(run({"predict"}, "4 1 2\n").code == cli::kDataError);
        CHECK(run({"predict"}, "four 1\n").code == cli::kDataError);
    }
    SUBCASE("EWMA header and determinism") {
        const std::string in = "4 1 0.1\n1 1 1 -1\n1 -1 1 1\n-1 -1 -1 1\n1 1 -1 1\n";
        const auto a = run({"predict", "--seed", "5"}, in);
        CHECK(a.code == cli::kOk);
        CHECK(a.out == run({"predict", "--seed", "5"}, in).out);
    }
}

TEST_CASE("predict streams a million rows in bounded memory") {
    const long before = peak_rss_kb();
    const long long rows = 1000000;
    RowSource src(rows, 5);
    TailSink sink;
    std::istream in(&src);
    std::ostream out(&sink);
    std::ostringstream err;
    const char* argv[] = {"crowdstream", "predict"};
    const int code = cli::run(2, argv, in, out, err);
    CHECK(code == cli::kOk);
    CHECK(sink.newlines == rows + 2);
    CHECK(sink.tail.find("# tasks 1000000") != std::string::npos);
    CHECK(err.str().empty());
    // Storing the rows or predictions would cost well over 16 MB.
    CHECK(peak_rss_kb() - before < 16 * 1024);
}
