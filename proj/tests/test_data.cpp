#include <doctest.h>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "mononet/data.hpp"
#include "mononet/errors.hpp"
#include "mononet/rng.hpp"

using namespace mononet;

namespace fs = std::filesystem;

#ifndef MONONET_DATA_DIR
#define MONONET_DATA_DIR "data"
#endif

namespace {

fs::path write_temp(const std::string& name, const std::string& content) {
    fs::path p = fs::temp_directory_path() / name;
    std::ofstream out(p, std::ios::binary);
    out << content;
    return p;
}

std::string data_dir() { return MONONET_DATA_DIR; }

// Writes an IDX image/label pair with the given pixel bytes (n x 28 x 28).
void write_idx_pair(const fs::path& images, const fs::path& labels,
                    const std::vector<std::uint8_t>& pixels,
                    const std::vector<std::uint8_t>& labs) {
    auto be32 = [](std::ofstream& o, std::uint32_t v) {
        for (int s = 24; s >= 0; s -= 8)
            o.put(static_cast<char>((v >> s) & 0xFF));
    };
    {
        std::ofstream o(images, std::ios::binary);
        be32(o, 0x803);
        be32(o, static_cast<std::uint32_t>(labs.size()));
        be32(o, 28);
        be32(o, 28);
        o.write(reinterpret_cast<const char*>(pixels.data()),
                static_cast<std::streamsize>(pixels.size()));
    }
    {
        std::ofstream o(labels, std::ios::binary);
        be32(o, 0x801);
        be32(o, static_cast<std::uint32_t>(labs.size()));
        o.write(reinterpret_cast<const char*>(labs.data()),
                static_cast<std::streamsize>(labs.size()));
    }
}

} // namespace

TEST_CASE("csv: small fixture parses with outcome first") {
    fs::path p = write_temp("mononet_test_small.csv",
                            "outcome,a,b\n1,0.5,2\n0,1.5,-1\n1,2.5,0.25\n");
    Dataset d = load_csv(p.string());
    CHECK(d.size() == 3);
    CHECK(d.width() == 2);
    CHECK(d.feature_names == std::vector<std::string>{"a", "b"});
    CHECK(d.labels == std::vector<int>{1, 0, 1});
    CHECK(d.features.at(0, 0) == 0.5);
    CHECK(d.features.at(1, 1) == -1.0);
    CHECK(d.features.at(2, 1) == 0.25);
    CHECK(d.num_classes() == 2);
    CHECK(d.feature_index("b") == 1);
    CHECK(d.feature_index("missing") == -1);
    fs::remove(p);
}

TEST_CASE("csv: plus-minus-one outcomes map to zero and one") {
    fs::path p = write_temp("mononet_test_pm1.csv",
                            "outcome,a\n-1,0\n+1,1\n1,2\n-1,3\n");
    Dataset d = load_csv(p.string());
    CHECK(d.labels == std::vector<int>{0, 1, 1, 0});
    fs::remove(p);
}

TEST_CASE("csv: malformed files fail with the line named") {
    auto expect_parse_error = [](const std::string& name, const std::string& content,
                                 const std::string& needle) {
        fs::path p = write_temp(name, content);
        try {
            load_csv(p.string());
            FAIL_CHECK("expected ParseError for " << name);
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find(needle) != std::string::npos);
        }
        fs::remove(p);
    };
    // Row 3 (line 3) is short one cell.
    expect_parse_error("mononet_test_short.csv",
                       "outcome,a,b\n1,0.5,2\n0,1.5\n", "line 3");
    // Non-numeric feature cell.
    expect_parse_error("mononet_test_nonnum.csv",
                       "outcome,a\n1,x\n", "line 2");
    // Outcome outside the accepted set.
    expect_parse_error("mononet_test_badlabel.csv",
                       "outcome,a\n2,0.5\n", "line 2");

    fs::path empty = write_temp("mononet_test_empty.csv", "");
    CHECK_THROWS_AS(load_csv(empty.string()), ParseError);
    fs::remove(empty);

    CHECK_THROWS_AS(load_csv((fs::temp_directory_path() /
                              "mononet_test_nofile.csv").string()),
                    ParseError);
}

TEST_CASE("csv: round-trip preserves a binary dataset exactly") {
    fs::path p = write_temp("mononet_test_rt_src.csv",
                            "outcome,f1,f2\n1,0,1\n0,1,0\n0,1,1\n1,0,0\n");
    Dataset d = load_csv(p.string());
    fs::path q = fs::temp_directory_path() / "mononet_test_rt_dst.csv";
    save_csv(d, q.string());
    Dataset e = load_csv(q.string());
    CHECK(e.labels == d.labels);
    CHECK(e.feature_names == d.feature_names);
    REQUIRE(e.features.shape() == d.features.shape());
    for (std::size_t i = 0; i < d.features.numel(); ++i)
        CHECK(e.features[i] == d.features[i]);
    fs::remove(p);
    fs::remove(q);
}

TEST_CASE("bundled income table exposes the documented one-hot columns") {
    Dataset d = load_csv(data_dir() + std::string("/tabular/income.csv"));
    CHECK(d.size() == 8000);
    for (const char* name : {"Married", "NeverMarried", "DivorcedOrSeparated",
                             "HSDiploma", "Age_leq_21", "AnyCapitalGains",
                             "WorkHrsPerWeek_leq_40", "JobManagerial"}) {
        INFO("column: " << name);
        CHECK(d.feature_index(name) >= 0);
    }
    // One-hot groups are exclusive and exhaustive per row.
    int m = d.feature_index("Married");
    int nm = d.feature_index("NeverMarried");
    int ds = d.feature_index("DivorcedOrSeparated");
    for (std::size_t i = 0; i < d.size(); ++i) {
        double s = d.features.at(i, static_cast<std::size_t>(m)) +
                   d.features.at(i, static_cast<std::size_t>(nm)) +
                   d.features.at(i, static_cast<std::size_t>(ds));
        CHECK(s == 1.0);
    }
}

TEST_CASE("bundled digit subset loads with image metadata") {
    Dataset d = load_idx(data_dir() + std::string("/mnist/mnist10k-images-idx3-ubyte"),
                         data_dir() + std::string("/mnist/mnist10k-labels-idx1-ubyte"));
    CHECK(d.size() == 10000);
    CHECK(d.width() == 784);
    CHECK(d.img_h == 28);
    CHECK(d.img_w == 28);
    CHECK(d.num_classes() == 10);
    std::set<int> seen(d.labels.begin(), d.labels.end());
    CHECK(seen.size() == 10);
    double lo = 1e9, hi = -1e9;
    for (std::size_t i = 0; i < d.features.numel(); ++i) {
        lo = std::min(lo, d.features[i]);
        hi = std::max(hi, d.features[i]);
    }
    CHECK(lo >= 0.0);
    CHECK(hi <= 1.0);
    CHECK(hi > 0.5);  // real pixels, not a zero file
}

TEST_CASE("idx: synthetic pair round-trips and errors are caught") {
    fs::path img = fs::temp_directory_path() / "mononet_test_img";
    fs::path lab = fs::temp_directory_path() / "mononet_test_lab";

    SUBCASE("single all-zero image") {
        write_idx_pair(img, lab, std::vector<std::uint8_t>(784, 0), {7});
        Dataset d = load_idx(img.string(), lab.string());
        CHECK(d.size() == 1);
        CHECK(d.labels[0] == 7);
        for (std::size_t i = 0; i < 784; ++i) CHECK(d.features[i] == 0.0);
    }
    SUBCASE("pixel 255 scales to one") {
        std::vector<std::uint8_t> px(784, 0);
        px[5] = 255;
        px[6] = 51;
        write_idx_pair(img, lab, px, {3});
        Dataset d = load_idx(img.string(), lab.string());
        CHECK(d.features[5] == 1.0);
        CHECK(d.features[6] == doctest::Approx(0.2).epsilon(1e-12));
    }
    SUBCASE("truncated image payload") {
        write_idx_pair(img, lab, std::vector<std::uint8_t>(784, 0), {1});
        fs::resize_file(img, fs::file_size(img) - 10);
        CHECK_THROWS_AS(load_idx(img.string(), lab.string()), FormatError);
    }
    SUBCASE("count mismatch between images and labels") {
        write_idx_pair(img, lab, std::vector<std::uint8_t>(784 * 2, 0), {1, 2});
        fs::path lab1 = fs::temp_directory_path() / "mononet_test_lab1";
        write_idx_pair(fs::temp_directory_path() / "mononet_test_img_ignore", lab1,
                       std::vector<std::uint8_t>(784, 0), {1});
        CHECK_THROWS_AS(load_idx(img.string(), lab1.string()), FormatError);
        fs::remove(lab1);
        fs::remove(fs::temp_directory_path() / "mononet_test_img_ignore");
    }
    SUBCASE("bad magic") {
        write_idx_pair(img, lab, std::vector<std::uint8_t>(784, 0), {1});
        std::fstream f(img, std::ios::in | std::ios::out | std::ios::binary);
        f.put(9);
        f.close();
        CHECK_THROWS_AS(load_idx(img.string(), lab.string()), FormatError);
    }
    fs::remove(img);
    fs::remove(lab);
}

TEST_CASE("split: sizes, determinism, and partition law") {
    Dataset d;
    d.name = "toy";
    d.feature_names = {"v"};
    d.features = Tensor({10, 1});
    for (std::size_t i = 0; i < 10; ++i) {
        d.features.at(i, 0) = static_cast<double>(i);
        d.labels.push_back(i < 5 ? 0 : 1);
    }

    auto parts = split(d, 0.2, 0);
    CHECK(parts.first.size() == 8);
    CHECK(parts.second.size() == 2);
    // Stratified: both classes appear in both halves.
    auto has = [](const Dataset& s, int c) {
        return std::find(s.labels.begin(), s.labels.end(), c) != s.labels.end();
    };
    for (int c : {0, 1}) {
        CHECK(has(parts.first, c));
        CHECK(has(parts.second, c));
    }

    auto again = split(d, 0.2, 0);
    CHECK(again.first.labels == parts.first.labels);
    for (std::size_t i = 0; i < parts.first.features.numel(); ++i)
        CHECK(again.first.features[i] == parts.first.features[i]);

    // Partition: every source row appears exactly once across the two halves.
    for (int trial = 0; trial < 100; ++trial) {
        Rng rng(static_cast<std::uint64_t>(trial) + 1000);
        std::size_t n = 4 + rng.uniform_int(40);
        Dataset s;
        s.feature_names = {"v"};
        s.features = Tensor({n, 1});
        for (std::size_t i = 0; i < n; ++i) {
            s.features.at(i, 0) = static_cast<double>(i);  // unique key per row
            s.labels.push_back(static_cast<int>(rng.uniform_int(2)));
        }
        // Stratification needs two of each class; pin the first four rows.
        s.labels[0] = 0;
        s.labels[1] = 0;
        s.labels[2] = 1;
        s.labels[3] = 1;
        double frac = 0.1 + 0.4 * rng.uniform(0.0, 1.0);
        auto sp = split(s, frac, static_cast<std::uint64_t>(trial));
        CHECK(sp.first.size() + sp.second.size() == n);
        std::set<double> seen;
        for (std::size_t i = 0; i < sp.first.size(); ++i)
            seen.insert(sp.first.features.at(i, 0));
        for (std::size_t i = 0; i < sp.second.size(); ++i)
            seen.insert(sp.second.features.at(i, 0));
        CHECK(seen.size() == n);
    }
}

TEST_CASE("split: bad fractions are rejected") {
    Dataset d;
    d.feature_names = {"v"};
    d.features = Tensor({4, 1});
    d.labels = {0, 1, 0, 1};
    CHECK_THROWS_AS(split(d, -0.1, 0), ContractError);
    CHECK_THROWS_AS(split(d, 1.0, 0), ContractError);
}

TEST_CASE("minmax scaling maps columns to the unit interval") {
    Dataset d;
    d.feature_names = {"a", "b", "c"};
    d.features = Tensor({3, 3});
    double rows[3][3] = {{2.0, 5.0, 1.0}, {4.0, 5.0, 0.0}, {6.0, 5.0, 0.5}};
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) d.features.at(i, j) = rows[i][j];
    d.labels = {0, 1, 0};
    minmax_scale(d);
    CHECK(d.features.at(0, 0) == 0.0);
    CHECK(d.features.at(1, 0) == 0.5);
    CHECK(d.features.at(2, 0) == 1.0);
    // Constant column untouched.
    for (std::size_t i = 0; i < 3; ++i) CHECK(d.features.at(i, 1) == 5.0);
    CHECK(d.features.at(0, 2) == 1.0);
    CHECK(d.features.at(1, 2) == 0.0);
    CHECK(d.features.at(2, 2) == 0.5);
}

TEST_CASE("take keeps rows in the requested order") {
    Dataset d;
    d.feature_names = {"v"};
    d.features = Tensor({4, 1});
    for (std::size_t i = 0; i < 4; ++i) d.features.at(i, 0) = static_cast<double>(i);
    d.labels = {0, 1, 0, 1};
    Dataset t = d.take({3, 1});
    CHECK(t.size() == 2);
    CHECK(t.features.at(0, 0) == 3.0);
    CHECK(t.features.at(1, 0) == 1.0);
    CHECK(t.labels == std::vector<int>{1, 1});
}
